#pragma once

#include <Eigen/Dense>

#include <vector>

namespace contract_forge {

/// c(a) = a'Qa/2 + linear'a + constant with Q symmetric positive definite.
struct QuadraticCost {
    Eigen::MatrixXd Q;
    Eigen::VectorXd linear;
    double constant = 0.0;

    int dim() const noexcept { return static_cast<int>(Q.rows()); }
    double value(const Eigen::VectorXd& a) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& a) const;
    const Eigen::MatrixXd& hessian() const noexcept { return Q; }
    /// (grad c)^{-1}(y) = Q^{-1}(y - linear).
    Eigen::VectorXd inverse_gradient(const Eigen::VectorXd& y) const;
    Eigen::VectorXd minimizer() const { return inverse_gradient(Eigen::VectorXd::Zero(dim())); }
    double min_eigenvalue() const;
    /// Radius beyond which c(a)/|a| exceeds `slope`.
    double growth_radius(double slope) const;
    /// sup_a { k|a| - c(a) } bounded in closed form by (k + |linear|)^2 / (2 min eig Q) - constant.
    double bound(double k) const;

    /// Throws InvalidCost unless Q is symmetric positive definite and all entries are finite.
    void validate() const;
};

/// One quadratic cost per time step.
class CostSpec {
public:
    CostSpec() = default;
    explicit CostSpec(std::vector<QuadraticCost> per_time);

    /// The same cost at every time.
    static CostSpec stationary(QuadraticCost cost, int horizon);
    /// c(a) = q |a|^2 / 2 in dimension n.
    static CostSpec scalar(double q, int n, int horizon);

    const QuadraticCost& at(int t) const;
    int horizon() const noexcept { return static_cast<int>(costs_.size()); }
    int dim() const;
    bool is_stationary() const;
    void validate(int n_assets, int horizon) const;

private:
    std::vector<QuadraticCost> costs_;
};

}  // namespace contract_forge
