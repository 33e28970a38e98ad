#include "contract_forge/cost.hpp"

#include "contract_forge/errors.hpp"

#include <cmath>
#include <string>

namespace contract_forge {

double QuadraticCost::value(const Eigen::VectorXd& a) const {
    return 0.5 * a.dot(Q * a) + linear.dot(a) + constant;
}

Eigen::VectorXd QuadraticCost::gradient(const Eigen::VectorXd& a) const { return Q * a + linear; }

Eigen::VectorXd QuadraticCost::inverse_gradient(const Eigen::VectorXd& y) const { return Q.llt().solve(y - linear); }

double QuadraticCost::min_eigenvalue() const {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

double QuadraticCost::growth_radius(double slope) const {
    const double q = min_eigenvalue();
    const double b = std::max(slope, 0.0) + linear.norm();
    return (b + std::sqrt(b * b + 2.0 * q * std::abs(constant))) / q;
}

double QuadraticCost::bound(double k) const {
    const double b = k + linear.norm();
    return b * b / (2.0 * min_eigenvalue()) - constant;
}

void QuadraticCost::validate() const {
    if (Q.rows() == 0 || Q.rows() != Q.cols()) fail(ErrorCode::InvalidCost, "cost matrix must be square and non-empty");
    if (linear.size() != Q.rows()) fail(ErrorCode::InvalidCost, "cost linear term has the wrong length");
    if (!Q.allFinite() || !linear.allFinite() || !std::isfinite(constant))
        fail(ErrorCode::InvalidCost, "cost coefficients must be finite");
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()))
        fail(ErrorCode::InvalidCost, "cost matrix must be symmetric");
    if (!(min_eigenvalue() > 0.0)) fail(ErrorCode::InvalidCost, "cost matrix must be positive definite");
}

CostSpec::CostSpec(std::vector<QuadraticCost> per_time) : costs_(std::move(per_time)) {}

CostSpec CostSpec::stationary(QuadraticCost cost, int horizon) {
    return CostSpec(std::vector<QuadraticCost>(static_cast<std::size_t>(std::max(horizon, 0)), cost));
}

CostSpec CostSpec::scalar(double q, int n, int horizon) {
    QuadraticCost c{q * Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n), 0.0};
    return stationary(std::move(c), horizon);
}

const QuadraticCost& CostSpec::at(int t) const {
    if (t < 0 || t >= horizon()) fail(ErrorCode::InvalidCost, "no cost defined at time " + std::to_string(t));
    return costs_[static_cast<std::size_t>(t)];
}

int CostSpec::dim() const { return costs_.empty() ? 0 : costs_.front().dim(); }

bool CostSpec::is_stationary() const {
    for (const auto& c : costs_)
        if (c.Q != costs_.front().Q || c.linear != costs_.front().linear || c.constant != costs_.front().constant)
            return false;
    return true;
}

void CostSpec::validate(int n_assets, int horizon_) const {
    if (horizon() != horizon_)
        fail(ErrorCode::InvalidCost, "cost defined for " + std::to_string(horizon()) + " steps, horizon is " +
                                         std::to_string(horizon_));
    for (const auto& c : costs_) {
        c.validate();
        if (c.dim() != n_assets) fail(ErrorCode::InvalidCost, "cost dimension must equal the number of assets");
    }
}

}  // namespace contract_forge
