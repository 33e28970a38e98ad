#pragma once

#include "contract_forge/market_tree.hpp"
#include "contract_forge/penalty.hpp"

#include <Eigen/Dense>

#include <vector>

namespace contract_forge {

/// Finite-support conditional law of a payoff: X takes values[k] with
/// probability probs[k].
struct FiniteLottery {
    Eigen::VectorXd values;
    Eigen::VectorXd probs;

    static FiniteLottery uniform(const Eigen::VectorXd& values);
    void validate() const;
};

/// Density Z >= 0 with E[Z] = 1 on the support of a lottery.
struct DualWeight {
    Eigen::VectorXd z;
};

struct OceSolution {
    double value;
    double argmax;  // smallest maximising s for TVAR
};

// Unchecked evaluators used on hot paths; `values` and `probs` must have the
// same length and probs must be a probability vector.
OceSolution oce_solve(const Eigen::VectorXd& values, const Eigen::VectorXd& probs, const PenaltySpec& penalty);
double oce_value(const Eigen::VectorXd& values, const Eigen::VectorXd& probs, const PenaltySpec& penalty);

/// sup_s { s - E[H(s - X)] }. Validates the lottery.
double oce_evaluate(const FiniteLottery& lottery, const PenaltySpec& penalty);

/// dU/dvalues. For TVAR this is the supergradient pi * Z* of the minimising
/// dual density (ties split so that E[Z*] = 1). Entries sum to one.
Eigen::VectorXd oce_gradient(const Eigen::VectorXd& values, const Eigen::VectorXd& probs, const PenaltySpec& penalty);

/// Second derivative in the outcome values. Zero for TVAR.
Eigen::MatrixXd oce_hessian(const Eigen::VectorXd& values, const Eigen::VectorXd& probs, const PenaltySpec& penalty);

/// E[H*(Z)], the upper bound on the dual penalty alpha(Z); +infinity when some
/// z_k leaves dom(H*). Exactly alpha(Z) = E[Z log Z] / gamma for entropic.
double penalty_of_weight(const DualWeight& weight, const FiniteLottery& support, const PenaltySpec& penalty);

/// The Markov generator g(z) = U(z . dw) of one node, with derivatives.
/// Entropic and generic smooth penalties use exact envelope formulas.
class Generator {
public:
    Generator(Eigen::MatrixXd drivers, Eigen::VectorXd probs, PenaltySpec penalty);
    Generator(const ScenarioTree& tree, NodeId node, PenaltySpec penalty);

    double value(const Eigen::VectorXd& z) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& z) const;

    const Eigen::MatrixXd& drivers() const noexcept { return drivers_; }
    const Eigen::VectorXd& probs() const noexcept { return probs_; }
    const PenaltySpec& penalty() const noexcept { return penalty_; }

private:
    Eigen::MatrixXd drivers_;
    Eigen::VectorXd probs_;
    PenaltySpec penalty_;
};

double generator_eval(const Eigen::VectorXd& z, const ScenarioTree& tree, NodeId node, const PenaltySpec& penalty);
Eigen::VectorXd generator_grad(const Eigen::VectorXd& z, const ScenarioTree& tree, NodeId node,
                               const PenaltySpec& penalty);
Eigen::MatrixXd generator_hess(const Eigen::VectorXd& z, const ScenarioTree& tree, NodeId node,
                               const PenaltySpec& penalty);

/// Central finite differences of g with step 1e-5 (1 + |z_i|).
Eigen::VectorXd generator_fd_gradient(const Generator& g, const Eigen::VectorXd& z);
Eigen::MatrixXd generator_fd_hessian(const Generator& g, const Eigen::VectorXd& z);

/// Pasted dynamic utility: backward sweep of the one-step OCE. Returns one
/// vector of nodal values per time; element [0](0) is U_0(X).
std::vector<Eigen::VectorXd> dynamic_evaluate(const ScenarioTree& tree, const Eigen::VectorXd& terminal_values,
                                              const PenaltySpec& penalty);

}  // namespace contract_forge
