#pragma once

#include "contract_forge/concave_program.hpp"
#include "contract_forge/cost.hpp"
#include "contract_forge/market_tree.hpp"
#include "contract_forge/penalty.hpp"
#include "contract_forge/principal_solver.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace contract_forge {

/// Sharing weights of the normal form S = kappa_bar + principal W^A + agent (W^A - W~).
struct SharingWeights {
    double principal = 0.5;  // gamma_p / (gamma_a + gamma_p)
    double agent = 0.5;      // gamma_a / (gamma_a + gamma_p)
};

/// Optimal linear contract with beta = 1: S(A) = theta + sum_t [dW^A_{t+1} - A*_t . r_{t+1}].
struct ContractSolution {
    Eigen::VectorXd theta;              // per leaf, includes the reservation R
    Eigen::VectorXd benchmark_wealth;   // W~_T = W0 + sum_t A*_t . r_{t+1}, per leaf
    std::vector<Eigen::MatrixXd> efforts;  // efforts[t].row(k) = A*(t, k)
    std::vector<Eigen::MatrixXd> gammas;   // gammas[t].row(k) = gamma*(t, k)
    std::optional<double> kappa;           // Markov mode
    std::optional<double> kappa_bar;       // base-preference Markov mode
    std::optional<SharingWeights> weights;  // base-preference mode
    double h0 = 0.0;
    double principal_value_root = 0.0;
    double agent_value_root = 0.0;
    double reservation = 0.0;
    double initial_wealth = 0.0;
    bool markov = false;
};

/// R + sum over the path of Gamma_{t+1} - U^a_t(Gamma_{t+1}) + c_t(A_t).
Eigen::VectorXd build_theta(const ScenarioTree& tree, const NodalSolution& solution, const PenaltySpec& agent_penalty,
                            const CostSpec& cost, double reservation);

/// Throws IncompleteSolution when the solution does not cover the tree.
/// Replays the Agent's best response to fill agent_value_root.
ContractSolution assemble_contract(const ScenarioTree& tree, const NodalSolution& solution, const ProblemSpec& spec,
                                   const SolverOptions& options = {});

/// W0 - R + h0
double principal_value(const NodalSolution& solution, double initial_wealth, double reservation);

/// Wealth W^A_T per leaf of a nodal effort policy started at W0.
Eigen::VectorXd terminal_wealth(const ScenarioTree& tree, const std::vector<Eigen::MatrixXd>& efforts,
                                double initial_wealth);

/// S(A) per leaf for a nodal effort policy.
Eigen::VectorXd payment(const ScenarioTree& tree, const ContractSolution& contract,
                        const std::vector<Eigen::MatrixXd>& efforts);

/// The payment at zero effort, theta - (W~_T - W0): the lump sum handed to the
/// Agent's recursion with beta = 1.
Eigen::VectorXd lump_sum(const ContractSolution& contract);

/// kappa_bar + principal W^A + agent (W^A - W~); requires base-preference Markov mode.
Eigen::VectorXd normal_form_payment(const ContractSolution& contract, const Eigen::VectorXd& wealth);

/// Cumulative sum_t gamma*_t . dw_{t+1} per leaf.
Eigen::VectorXd driver_integral(const ScenarioTree& tree, const ContractSolution& contract);

struct ReplicationResult {
    double max_residual = 0.0;  // max over leaves of |theta - projection|
    double rms_residual = 0.0;
    double cash = 0.0;
    int iterations = 0;
};

/// Least-squares projection of the leaf vector onto {c + sum_t phi_t . r_{t+1}}
/// over constants c and predictable positions phi.
ReplicationResult replication_residual(const ScenarioTree& tree, const Eigen::VectorXd& leaf_values);

}  // namespace contract_forge
