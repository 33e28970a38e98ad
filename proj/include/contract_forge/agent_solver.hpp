#pragma once

#include "contract_forge/concave_program.hpp"
#include "contract_forge/cost.hpp"
#include "contract_forge/market_tree.hpp"
#include "contract_forge/penalty.hpp"

#include <Eigen/Dense>

#include <vector>

namespace contract_forge {

/// Linear contract S(A) = theta(P_{0:T}) + sum_t beta_t dW^A_{t+1}.
struct ContractInput {
    Eigen::VectorXd theta;            // one entry per leaf
    std::vector<Eigen::VectorXd> beta;  // beta[t](k) for node (t, k)
    double reservation = 0.0;

    /// beta = 1 at every node.
    static ContractInput unit_loading(const ScenarioTree& tree, Eigen::VectorXd theta, double reservation);
    void validate(const ScenarioTree& tree) const;
};

struct AgentResponse {
    std::vector<Eigen::VectorXd> H;         // H[t](k); H[T] = theta
    std::vector<Eigen::MatrixXd> A;         // A[t].row(k), t < T
    std::vector<Eigen::VectorXd> residual;  // stationarity residual per node
    double root_value() const { return H.front()(0); }
};

/// Backward recursion H_t = sup_A { U^a(H_{t+1} + beta A . r) - c_t(A) }.
/// Throws NonConvergence naming the node when no stationary point is found.
AgentResponse best_response(const ScenarioTree& tree, const ContractInput& contract, const PenaltySpec& agent_penalty,
                            const CostSpec& cost, const SolverOptions& options = {});

/// Agent one-step program at a node with continuation values `next` over children.
ConcaveProgram agent_program(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& next, double beta,
                             const PenaltySpec& agent_penalty, const QuadraticCost& cost);

/// beta mu - grad c(A) + beta sigma grad g^a(gamma), with sigma padded by zero
/// columns to the completed drivers.
Eigen::VectorXd agent_foc_residual(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& A,
                                   const Eigen::VectorXd& gamma, double beta, const PenaltySpec& agent_penalty,
                                   const QuadraticCost& cost);

/// sigma padded with zero columns to n_completed columns.
Eigen::MatrixXd padded_vol(const ScenarioTree& tree);

}  // namespace contract_forge
