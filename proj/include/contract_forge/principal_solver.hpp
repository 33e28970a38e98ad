#pragma once

#include "contract_forge/concave_program.hpp"
#include "contract_forge/cost.hpp"
#include "contract_forge/market_tree.hpp"
#include "contract_forge/penalty.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace contract_forge {

/// U^l = (1/gamma_l) U(gamma_l .) for a shared base functional U.
struct BasePreference {
    double gamma_a = 1.0;
    double gamma_p = 1.0;

    double principal_weight() const { return gamma_p / (gamma_a + gamma_p); }
    double agent_weight() const { return gamma_a / (gamma_a + gamma_p); }
    /// gamma_a gamma_p / (gamma_a + gamma_p)
    double combined() const { return gamma_a * gamma_p / (gamma_a + gamma_p); }
};

struct ProblemSpec {
    MarketSpec market;
    PenaltySpec agent_penalty = PenaltySpec::entropic(1.0);
    PenaltySpec principal_penalty = PenaltySpec::entropic(1.0);
    CostSpec cost;
    double reservation = 0.0;
    double initial_wealth = 0.0;
    std::optional<BasePreference> base_preference;

    /// Sets base_preference when both penalties are entropic.
    void detect_base_preference();
    /// Market, penalties, cost and the base-preference declaration.
    void validate() const;
};

enum class Branch { Regular, Degenerate };
std::string_view to_string(Branch b);

struct StepSolution {
    Eigen::VectorXd A;         // N
    Eigen::VectorXd gamma;     // D, coefficients of Gamma - E[Gamma]
    double beta = 1.0;
    double h = 0.0;            // Principal continuation value at the node
    Eigen::VectorXd Gamma;     // Agent continuation value over children
    Eigen::VectorXd lagrange;  // least-squares multiplier of the agent constraint
    double foc_residual = 0.0;
    double bound = 0.0;        // K_t + E[h_{t+1}]
    Branch branch = Branch::Regular;
    std::string method;
    int iterations = 0;
};

/// Backward solution in nodal form: steps[t][k] for t < T, h[t](k) for t <= T.
struct NodalSolution {
    std::vector<std::vector<StepSolution>> steps;
    std::vector<Eigen::VectorXd> h;
    bool markov = false;

    const StepSolution& at(NodeId node) const { return steps.at(static_cast<std::size_t>(node.time)).at(node.index); }
    double root_value() const { return h.front()(0); }
    bool complete(const ScenarioTree& tree) const;
};

/// Per-time deterministic solution of the Markov recursion; h has T + 1 entries.
struct MarkovSolution {
    std::vector<StepSolution> steps;
    std::vector<double> h;
};

/// K_t = sup_a { k |a| - c_t(a) } with k = 2 p_+ / p_- (scaled by sqrt(N)/2 when N > 4).
double growth_bound(const ScenarioTree& tree, const ProblemSpec& spec, int t);

/// Unconstrained one-step program over x = (A, gamma) at a node.
ConcaveProgram principal_program(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& h_children,
                                 const ProblemSpec& spec);

StepSolution solve_one_step(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& h_children,
                            const ProblemSpec& spec, const SolverOptions& options = {});

MarkovSolution solve_markov(const ScenarioTree& tree, const ProblemSpec& spec, const SolverOptions& options = {});

NodalSolution solve_backward(const ScenarioTree& tree, const ProblemSpec& spec, const SolverOptions& options = {});

/// Copies each per-time Markov step to every node of that time.
NodalSolution expand_markov(const ScenarioTree& tree, const MarkovSolution& markov);

/// (gamma_p / (gamma_a + gamma_p)) x
Eigen::VectorXd risk_share_split(const Eigen::VectorXd& x, double gamma_a, double gamma_p);

/// Least-squares multiplier of the agent constraint in the Lagrangian
/// stationarity equations at (A, gamma); zero for non-smooth agents.
Eigen::VectorXd lagrange_estimate(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& h_children,
                                  const ProblemSpec& spec, const Eigen::VectorXd& A, const Eigen::VectorXd& gamma);

}  // namespace contract_forge
