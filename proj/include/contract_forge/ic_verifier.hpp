#pragma once

#include "contract_forge/concave_program.hpp"
#include "contract_forge/contract_assembly.hpp"
#include "contract_forge/market_tree.hpp"
#include "contract_forge/principal_solver.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace contract_forge {

struct FocReport {
    /// residuals[t] holds the sup norms of the agent constraint, the effort
    /// equation, the sharing equation and the complementarity term at lambda = 0.
    std::vector<std::array<double, 4>> residuals;
    double lagrange_norm = 0.0;
    /// Max over times of |(beta - 1)[mu + sigma grad g^a(gamma)]|, vacuous at beta = 1.
    double beta_condition = 0.0;
    double max_residual() const;
};

struct IrReport {
    double ir_gap = 0.0;      // |H_0 - R|
    double policy_gap = 0.0;  // max nodewise |A_agent - A*|
};

struct BetaReport {
    std::vector<double> grid;
    std::vector<double> values;
    double gap = 0.0;  // max_beta value(beta) - value(1)
};

struct VerificationReport {
    double ic_worst_violation = 0.0;
    double ir_gap = 0.0;
    double policy_gap = 0.0;
    double beta_gap = 0.0;
    std::vector<std::array<double, 4>> foc_residuals;  // empty when not applicable
    double lagrange_norm = 0.0;
    std::vector<double> h_bound_slack;  // per time, min over nodes of K_t + E[h_{t+1}] - h_t
    std::vector<std::vector<bool>> degenerate_flags;
};

/// Max over nodes and grid deviations A in A* + [-radius, radius]^N of
/// U^a(Gamma* + (A - A*) . r) - c(A) - [U^a(Gamma*) - c(A*)]. Efforts are
/// taken from the contract, continuation values from the solution.
double verify_ic(const ScenarioTree& tree, const ContractSolution& contract, const NodalSolution& solution,
                 const ProblemSpec& spec, double grid_radius, int grid_points);

/// First-order system at lambda = 0 on a Markov tree. Throws NotMarkov for
/// nodal data that varies and InvalidPenalty when either side is TVAR.
FocReport verify_foc(const ScenarioTree& tree, const NodalSolution& solution, const ProblemSpec& spec);

/// Agent replay under the assembled contract.
IrReport verify_ir(const ScenarioTree& tree, const ContractSolution& contract, const ProblemSpec& spec,
                   const SolverOptions& options = {});

/// Constrained one-step value over (A, Gamma) satisfying the agent's incentive
/// constraint at loading beta.
double constrained_value(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& h_children,
                         const ProblemSpec& spec, double beta, const StepSolution& seed,
                         const SolverOptions& options = {});

/// beta_grid must contain 1.
BetaReport verify_beta(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& h_children,
                       const ProblemSpec& spec, const std::vector<double>& beta_grid,
                       const SolverOptions& options = {});

/// min over nodes of bound - h at each time.
std::vector<double> h_bound_slack(const ScenarioTree& tree, const NodalSolution& solution);

}  // namespace contract_forge
