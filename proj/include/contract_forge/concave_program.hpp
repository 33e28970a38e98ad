#pragma once

#include "contract_forge/cost.hpp"
#include "contract_forge/penalty.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace contract_forge {

/// One OCE term U(map x + offset) in the outcomes of a node.
struct OceTerm {
    PenaltySpec penalty;
    Eigen::VectorXd probs;
    Eigen::MatrixXd map;     // outcomes x variables
    Eigen::VectorXd offset;  // outcomes
};

/// f(x) = sum_j U_j(M_j x + b_j) - c(x_0..x_{N-1}) over x in R^n.
struct ConcaveProgram {
    int n = 0;
    std::optional<QuadraticCost> cost;  // acts on the leading coordinates
    std::vector<OceTerm> terms;

    bool smooth() const;
    double value(const Eigen::VectorXd& x) const;
    /// Gradient for smooth programs, an envelope supergradient otherwise.
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;
};

struct SolverOptions {
    double tolerance = 1e-10;
    int max_iterations = 100;
    int grid_points = 21;
};

struct ProgramSolution {
    Eigen::VectorXd x;
    double value = 0.0;
    double residual = 0.0;  // |grad|_inf, or the KKT residual of the lifted program
    int iterations = 0;
    std::string method;
    bool converged = false;
};

/// Smooth programs: damped Newton with Armijo backtracking from `start`, then
/// a grid restart on [-radius, radius]^n and a Newton polish.
/// Programs with TVAR terms: each TVAR term is lifted to its linear-program
/// form and the result is solved by a primal-dual interior-point method
/// followed by an active-set polish.
ProgramSolution maximize(const ConcaveProgram& program, const Eigen::VectorXd& start, double radius,
                         const SolverOptions& options = {});

}  // namespace contract_forge
