#include "contract_forge/agent_solver.hpp"

#include "contract_forge/errors.hpp"
#include "contract_forge/oce.hpp"
#include "contract_forge/parallel.hpp"

#include <sstream>

namespace contract_forge {

ContractInput ContractInput::unit_loading(const ScenarioTree& tree, Eigen::VectorXd theta, double reservation) {
    ContractInput c;
    c.theta = std::move(theta);
    c.reservation = reservation;
    for (int t = 0; t < tree.horizon(); ++t)
        c.beta.push_back(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(tree.node_count(t))));
    return c;
}

void ContractInput::validate(const ScenarioTree& tree) const {
    if (static_cast<std::size_t>(theta.size()) != tree.leaf_count())
        fail(ErrorCode::ValidationError, "theta must have one entry per leaf");
    if (!theta.allFinite()) fail(ErrorCode::ValidationError, "theta must be finite");
    if (static_cast<int>(beta.size()) != tree.horizon())
        fail(ErrorCode::ValidationError, "beta must be given for every time step");
    for (int t = 0; t < tree.horizon(); ++t) {
        const auto& b = beta[static_cast<std::size_t>(t)];
        if (static_cast<std::size_t>(b.size()) != tree.node_count(t))
            fail(ErrorCode::ValidationError, "beta must have one entry per node");
        if (!b.allFinite()) fail(ErrorCode::ValidationError, "beta must be finite");
    }
}

Eigen::MatrixXd padded_vol(const ScenarioTree& tree) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(tree.n_assets(), tree.n_completed());
    s.leftCols(tree.n_drivers()) = tree.spec().vol;
    return s;
}

ConcaveProgram agent_program(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& next, double beta,
                             const PenaltySpec& agent_penalty, const QuadraticCost& cost) {
    ConcaveProgram p;
    p.n = tree.n_assets();
    p.cost = cost;
    p.terms.push_back({agent_penalty, tree.child_probabilities(node), beta * tree.returns(node), next});
    return p;
}

AgentResponse best_response(const ScenarioTree& tree, const ContractInput& contract, const PenaltySpec& agent_penalty,
                            const CostSpec& cost, const SolverOptions& options) {
    contract.validate(tree);
    validate_penalty(agent_penalty);
    cost.validate(tree.n_assets(), tree.horizon());
    const int T = tree.horizon();
    const Eigen::Index K = tree.branching();
    const double max_return = tree.returns(tree.root()).cwiseAbs().maxCoeff();

    AgentResponse out;
    out.H.resize(static_cast<std::size_t>(T) + 1);
    out.A.resize(static_cast<std::size_t>(T));
    out.residual.resize(static_cast<std::size_t>(T));
    out.H[static_cast<std::size_t>(T)] = contract.theta;
    for (int t = T - 1; t >= 0; --t) {
        const auto ts = static_cast<std::size_t>(t);
        const std::size_t count = tree.node_count(t);
        const auto& next = out.H[ts + 1];
        const QuadraticCost& c = cost.at(t);
        out.H[ts].resize(static_cast<Eigen::Index>(count));
        out.A[ts].resize(static_cast<Eigen::Index>(count), tree.n_assets());
        out.residual[ts].resize(static_cast<Eigen::Index>(count));
        parallel_for(count, [&](std::size_t k) {
            const NodeId node{t, k};
            const auto ki = static_cast<Eigen::Index>(k);
            const double beta = contract.beta[ts](ki);
            const ConcaveProgram program =
                agent_program(tree, node, next.segment(ki * K, K), beta, agent_penalty, c);
            const double radius = c.growth_radius(2.0 * std::abs(beta) * max_return + 1.0);
            const ProgramSolution sol = maximize(program, c.minimizer(), radius, options);
            if (!sol.converged) {
                std::ostringstream msg;
                msg << "agent best response did not converge at node (" << t << ", " << k
                    << "), residual " << sol.residual;
                fail(ErrorCode::NonConvergence, msg.str());
            }
            out.H[ts](ki) = sol.value;
            out.A[ts].row(ki) = sol.x.transpose();
            out.residual[ts](ki) = sol.residual;
        });
    }
    return out;
}

Eigen::VectorXd agent_foc_residual(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& A,
                                   const Eigen::VectorXd& gamma, double beta, const PenaltySpec& agent_penalty,
                                   const QuadraticCost& cost) {
    const Generator g(tree, node, agent_penalty);
    return beta * tree.spec().drift - cost.gradient(A) + beta * padded_vol(tree) * g.gradient(gamma);
}

}  // namespace contract_forge
