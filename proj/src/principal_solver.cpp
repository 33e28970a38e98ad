#include "contract_forge/principal_solver.hpp"

#include "contract_forge/agent_solver.hpp"
#include "contract_forge/errors.hpp"
#include "contract_forge/oce.hpp"
#include "contract_forge/parallel.hpp"

#include <cmath>
#include <sstream>

namespace contract_forge {

namespace {

std::string node_name(NodeId node) {
    std::ostringstream out;
    out << "(" << node.time << ", " << node.index << ")";
    return out.str();
}

bool base_mode(const ProblemSpec& spec) {
    return spec.base_preference && spec.agent_penalty.kind() == PenaltyKind::Entropic &&
           spec.principal_penalty.kind() == PenaltyKind::Entropic;
}

double search_radius(const ScenarioTree& tree, const ProblemSpec& spec, int t, const Eigen::VectorXd& h_children) {
    const double max_return = tree.returns(tree.root()).cwiseAbs().maxCoeff();
    const double a = spec.cost.at(t).growth_radius(2.0 * max_return + 1.0);
    const double spread = h_children.size() ? h_children.cwiseAbs().maxCoeff() : 0.0;
    return a * (1.0 + max_return) + spread / std::sqrt(tree.step()) + 1.0;
}

Branch classify(const ScenarioTree& tree, NodeId node, const ProblemSpec& spec, const Eigen::VectorXd& A,
                const Eigen::VectorXd& Gamma) {
    const Eigen::VectorXd q = oce_gradient(Gamma, tree.child_probabilities(node), spec.agent_penalty);
    const Eigen::VectorXd marginal = tree.returns(node).transpose() * q;
    const Eigen::VectorXd slope = spec.cost.at(node.time).gradient(A);
    const bool flat = marginal.cwiseAbs().maxCoeff() <= 1e-6;
    const bool minimal = slope.cwiseAbs().maxCoeff() <= 1e-6;
    return flat && minimal ? Branch::Degenerate : Branch::Regular;
}

}  // namespace

void ProblemSpec::detect_base_preference() {
    if (agent_penalty.kind() == PenaltyKind::Entropic && principal_penalty.kind() == PenaltyKind::Entropic)
        base_preference = BasePreference{agent_penalty.gamma(), principal_penalty.gamma()};
}

void ProblemSpec::validate() const {
    market.validate();
    validate_penalty(agent_penalty);
    validate_penalty(principal_penalty);
    cost.validate(market.n_assets, market.horizon);
    if (!std::isfinite(reservation) || !std::isfinite(initial_wealth))
        fail(ErrorCode::ValidationError, "reservation and initial wealth must be finite");
    if (base_preference) {
        const auto& b = *base_preference;
        if (!(b.gamma_a > 0.0) || !(b.gamma_p > 0.0))
            fail(ErrorCode::ValidationError, "base preference coefficients must be positive");
        if (agent_penalty.kind() != PenaltyKind::Entropic || principal_penalty.kind() != PenaltyKind::Entropic)
            fail(ErrorCode::ValidationError, "base preference requires entropic penalties on both sides");
        if (std::abs(agent_penalty.gamma() - b.gamma_a) > 1e-14 * b.gamma_a ||
            std::abs(principal_penalty.gamma() - b.gamma_p) > 1e-14 * b.gamma_p)
            fail(ErrorCode::ValidationError, "base preference coefficients must match the entropic penalties");
    }
}

std::string_view to_string(Branch b) { return b == Branch::Regular ? "regular" : "degenerate"; }

bool NodalSolution::complete(const ScenarioTree& tree) const {
    const int T = tree.horizon();
    if (static_cast<int>(steps.size()) != T || static_cast<int>(h.size()) != T + 1) return false;
    for (int t = 0; t <= T; ++t) {
        if (static_cast<std::size_t>(h[static_cast<std::size_t>(t)].size()) != tree.node_count(t)) return false;
        if (t < T && steps[static_cast<std::size_t>(t)].size() != tree.node_count(t)) return false;
    }
    for (const auto& level : steps)
        for (const auto& s : level)
            if (s.A.size() != tree.n_assets() || s.gamma.size() != tree.n_completed() ||
                s.Gamma.size() != tree.branching())
                return false;
    return true;
}

double growth_bound(const ScenarioTree& tree, const ProblemSpec& spec, int t) {
    const auto [lo, hi] = tree.price_bounds();
    const double k = 2.0 * hi / lo * std::max(1.0, std::sqrt(static_cast<double>(tree.n_assets())) / 2.0);
    return spec.cost.at(t).bound(k);
}

ConcaveProgram principal_program(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& h_children,
                                 const ProblemSpec& spec) {
    const int N = tree.n_assets();
    const int D = tree.n_completed();
    const Eigen::Index K = tree.branching();
    const Eigen::MatrixXd& W = tree.drivers(node);
    ConcaveProgram p;
    p.n = N + D;
    p.cost = spec.cost.at(node.time);
    Eigen::MatrixXd agent_map = Eigen::MatrixXd::Zero(K, N + D);
    agent_map.rightCols(D) = W;
    Eigen::MatrixXd principal_map(K, N + D);
    principal_map << tree.returns(node), -W;
    p.terms.push_back({spec.agent_penalty, tree.child_probabilities(node), agent_map, Eigen::VectorXd::Zero(K)});
    p.terms.push_back({spec.principal_penalty, tree.child_probabilities(node), principal_map, h_children});
    return p;
}

Eigen::VectorXd lagrange_estimate(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& h_children,
                                  const ProblemSpec& spec, const Eigen::VectorXd& A, const Eigen::VectorXd& gamma) {
    const int N = tree.n_assets();
    const int D = tree.n_completed();
    if (!spec.agent_penalty.is_smooth() || !spec.principal_penalty.is_smooth()) return Eigen::VectorXd::Zero(N);
    const ConcaveProgram p = principal_program(tree, node, h_children, spec);
    Eigen::VectorXd x(N + D);
    x << A, gamma;
    const Eigen::VectorXd g = p.gradient(x);
    const Generator ga(tree, node, spec.agent_penalty);
    Eigen::MatrixXd M(N + D, N);
    M << -spec.cost.at(node.time).hessian(), ga.hessian(gamma) * padded_vol(tree).transpose();
    return M.completeOrthogonalDecomposition().solve(-g);
}

StepSolution solve_one_step(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& h_children,
                            const ProblemSpec& spec, const SolverOptions& options) {
    if (tree.is_terminal(node)) fail(ErrorCode::TerminalNode, "one-step problem requested at a leaf");
    const Eigen::Index K = tree.branching();
    if (h_children.size() != K) fail(ErrorCode::ValidationError, "h_children must have one entry per child");
    if (!h_children.allFinite()) fail(ErrorCode::ValidationError, "h_children must be finite");
    const int N = tree.n_assets();
    const int D = tree.n_completed();
    const ConcaveProgram program = principal_program(tree, node, h_children, spec);
    const QuadraticCost& cost = spec.cost.at(node.time);
    Eigen::VectorXd start = Eigen::VectorXd::Zero(N + D);
    start.head(N) = cost.minimizer();
    const ProgramSolution sol = maximize(program, start, search_radius(tree, spec, node.time, h_children), options);

    const Eigen::VectorXd& probs = tree.child_probabilities(node);
    const double bound = growth_bound(tree, spec, node.time) + probs.dot(h_children);
    if (!std::isfinite(sol.value) || sol.value > bound + 1.0) {
        std::ostringstream msg;
        msg << "one-step value " << sol.value << " exceeds the growth bound " << bound << " at node "
            << node_name(node);
        fail(ErrorCode::Unbounded, msg.str());
    }
    if (!sol.converged) {
        std::ostringstream msg;
        msg << "principal one-step problem did not converge at node " << node_name(node) << ", residual "
            << sol.residual;
        fail(ErrorCode::NonConvergence, msg.str());
    }

    StepSolution s;
    s.A = sol.x.head(N);
    s.gamma = sol.x.tail(D);
    s.beta = 1.0;
    s.h = sol.value;
    s.bound = bound;
    s.method = sol.method;
    s.iterations = sol.iterations;
    const Eigen::MatrixXd& W = tree.drivers(node);
    s.Gamma = W * s.gamma;
    if (base_mode(spec)) {
        const double wp = spec.base_preference->principal_weight();
        s.Gamma.array() += wp * probs.dot(h_children + tree.returns(node) * s.A);
    }
    s.foc_residual = sol.residual;
    if (spec.agent_penalty.is_smooth()) {
        const Eigen::VectorXd agent = tree.returns(node).transpose() *
                                          oce_gradient(s.Gamma, probs, spec.agent_penalty) -
                                      cost.gradient(s.A);
        s.foc_residual = std::max(s.foc_residual, agent.cwiseAbs().maxCoeff());
    }
    s.lagrange = lagrange_estimate(tree, node, h_children, spec, s.A, s.gamma);
    s.branch = classify(tree, node, spec, s.A, s.Gamma);
    return s;
}

MarkovSolution solve_markov(const ScenarioTree& tree, const ProblemSpec& spec, const SolverOptions& options) {
    if (!tree.is_markov()) fail(ErrorCode::NotMarkov, "Markov mode requires the same one-step law at every node");
    const int T = tree.horizon();
    const int N = tree.n_assets();
    const Eigen::Index K = tree.branching();
    const NodeId root = tree.root();
    const Eigen::MatrixXd& W = tree.drivers(root);
    const Eigen::MatrixXd& R = tree.returns(root);
    const Eigen::VectorXd& probs = tree.child_probabilities(root);
    const Eigen::MatrixXd sigma = padded_vol(tree);

    MarkovSolution out;
    out.steps.resize(static_cast<std::size_t>(T));
    out.h.assign(static_cast<std::size_t>(T) + 1, 0.0);
    for (int t = T - 1; t >= 0; --t) {
        const double next = out.h[static_cast<std::size_t>(t) + 1];
        StepSolution s;
        const NodeId node{t, 0};
        if (base_mode(spec)) {
            const BasePreference& b = *spec.base_preference;
            const QuadraticCost& cost = spec.cost.at(t);
            // 0 = mu - grad c(A) + sigma grad g(ghat sigma' A) is the stationarity
            // condition of -c(A) + U_ghat(A . r).
            ConcaveProgram p;
            p.n = N;
            p.cost = cost;
            p.terms.push_back({PenaltySpec::entropic(b.combined()), probs, R, Eigen::VectorXd::Zero(K)});
            const double radius = cost.growth_radius(2.0 * R.cwiseAbs().maxCoeff() + 1.0);
            const ProgramSolution sol = maximize(p, cost.minimizer(), radius, options);
            if (!sol.converged) {
                std::ostringstream msg;
                msg << "base-preference effort equation did not converge at time " << t << ", residual "
                    << sol.residual;
                fail(ErrorCode::NonConvergence, msg.str());
            }
            s.A = sol.x;
            s.gamma = b.principal_weight() * sigma.transpose() * s.A;
            const Generator ga(W, probs, spec.agent_penalty);
            const Generator gp(W, probs, spec.principal_penalty);
            const Eigen::VectorXd rest = sigma.transpose() * s.A - s.gamma;
            s.h = spec.market.drift.dot(s.A) - cost.value(s.A) + ga.value(s.gamma) + gp.value(rest);
            s.Gamma = W * s.gamma;
            s.Gamma.array() += b.principal_weight() * spec.market.drift.dot(s.A);
            Eigen::VectorXd x(N + tree.n_completed());
            x << s.A, s.gamma;
            const Eigen::VectorXd joint = principal_program(tree, node, Eigen::VectorXd::Zero(K), spec).gradient(x);
            const Eigen::VectorXd agent = agent_foc_residual(tree, node, s.A, s.gamma, 1.0, spec.agent_penalty, cost);
            s.foc_residual = std::max({sol.residual, joint.cwiseAbs().maxCoeff(), agent.cwiseAbs().maxCoeff()});
            s.lagrange = lagrange_estimate(tree, node, Eigen::VectorXd::Zero(K), spec, s.A, s.gamma);
            s.bound = growth_bound(tree, spec, t);
            s.method = "base-preference";
            s.iterations = sol.iterations;
            s.branch = classify(tree, node, spec, s.A, s.Gamma);
        } else {
            s = solve_one_step(tree, node, Eigen::VectorXd::Zero(K), spec, options);
        }
        s.h += next;
        s.bound += next;
        out.h[static_cast<std::size_t>(t)] = s.h;
        out.steps[static_cast<std::size_t>(t)] = std::move(s);
    }
    return out;
}

NodalSolution solve_backward(const ScenarioTree& tree, const ProblemSpec& spec, const SolverOptions& options) {
    const int T = tree.horizon();
    const Eigen::Index K = tree.branching();
    NodalSolution out;
    out.steps.resize(static_cast<std::size_t>(T));
    out.h.resize(static_cast<std::size_t>(T) + 1);
    out.h[static_cast<std::size_t>(T)] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tree.leaf_count()));
    for (int t = T - 1; t >= 0; --t) {
        const auto ts = static_cast<std::size_t>(t);
        const std::size_t count = tree.node_count(t);
        const Eigen::VectorXd& next = out.h[ts + 1];
        out.steps[ts].resize(count);
        out.h[ts].resize(static_cast<Eigen::Index>(count));
        parallel_for(count, [&](std::size_t k) {
            const auto ki = static_cast<Eigen::Index>(k);
            out.steps[ts][k] = solve_one_step(tree, {t, k}, next.segment(ki * K, K), spec, options);
            out.h[ts](ki) = out.steps[ts][k].h;
        });
    }
    return out;
}

NodalSolution expand_markov(const ScenarioTree& tree, const MarkovSolution& markov) {
    const int T = tree.horizon();
    if (static_cast<int>(markov.steps.size()) != T || static_cast<int>(markov.h.size()) != T + 1)
        fail(ErrorCode::IncompleteSolution, "Markov solution does not cover the horizon");
    NodalSolution out;
    out.markov = true;
    out.steps.resize(static_cast<std::size_t>(T));
    out.h.resize(static_cast<std::size_t>(T) + 1);
    for (int t = 0; t <= T; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        out.h[ts] = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(tree.node_count(t)), markov.h[ts]);
        if (t < T) out.steps[ts].assign(tree.node_count(t), markov.steps[ts]);
    }
    return out;
}

Eigen::VectorXd risk_share_split(const Eigen::VectorXd& x, double gamma_a, double gamma_p) {
    if (!(gamma_a > 0.0) || !(gamma_p > 0.0)) fail(ErrorCode::ValidationError, "risk-share coefficients must be positive");
    return gamma_p / (gamma_a + gamma_p) * x;
}

}  // namespace contract_forge
