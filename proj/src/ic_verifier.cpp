#include "contract_forge/ic_verifier.hpp"

#include "contract_forge/agent_solver.hpp"
#include "contract_forge/errors.hpp"
#include "contract_forge/oce.hpp"
#include "contract_forge/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace contract_forge {

namespace {

double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Hooke-Jeeves pattern search for a maximum; moves need a gain above `noise`.
template <class F>
double compass_max(F&& f, Eigen::VectorXd& x, double step, double noise = 1e-13, double min_step = 1e-10,
                   int max_evals = 40000) {
    int evals = 0;
    auto eval = [&](const Eigen::VectorXd& y) {
        ++evals;
        return f(y);
    };
    auto better = [&](double a, double b) { return a > b + noise * (1.0 + std::abs(b)); };
    // Coordinate sweep around `y`, updating it in place.
    auto explore = [&](Eigen::VectorXd& y, double fy) {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            for (double sign : {1.0, -1.0}) {
                Eigen::VectorXd trial = y;
                trial(i) += sign * step;
                const double ft = eval(trial);
                if (better(ft, fy)) {
                    y = std::move(trial);
                    fy = ft;
                    break;
                }
            }
        }
        return fy;
    };
    double fx = eval(x);
    while (step > min_step && evals < max_evals) {
        Eigen::VectorXd y = x;
        const double fy = explore(y, fx);
        if (!better(fy, fx)) {
            step *= 0.5;
            continue;
        }
        // Pattern moves along the accepted direction until they stop paying.
        Eigen::VectorXd prev = x;
        x = std::move(y);
        fx = fy;
        while (evals < max_evals) {
            Eigen::VectorXd z = x + (x - prev);
            const double fz = explore(z, eval(z));
            if (!better(fz, fx)) break;
            prev = x;
            x = std::move(z);
            fx = fz;
        }
    }
    return fx;
}

}  // namespace

double FocReport::max_residual() const {
    double m = 0.0;
    for (const auto& r : residuals)
        for (double v : r) m = std::max(m, v);
    return m;
}

double verify_ic(const ScenarioTree& tree, const ContractSolution& contract, const NodalSolution& solution,
                 const ProblemSpec& spec, double grid_radius, int grid_points) {
    if (grid_points < 3) fail(ErrorCode::ValidationError, "IC grid needs at least 3 points per axis");
    if (!solution.complete(tree)) fail(ErrorCode::IncompleteSolution, "solution does not cover every node of the tree");
    const int N = tree.n_assets();
    int points = grid_points;
    while (points > 3 && std::pow(static_cast<double>(points), N) > 1e5) --points;
    const double stride = 2.0 * grid_radius / (points - 1);
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < tree.horizon(); ++t) {
        const std::size_t count = tree.node_count(t);
        std::vector<double> node_worst(count);
        const QuadraticCost& cost = spec.cost.at(t);
        parallel_for(count, [&](std::size_t k) {
            const NodeId node{t, k};
            const StepSolution& s = solution.at(node);
            const Eigen::VectorXd a_star =
                contract.efforts[static_cast<std::size_t>(t)].row(static_cast<Eigen::Index>(k)).transpose();
            const Eigen::VectorXd& probs = tree.child_probabilities(node);
            const Eigen::MatrixXd& R = tree.returns(node);
            const double base = oce_value(s.Gamma, probs, spec.agent_penalty) - cost.value(a_star);
            double best = -std::numeric_limits<double>::infinity();
            std::vector<int> digit(static_cast<std::size_t>(N), 0);
            Eigen::VectorXd dev(N);
            while (true) {
                for (int i = 0; i < N; ++i) dev(i) = -grid_radius + stride * digit[static_cast<std::size_t>(i)];
                const Eigen::VectorXd a = a_star + dev;
                const double gain = oce_value(s.Gamma + R * dev, probs, spec.agent_penalty) - cost.value(a) - base;
                best = std::max(best, gain);
                int i = 0;
                while (i < N && ++digit[static_cast<std::size_t>(i)] == points) digit[static_cast<std::size_t>(i++)] = 0;
                if (i == N) break;
            }
            node_worst[k] = best;
        });
        worst = std::max(worst, *std::max_element(node_worst.begin(), node_worst.end()));
    }
    return worst;
}

FocReport verify_foc(const ScenarioTree& tree, const NodalSolution& solution, const ProblemSpec& spec) {
    if (!tree.is_markov()) fail(ErrorCode::NotMarkov, "first-order system requires a Markov tree");
    if (!spec.agent_penalty.is_smooth() || !spec.principal_penalty.is_smooth())
        fail(ErrorCode::InvalidPenalty, "first-order system requires differentiable generators on both sides");
    if (!solution.complete(tree)) fail(ErrorCode::IncompleteSolution, "solution does not cover every node of the tree");
    const Eigen::MatrixXd sigma = padded_vol(tree);
    const Eigen::VectorXd& mu = spec.market.drift;
    const Eigen::Index K = tree.branching();
    FocReport report;
    for (int t = 0; t < tree.horizon(); ++t) {
        const QuadraticCost& cost = spec.cost.at(t);
        const Generator ga(tree, {t, 0}, spec.agent_penalty);
        const Generator gp(tree, {t, 0}, spec.principal_penalty);
        std::array<double, 4> worst{0.0, 0.0, 0.0, 0.0};
        for (std::size_t k = 0; k < tree.node_count(t); ++k) {
            const StepSolution& s = solution.at({t, k});
            const Eigen::VectorXd da = ga.gradient(s.gamma);
            const Eigen::VectorXd dp = gp.gradient(sigma.transpose() * s.A - s.gamma);
            const Eigen::VectorXd slope = cost.gradient(s.A);
            worst[0] = std::max(worst[0], sup_norm(mu - slope + sigma * da));
            worst[1] = std::max(worst[1], sup_norm(mu - slope + sigma * dp));
            worst[2] = std::max(worst[2], sup_norm(da - dp));
            const Eigen::VectorXd lambda =
                lagrange_estimate(tree, {t, k}, Eigen::VectorXd::Zero(K), spec, s.A, s.gamma);
            report.lagrange_norm = std::max(report.lagrange_norm, lambda.norm());
            report.beta_condition =
                std::max(report.beta_condition, std::abs(s.beta - 1.0) * sup_norm(mu + sigma * da));
        }
        report.residuals.push_back(worst);
    }
    return report;
}

IrReport verify_ir(const ScenarioTree& tree, const ContractSolution& contract, const ProblemSpec& spec,
                   const SolverOptions& options) {
    const AgentResponse replay = best_response(
        tree, ContractInput::unit_loading(tree, lump_sum(contract), contract.reservation), spec.agent_penalty,
        spec.cost, options);
    IrReport r;
    r.ir_gap = std::abs(replay.root_value() - contract.reservation);
    for (int t = 0; t < tree.horizon(); ++t) {
        const auto ts = static_cast<std::size_t>(t);
        r.policy_gap = std::max(r.policy_gap, (replay.A[ts] - contract.efforts[ts]).cwiseAbs().maxCoeff());
    }
    return r;
}

double constrained_value(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& h_children,
                         const ProblemSpec& spec, double beta, const StepSolution& seed,
                         const SolverOptions& options) {
    const Eigen::MatrixXd& W = tree.drivers(node);
    const Eigen::MatrixXd& R = tree.returns(node);
    const Eigen::VectorXd& probs = tree.child_probabilities(node);
    const QuadraticCost& cost = spec.cost.at(node.time);
    const int D = tree.n_completed();
    auto objective = [&](const Eigen::VectorXd& A, const Eigen::VectorXd& Gamma) {
        return oce_value(Gamma, probs, spec.agent_penalty) - cost.value(A) +
               oce_value(h_children + R * A - Gamma, probs, spec.principal_penalty);
    };

    std::function<double(const Eigen::VectorXd&)> f;
    Eigen::VectorXd start;
    double scale = 1.0;
    if (spec.agent_penalty.is_smooth()) {
        // Gamma = W gamma; the agent constraint gives A = (grad c)^{-1}(beta R' grad U^a(Gamma)).
        f = [&](const Eigen::VectorXd& g) {
            const Eigen::VectorXd Gamma = W * g;
            const Eigen::VectorXd A =
                cost.inverse_gradient(beta * R.transpose() * oce_gradient(Gamma, probs, spec.agent_penalty));
            return objective(A, Gamma);
        };
        start = seed.gamma;
    } else {
        // Gamma = Y + beta A . r with A the agent's best response to Y = W y.
        const double radius = cost.growth_radius(2.0 * std::abs(beta) * R.cwiseAbs().maxCoeff() + 1.0);
        f = [&, radius](const Eigen::VectorXd& y) {
            const Eigen::VectorXd Y = W * y;
            const ConcaveProgram p = agent_program(tree, node, Y, beta, spec.agent_penalty, cost);
            const ProgramSolution br = maximize(p, cost.minimizer(), radius, options);
            if (!br.converged) {
                std::ostringstream msg;
                msg << "agent best response did not converge in the constrained search at node (" << node.time
                    << ", " << node.index << ")";
                fail(ErrorCode::NonConvergence, msg.str());
            }
            return objective(br.x, Y + beta * R * br.x);
        };
        const Eigen::VectorXd Y = seed.Gamma - beta * R * seed.A;
        start = W.completeOrthogonalDecomposition().solve((Y.array() - probs.dot(Y)).matrix());
    }
    scale = 0.5 * (1.0 + sup_norm(start) + sup_norm(seed.A));

    std::vector<Eigen::VectorXd> seeds{start, Eigen::VectorXd::Zero(D)};
    for (int i = 0; i < D; ++i)
        for (double sign : {1.0, -1.0}) {
            Eigen::VectorXd s = start;
            s(i) += sign * scale;
            seeds.push_back(s);
        }
    double best = -std::numeric_limits<double>::infinity();
    for (auto& s : seeds) best = std::max(best, compass_max(f, s, 0.25 * scale));
    return best;
}

BetaReport verify_beta(const ScenarioTree& tree, NodeId node, const Eigen::VectorXd& h_children,
                       const ProblemSpec& spec, const std::vector<double>& beta_grid, const SolverOptions& options) {
    if (std::find(beta_grid.begin(), beta_grid.end(), 1.0) == beta_grid.end())
        fail(ErrorCode::ValidationError, "beta grid must contain 1");
    const StepSolution seed = solve_one_step(tree, node, h_children, spec, options);
    BetaReport report;
    report.grid = beta_grid;
    report.values.resize(beta_grid.size());
    parallel_for(beta_grid.size(), [&](std::size_t i) {
        report.values[i] = constrained_value(tree, node, h_children, spec, beta_grid[i], seed, options);
    });
    double at_one = -std::numeric_limits<double>::infinity();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < beta_grid.size(); ++i) {
        if (beta_grid[i] == 1.0) at_one = std::max(at_one, report.values[i]);
        best = std::max(best, report.values[i]);
    }
    report.gap = best - at_one;
    return report;
}

std::vector<double> h_bound_slack(const ScenarioTree& tree, const NodalSolution& solution) {
    std::vector<double> slack;
    for (int t = 0; t < tree.horizon(); ++t) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& s : solution.steps[static_cast<std::size_t>(t)]) m = std::min(m, s.bound - s.h);
        slack.push_back(m);
    }
    return slack;
}

}  // namespace contract_forge
