#include "contract_forge/contract_assembly.hpp"

#include "contract_forge/agent_solver.hpp"
#include "contract_forge/errors.hpp"
#include "contract_forge/oce.hpp"

#include <cmath>

namespace contract_forge {

namespace {

// Pushes a per-node increment into children level by level, accumulating along paths.
template <class Increment>
Eigen::VectorXd accumulate(const ScenarioTree& tree, double start, Increment&& increment) {
    Eigen::VectorXd level = Eigen::VectorXd::Constant(1, start);
    const Eigen::Index K = tree.branching();
    for (int t = 0; t < tree.horizon(); ++t) {
        Eigen::VectorXd next(level.size() * K);
        for (Eigen::Index k = 0; k < level.size(); ++k) {
            const Eigen::VectorXd inc = increment(NodeId{t, static_cast<std::size_t>(k)});
            next.segment(k * K, K) = inc.array() + level(k);
        }
        level = std::move(next);
    }
    return level;
}

}  // namespace

Eigen::VectorXd build_theta(const ScenarioTree& tree, const NodalSolution& solution, const PenaltySpec& agent_penalty,
                            const CostSpec& cost, double reservation) {
    return accumulate(tree, reservation, [&](NodeId node) {
        const StepSolution& s = solution.at(node);
        const double u = oce_value(s.Gamma, tree.child_probabilities(node), agent_penalty);
        return Eigen::VectorXd(s.Gamma.array() - u + cost.at(node.time).value(s.A));
    });
}

Eigen::VectorXd terminal_wealth(const ScenarioTree& tree, const std::vector<Eigen::MatrixXd>& efforts,
                                double initial_wealth) {
    return accumulate(tree, initial_wealth, [&](NodeId node) {
        const Eigen::VectorXd a =
            efforts.at(static_cast<std::size_t>(node.time)).row(static_cast<Eigen::Index>(node.index)).transpose();
        return Eigen::VectorXd(tree.returns(node) * a);
    });
}

Eigen::VectorXd lump_sum(const ContractSolution& contract) {
    return contract.theta - (contract.benchmark_wealth.array() - contract.initial_wealth).matrix();
}

Eigen::VectorXd payment(const ScenarioTree& tree, const ContractSolution& contract,
                        const std::vector<Eigen::MatrixXd>& efforts) {
    return lump_sum(contract) + (terminal_wealth(tree, efforts, contract.initial_wealth).array() -
                                 contract.initial_wealth).matrix();
}

Eigen::VectorXd normal_form_payment(const ContractSolution& contract, const Eigen::VectorXd& wealth) {
    if (!contract.kappa_bar || !contract.weights)
        fail(ErrorCode::IncompleteSolution, "normal form requires a base-preference Markov contract");
    const SharingWeights& w = *contract.weights;
    return (*contract.kappa_bar + w.principal * wealth.array() + w.agent * (wealth - contract.benchmark_wealth).array())
        .matrix();
}

Eigen::VectorXd driver_integral(const ScenarioTree& tree, const ContractSolution& contract) {
    return accumulate(tree, 0.0, [&](NodeId node) {
        const Eigen::VectorXd g =
            contract.gammas.at(static_cast<std::size_t>(node.time)).row(static_cast<Eigen::Index>(node.index)).transpose();
        return Eigen::VectorXd(tree.drivers(node) * g);
    });
}

double principal_value(const NodalSolution& solution, double initial_wealth, double reservation) {
    return initial_wealth - reservation + solution.root_value();
}

ContractSolution assemble_contract(const ScenarioTree& tree, const NodalSolution& solution, const ProblemSpec& spec,
                                   const SolverOptions& options) {
    if (!solution.complete(tree)) fail(ErrorCode::IncompleteSolution, "solution does not cover every node of the tree");
    const int T = tree.horizon();
    ContractSolution c;
    c.reservation = spec.reservation;
    c.initial_wealth = spec.initial_wealth;
    c.markov = solution.markov;
    c.h0 = solution.root_value();
    c.efforts.resize(static_cast<std::size_t>(T));
    c.gammas.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        const auto count = static_cast<Eigen::Index>(tree.node_count(t));
        c.efforts[ts].resize(count, tree.n_assets());
        c.gammas[ts].resize(count, tree.n_completed());
        for (Eigen::Index k = 0; k < count; ++k) {
            const StepSolution& s = solution.steps[ts][static_cast<std::size_t>(k)];
            c.efforts[ts].row(k) = s.A.transpose();
            c.gammas[ts].row(k) = s.gamma.transpose();
        }
    }
    c.theta = build_theta(tree, solution, spec.agent_penalty, spec.cost, spec.reservation);
    c.benchmark_wealth = terminal_wealth(tree, c.efforts, spec.initial_wealth);
    c.principal_value_root = principal_value(solution, spec.initial_wealth, spec.reservation);

    if (solution.markov) {
        double kappa = spec.reservation;
        double drift_gain = 0.0;
        for (int t = 0; t < T; ++t) {
            const StepSolution& s = solution.steps[static_cast<std::size_t>(t)].front();
            const Generator ga(tree, {t, 0}, spec.agent_penalty);
            kappa += spec.cost.at(t).value(s.A) - ga.value(s.gamma);
            drift_gain += s.A.dot(spec.market.drift);
        }
        c.kappa = kappa;
        if (spec.base_preference) {
            const BasePreference& b = *spec.base_preference;
            c.weights = SharingWeights{b.principal_weight(), b.agent_weight()};
            c.kappa_bar = kappa - b.principal_weight() * (spec.initial_wealth + drift_gain);
        }
    } else if (spec.base_preference) {
        const BasePreference& b = *spec.base_preference;
        c.weights = SharingWeights{b.principal_weight(), b.agent_weight()};
    }

    const AgentResponse replay = best_response(tree, ContractInput::unit_loading(tree, lump_sum(c), spec.reservation),
                                               spec.agent_penalty, spec.cost, options);
    c.agent_value_root = replay.root_value();
    return c;
}

ReplicationResult replication_residual(const ScenarioTree& tree, const Eigen::VectorXd& leaf_values) {
    if (static_cast<std::size_t>(leaf_values.size()) != tree.leaf_count())
        fail(ErrorCode::ValidationError, "replication target must have one entry per leaf");
    const int T = tree.horizon();
    const int N = tree.n_assets();
    const Eigen::Index K = tree.branching();

    // Unknowns: cash followed by one N-vector per non-terminal node, level by level.
    std::vector<Eigen::Index> offset(static_cast<std::size_t>(T) + 1, 1);
    for (int t = 0; t < T; ++t)
        offset[static_cast<std::size_t>(t) + 1] =
            offset[static_cast<std::size_t>(t)] + static_cast<Eigen::Index>(tree.node_count(t)) * N;
    const Eigen::Index n = offset.back();

    auto apply = [&](const Eigen::VectorXd& x) {
        return accumulate(tree, x(0), [&](NodeId node) {
            const auto k = static_cast<Eigen::Index>(node.index);
            return Eigen::VectorXd(tree.returns(node) * x.segment(offset[static_cast<std::size_t>(node.time)] + k * N, N));
        });
    };
    auto adjoint = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd below = v;  // sums of v over the leaves under each node of the current level
        for (int t = T - 1; t >= 0; --t) {
            const auto count = static_cast<Eigen::Index>(tree.node_count(t));
            Eigen::VectorXd level(count);
            for (Eigen::Index k = 0; k < count; ++k) {
                const Eigen::VectorXd child = below.segment(k * K, K);
                g.segment(offset[static_cast<std::size_t>(t)] + k * N, N) =
                    tree.returns({t, static_cast<std::size_t>(k)}).transpose() * child;
                level(k) = child.sum();
            }
            below = std::move(level);
        }
        g(0) = below(0);
        return g;
    };

    // CGLS on min |apply(x) - b|
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd r = leaf_values;
    Eigen::VectorXd s = adjoint(r);
    Eigen::VectorXd p = s;
    double gamma = s.squaredNorm();
    const double stop = 1e-28 * std::max(1.0, gamma);
    ReplicationResult out;
    const int max_it = static_cast<int>(std::min<Eigen::Index>(4 * n + 10, 20000));
    for (int it = 0; it < max_it && gamma > stop; ++it) {
        const Eigen::VectorXd q = apply(p);
        const double qq = q.squaredNorm();
        if (qq == 0.0) break;
        const double alpha = gamma / qq;
        x += alpha * p;
        r -= alpha * q;
        s = adjoint(r);
        const double next = s.squaredNorm();
        p = s + (next / gamma) * p;
        gamma = next;
        out.iterations = it + 1;
    }
    r = leaf_values - apply(x);
    out.max_residual = r.cwiseAbs().maxCoeff();
    out.rms_residual = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
    out.cash = x(0);
    return out;
}

}  // namespace contract_forge
