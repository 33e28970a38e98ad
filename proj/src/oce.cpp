#include "contract_forge/oce.hpp"

#include "contract_forge/errors.hpp"
#include "contract_forge/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace contract_forge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Support {
    double lo = kInf;
    double hi = -kInf;
};

Support support_of(const Eigen::VectorXd& values, const Eigen::VectorXd& probs) {
    Support s;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (probs(k) <= 0.0) continue;
        s.lo = std::min(s.lo, values(k));
        s.hi = std::max(s.hi, values(k));
    }
    return s;
}

// Shifted exponential weights q_k = p_k exp(-gamma x_k) / sum, and log sum.
double entropic_weights(const Eigen::VectorXd& values, const Eigen::VectorXd& probs, double gamma,
                        Eigen::VectorXd* weights) {
    double shift = -kInf;
    for (Eigen::Index k = 0; k < values.size(); ++k)
        if (probs(k) > 0.0) shift = std::max(shift, -gamma * values(k));
    double total = 0.0;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(values.size());
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (probs(k) <= 0.0) continue;
        w(k) = probs(k) * std::exp(-gamma * values(k) - shift);
        total += w(k);
    }
    if (weights) *weights = w / total;
    return shift + std::log(total);
}

OceSolution tvar_solve(const Eigen::VectorXd& values, const Eigen::VectorXd& probs, double lambda) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values(a) < values(b); });
    // slope of s - E[(s-X)_+]/lambda right of x_(k) is 1 - F(x_(k))/lambda;
    // the smallest vertex with F >= lambda maximises.
    double cumulative = 0.0;
    double s = values(order.back());
    for (auto k : order) {
        if (probs(k) <= 0.0) continue;
        cumulative += probs(k);
        if (cumulative >= lambda - 1e-14) {
            s = values(k);
            break;
        }
    }
    double shortfall = 0.0;
    for (Eigen::Index k = 0; k < values.size(); ++k) shortfall += probs(k) * std::max(s - values(k), 0.0);
    return {s - shortfall / lambda, s};
}

OceSolution generic_solve(const Eigen::VectorXd& values, const Eigen::VectorXd& probs, const PenaltySpec& p) {
    const Support sup = support_of(values, probs);
    const double lo = sup.lo + p.pivot() - 1.0;
    const double hi = sup.hi + p.pivot() + 1.0;
    auto objective = [&](double s) {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < values.size(); ++k)
            if (probs(k) > 0.0) acc += probs(k) * p.loss(s - values(k));
        return s - acc;
    };
    auto [s, best] = numeric::golden_max(objective, lo, hi, 1e-12);
    for (int it = 0; it < 5; ++it) {
        double d1 = 1.0, d2 = 0.0;
        for (Eigen::Index k = 0; k < values.size(); ++k) {
            if (probs(k) <= 0.0) continue;
            d1 -= probs(k) * p.loss_derivative(s - values(k));
            d2 -= probs(k) * p.loss_second_derivative(s - values(k));
        }
        if (!(d2 < 0.0) || d1 == 0.0) break;
        const double candidate = s - d1 / d2;
        if (candidate < lo || candidate > hi) break;
        const double value = objective(candidate);
        if (!(value >= best - 1e-15 * (1.0 + std::abs(best)))) break;
        s = candidate;
        best = std::max(best, value);
    }
    return {objective(s), s};
}

}  // namespace

FiniteLottery FiniteLottery::uniform(const Eigen::VectorXd& values) {
    return {values, Eigen::VectorXd::Constant(values.size(), 1.0 / static_cast<double>(values.size()))};
}

void FiniteLottery::validate() const {
    if (values.size() == 0) fail(ErrorCode::ValidationError, "lottery needs at least one outcome");
    if (values.size() != probs.size()) fail(ErrorCode::ValidationError, "lottery values and probs differ in length");
    if (!values.allFinite()) fail(ErrorCode::ValidationError, "lottery values must be finite");
    if ((probs.array() < 0.0).any() || !probs.allFinite())
        fail(ErrorCode::ValidationError, "lottery probabilities must be non-negative");
    if (std::abs(probs.sum() - 1.0) > 1e-12) fail(ErrorCode::ValidationError, "lottery probabilities must sum to 1");
}

OceSolution oce_solve(const Eigen::VectorXd& values, const Eigen::VectorXd& probs, const PenaltySpec& penalty) {
    switch (penalty.kind()) {
        case PenaltyKind::Entropic: {
            const double g = penalty.gamma();
            const double value = -entropic_weights(values, probs, g, nullptr) / g;
            return {value, value + 1.0 / g};
        }
        case PenaltyKind::Tvar:
            return tvar_solve(values, probs, penalty.lambda());
        case PenaltyKind::Generic:
            return generic_solve(values, probs, penalty);
    }
    return {0.0, 0.0};
}

double oce_value(const Eigen::VectorXd& values, const Eigen::VectorXd& probs, const PenaltySpec& penalty) {
    return oce_solve(values, probs, penalty).value;
}

double oce_evaluate(const FiniteLottery& lottery, const PenaltySpec& penalty) {
    lottery.validate();
    validate_penalty(penalty);
    return oce_value(lottery.values, lottery.probs, penalty);
}

Eigen::VectorXd oce_gradient(const Eigen::VectorXd& values, const Eigen::VectorXd& probs, const PenaltySpec& penalty) {
    switch (penalty.kind()) {
        case PenaltyKind::Entropic: {
            Eigen::VectorXd q;
            entropic_weights(values, probs, penalty.gamma(), &q);
            return q;
        }
        case PenaltyKind::Tvar: {
            const double lambda = penalty.lambda();
            const double s = tvar_solve(values, probs, lambda).argmax;
            double below = 0.0, tied = 0.0;
            for (Eigen::Index k = 0; k < values.size(); ++k) {
                if (values(k) < s) below += probs(k);
                else if (values(k) == s) tied += probs(k);
            }
            const double tie_weight = tied > 0.0 ? (1.0 - below / lambda) / tied : 0.0;
            Eigen::VectorXd grad(values.size());
            for (Eigen::Index k = 0; k < values.size(); ++k) {
                const double z = values(k) < s ? 1.0 / lambda : (values(k) == s ? tie_weight : 0.0);
                grad(k) = probs(k) * z;
            }
            return grad;
        }
        case PenaltyKind::Generic: {
            const double s = generic_solve(values, probs, penalty).argmax;
            Eigen::VectorXd grad(values.size());
            for (Eigen::Index k = 0; k < values.size(); ++k)
                grad(k) = probs(k) > 0.0 ? probs(k) * penalty.loss_derivative(s - values(k)) : 0.0;
            return grad;
        }
    }
    return {};
}

Eigen::MatrixXd oce_hessian(const Eigen::VectorXd& values, const Eigen::VectorXd& probs, const PenaltySpec& penalty) {
    const Eigen::Index n = values.size();
    switch (penalty.kind()) {
        case PenaltyKind::Entropic: {
            Eigen::VectorXd q;
            entropic_weights(values, probs, penalty.gamma(), &q);
            Eigen::MatrixXd h = q * q.transpose();
            h.diagonal() -= q;
            return penalty.gamma() * h;
        }
        case PenaltyKind::Tvar:
            return Eigen::MatrixXd::Zero(n, n);
        case PenaltyKind::Generic: {
            // envelope: dU/dx_j = p_j H'(s* - x_j) with ds*/dx_i = w_i / sum(w)
            const double s = generic_solve(values, probs, penalty).argmax;
            Eigen::VectorXd w(n);
            for (Eigen::Index k = 0; k < n; ++k)
                w(k) = probs(k) > 0.0 ? probs(k) * penalty.loss_second_derivative(s - values(k)) : 0.0;
            const double total = w.sum();
            Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
            if (total > 0.0) h = w * w.transpose() / total;
            h.diagonal() -= w;
            return h;
        }
    }
    return {};
}

double penalty_of_weight(const DualWeight& weight, const FiniteLottery& support, const PenaltySpec& penalty) {
    support.validate();
    if (weight.z.size() != support.probs.size())
        fail(ErrorCode::ValidationError, "dual weight and lottery differ in length");
    if ((weight.z.array() < 0.0).any()) fail(ErrorCode::ValidationError, "dual weight must be non-negative");
    if (std::abs(support.probs.dot(weight.z) - 1.0) > 1e-10)
        fail(ErrorCode::ValidationError, "dual weight must have unit expectation");
    double total = 0.0;
    for (Eigen::Index k = 0; k < weight.z.size(); ++k) {
        if (support.probs(k) <= 0.0) continue;
        const double c = penalty.conjugate(weight.z(k));
        if (!std::isfinite(c)) return kInf;
        total += support.probs(k) * c;
    }
    return total;
}

Generator::Generator(Eigen::MatrixXd drivers, Eigen::VectorXd probs, PenaltySpec penalty)
    : drivers_(std::move(drivers)), probs_(std::move(probs)), penalty_(std::move(penalty)) {}

Generator::Generator(const ScenarioTree& tree, NodeId node, PenaltySpec penalty)
    : Generator(tree.drivers(node), tree.child_probabilities(node), std::move(penalty)) {}

double Generator::value(const Eigen::VectorXd& z) const { return oce_value(drivers_ * z, probs_, penalty_); }

Eigen::VectorXd Generator::gradient(const Eigen::VectorXd& z) const {
    return drivers_.transpose() * oce_gradient(drivers_ * z, probs_, penalty_);
}

Eigen::MatrixXd Generator::hessian(const Eigen::VectorXd& z) const {
    return drivers_.transpose() * oce_hessian(drivers_ * z, probs_, penalty_) * drivers_;
}

double generator_eval(const Eigen::VectorXd& z, const ScenarioTree& tree, NodeId node, const PenaltySpec& penalty) {
    return Generator(tree, node, penalty).value(z);
}

Eigen::VectorXd generator_grad(const Eigen::VectorXd& z, const ScenarioTree& tree, NodeId node,
                               const PenaltySpec& penalty) {
    return Generator(tree, node, penalty).gradient(z);
}

Eigen::MatrixXd generator_hess(const Eigen::VectorXd& z, const ScenarioTree& tree, NodeId node,
                               const PenaltySpec& penalty) {
    return Generator(tree, node, penalty).hessian(z);
}

Eigen::VectorXd generator_fd_gradient(const Generator& g, const Eigen::VectorXd& z) {
    Eigen::VectorXd grad(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double step = 1e-5 * (1.0 + std::abs(z(i)));
        Eigen::VectorXd up = z, down = z;
        up(i) += step;
        down(i) -= step;
        grad(i) = (g.value(up) - g.value(down)) / (2.0 * step);
    }
    return grad;
}

Eigen::MatrixXd generator_fd_hessian(const Generator& g, const Eigen::VectorXd& z) {
    const Eigen::Index n = z.size();
    Eigen::MatrixXd hess(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double si = 1e-4 * (1.0 + std::abs(z(i)));
        for (Eigen::Index j = i; j < n; ++j) {
            const double sj = 1e-4 * (1.0 + std::abs(z(j)));
            auto at = [&](double a, double b) {
                Eigen::VectorXd x = z;
                x(i) += a;
                x(j) += b;
                return g.value(x);
            };
            hess(i, j) = (at(si, sj) - at(si, -sj) - at(-si, sj) + at(-si, -sj)) / (4.0 * si * sj);
            hess(j, i) = hess(i, j);
        }
    }
    return hess;
}

std::vector<Eigen::VectorXd> dynamic_evaluate(const ScenarioTree& tree, const Eigen::VectorXd& terminal_values,
                                              const PenaltySpec& penalty) {
    if (static_cast<std::size_t>(terminal_values.size()) != tree.leaf_count())
        fail(ErrorCode::ValidationError, "terminal values must have one entry per leaf");
    if (!terminal_values.allFinite()) fail(ErrorCode::ValidationError, "terminal values must be finite");
    const int T = tree.horizon();
    const Eigen::Index K = tree.branching();
    std::vector<Eigen::VectorXd> levels(static_cast<std::size_t>(T) + 1);
    levels[static_cast<std::size_t>(T)] = terminal_values;
    for (int t = T - 1; t >= 0; --t) {
        const auto& next = levels[static_cast<std::size_t>(t) + 1];
        Eigen::VectorXd current(static_cast<Eigen::Index>(tree.node_count(t)));
        for (Eigen::Index k = 0; k < current.size(); ++k) {
            const NodeId node{t, static_cast<std::size_t>(k)};
            current(k) = oce_value(next.segment(k * K, K), tree.child_probabilities(node), penalty);
        }
        levels[static_cast<std::size_t>(t)] = std::move(current);
    }
    return levels;
}

}  // namespace contract_forge
