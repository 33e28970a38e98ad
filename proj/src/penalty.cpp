#include "contract_forge/penalty.hpp"

#include "contract_forge/errors.hpp"
#include "contract_forge/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace contract_forge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Root of H'(l) = target for a nondecreasing H', by bracket expansion and
// bisection. Returns false when no bracket exists within |l| <= 1e8.
bool solve_derivative(const PenaltySpec& p, double target, double& root) {
    double lo = -1.0, hi = 1.0;
    while (p.loss_derivative(lo) > target && lo > -1e8) lo *= 2.0;
    while (p.loss_derivative(hi) < target && hi < 1e8) hi *= 2.0;
    if (p.loss_derivative(lo) > target || p.loss_derivative(hi) < target) return false;
    root = numeric::bisect([&](double l) { return p.loss_derivative(l) - target; }, lo, hi);
    return true;
}

}  // namespace

PenaltySpec::PenaltySpec(Kind kind) : kind_(std::move(kind)) {}

PenaltySpec PenaltySpec::entropic(double gamma) {
    PenaltySpec p(Entropic{gamma});
    p.pivot_ = gamma > 0.0 ? 1.0 / gamma : 0.0;
    return p;
}

PenaltySpec PenaltySpec::tvar(double lambda) {
    PenaltySpec p(Tvar{lambda});
    p.pivot_ = 0.0;
    return p;
}

PenaltySpec PenaltySpec::generic(GenericPenalty penalty) {
    PenaltySpec p(std::move(penalty));
    const auto& g = std::get<GenericPenalty>(p.kind_);
    double root = 0.0;
    if (g.value && g.derivative && solve_derivative(p, 1.0, root)) p.pivot_ = root;
    return p;
}

PenaltyKind PenaltySpec::kind() const noexcept {
    return std::visit(overloaded{[](const Entropic&) { return PenaltyKind::Entropic; },
                                 [](const Tvar&) { return PenaltyKind::Tvar; },
                                 [](const GenericPenalty&) { return PenaltyKind::Generic; }},
                      kind_);
}

double PenaltySpec::gamma() const {
    if (const auto* e = std::get_if<Entropic>(&kind_)) return e->gamma;
    fail(ErrorCode::InvalidPenalty, "gamma requested from a non-entropic penalty");
}

double PenaltySpec::lambda() const {
    if (const auto* t = std::get_if<Tvar>(&kind_)) return t->lambda;
    fail(ErrorCode::InvalidPenalty, "lambda requested from a non-TVAR penalty");
}

const GenericPenalty& PenaltySpec::generic_data() const {
    if (const auto* g = std::get_if<GenericPenalty>(&kind_)) return *g;
    fail(ErrorCode::InvalidPenalty, "generic data requested from a closed-form penalty");
}

double PenaltySpec::loss(double l) const {
    return std::visit(overloaded{[l](const Entropic& e) { return std::exp(e.gamma * l - 1.0) / e.gamma; },
                                 [l](const Tvar& t) { return std::max(l, 0.0) / t.lambda; },
                                 [l](const GenericPenalty& g) { return g.value(l); }},
                      kind_);
}

double PenaltySpec::loss_derivative(double l) const {
    return std::visit(overloaded{[l](const Entropic& e) { return std::exp(e.gamma * l - 1.0); },
                                 [l](const Tvar& t) { return l > 0.0 ? 1.0 / t.lambda : 0.0; },
                                 [l](const GenericPenalty& g) { return g.derivative(l); }},
                      kind_);
}

double PenaltySpec::loss_second_derivative(double l) const {
    return std::visit(overloaded{[l](const Entropic& e) { return e.gamma * std::exp(e.gamma * l - 1.0); },
                                 [](const Tvar&) { return 0.0; },
                                 [l](const GenericPenalty& g) {
                                     return g.second_derivative ? g.second_derivative(l) : 0.0;
                                 }},
                      kind_);
}

std::pair<double, double> PenaltySpec::conjugate_domain() const {
    return std::visit(overloaded{[](const Entropic&) { return std::pair{0.0, kInf}; },
                                 [](const Tvar& t) { return std::pair{0.0, 1.0 / t.lambda}; },
                                 [](const GenericPenalty& g) { return std::pair{g.conjugate_lo, g.conjugate_hi}; }},
                      kind_);
}

double PenaltySpec::conjugate(double x) const {
    const auto [lo, hi] = conjugate_domain();
    constexpr double slack = 1e-12;
    if (x < lo - slack || x > hi + slack) return kInf;
    switch (kind()) {
        case PenaltyKind::Entropic:
            return x <= 0.0 ? 0.0 : x * std::log(x) / gamma();
        case PenaltyKind::Tvar:
            return 0.0;
        case PenaltyKind::Generic: {
            const auto& g = generic_data();
            if (g.conjugate) return g.conjugate(x);
            double root = 0.0;
            if (solve_derivative(*this, x, root)) return x * root - loss(root);
            // boundary of the domain: supremum approached at |l| -> infinity
            const double far = x <= lo + slack ? -1e8 : 1e8;
            return x * far - loss(far);
        }
    }
    return kInf;
}

std::string PenaltySpec::describe() const {
    std::ostringstream out;
    std::visit(overloaded{[&](const Entropic& e) { out << "entropic(gamma=" << e.gamma << ")"; },
                          [&](const Tvar& t) { out << "tvar(lambda=" << t.lambda << ")"; },
                          [&](const GenericPenalty& g) { out << "generic(" << g.name << ")"; }},
               kind_);
    return out.str();
}

bool ValidityReport::valid() const {
    return std::all_of(checks.begin(), checks.end(), [](const PenaltyCheck& c) { return c.passed; });
}

const PenaltyCheck* ValidityReport::first_failure() const {
    for (const auto& c : checks)
        if (!c.passed) return &c;
    return nullptr;
}

ValidityReport penalty_report(const PenaltySpec& p) {
    ValidityReport report;
    auto add = [&](std::string name, bool ok, std::string detail) {
        report.checks.push_back({std::move(name), ok, std::move(detail)});
    };

    switch (p.kind()) {
        case PenaltyKind::Entropic: {
            const double g = p.gamma();
            add("parameters", g > 0.0 && std::isfinite(g), "gamma must be positive");
            if (!(g > 0.0 && std::isfinite(g))) return report;
            break;
        }
        case PenaltyKind::Tvar: {
            const double l = p.lambda();
            add("parameters", l > 0.0 && l < 1.0, "lambda must lie in (0,1)");
            if (!(l > 0.0 && l < 1.0)) return report;
            break;
        }
        case PenaltyKind::Generic: {
            const auto& g = p.generic_data();
            const bool ok = static_cast<bool>(g.value) && static_cast<bool>(g.derivative);
            add("parameters", ok, "generic penalty needs value and derivative evaluators");
            if (!ok) return report;
            break;
        }
    }

    // H*(1) = sup_s {s - H(s)} on a symmetric log-spaced grid, refined locally.
    {
        std::vector<double> grid{0.0};
        for (double k = -8.0; k <= 8.0 + 1e-12; k += 0.125) {
            grid.push_back(std::pow(10.0, k));
            grid.push_back(-std::pow(10.0, k));
        }
        grid.push_back(p.pivot());
        std::sort(grid.begin(), grid.end());
        auto objective = [&](double s) {
            const double v = s - p.loss(s);
            return std::isnan(v) ? -kInf : v;
        };
        std::size_t best = 0;
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (objective(grid[i]) > objective(grid[best])) best = i;
        const double lo = grid[best == 0 ? 0 : best - 1];
        const double hi = grid[std::min(best + 1, grid.size() - 1)];
        double sup = objective(grid[best]);
        if (hi > lo) sup = std::max(sup, numeric::golden_max(objective, lo, hi, 1e-13).value);
        std::ostringstream detail;
        detail << "H*(1) = " << sup << " (must vanish within 1e-9)";
        add("normalization", std::abs(sup) < 1e-9, detail.str());
    }

    {
        const auto [lo, hi] = p.conjugate_domain();
        std::ostringstream detail;
        detail << "dom(H*) = [" << lo << ", " << hi << "] must contain 1 in its interior";
        add("conjugate domain interior", lo < 1.0 && 1.0 < hi, detail.str());
    }

    {
        bool finite = true;
        double prev = 0.0, last = 0.0;
        for (int k = 0; k <= 8; ++k) {
            const double v = p.loss(-std::pow(10.0, k));
            if (!std::isfinite(v)) finite = false;
            prev = last;
            last = v;
        }
        const bool stable = finite && std::abs(last - prev) <= 1e-6 * (1.0 + std::abs(prev));
        std::ostringstream detail;
        detail << "H(-1e7) = " << prev << ", H(-1e8) = " << last << " (lower bound must stabilise)";
        add("bounded below", stable, detail.str());
    }

    if (p.kind() == PenaltyKind::Generic) {
        bool monotone = true, convex = true;
        double prev_d = -kInf;
        for (int i = 0; i <= 2000; ++i) {
            const double l = -50.0 + 0.05 * i;
            const double d = p.loss_derivative(l);
            if (!std::isfinite(d) || !std::isfinite(p.loss(l))) continue;
            if (d < -1e-12) monotone = false;
            if (d < prev_d - 1e-12) convex = false;
            prev_d = d;
        }
        add("nondecreasing", monotone, "H' must be non-negative on [-50, 50]");
        add("convex", convex, "H' must be nondecreasing on [-50, 50]");
    }
    return report;
}

ValidityReport validate_penalty(const PenaltySpec& penalty) {
    ValidityReport report = penalty_report(penalty);
    if (const PenaltyCheck* failed = report.first_failure())
        fail(ErrorCode::InvalidPenalty, penalty.describe() + ": " + failed->name + " failed: " + failed->detail);
    return report;
}

}  // namespace contract_forge
