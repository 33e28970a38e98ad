#include "contract_forge/concave_program.hpp"

#include "contract_forge/oce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace contract_forge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

int cost_dim(const ConcaveProgram& p) { return p.cost ? p.cost->dim() : 0; }

// Derivatives of -c and the smooth terms only.
Eigen::VectorXd smooth_gradient(const ConcaveProgram& p, const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.n);
    if (p.cost) g.head(cost_dim(p)) -= p.cost->gradient(x.head(cost_dim(p)));
    for (const auto& term : p.terms)
        if (term.penalty.is_smooth())
            g += term.map.transpose() * oce_gradient(term.map * x + term.offset, term.probs, term.penalty);
    return g;
}

Eigen::MatrixXd smooth_hessian(const ConcaveProgram& p, const Eigen::VectorXd& x) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p.n, p.n);
    if (p.cost) h.topLeftCorner(cost_dim(p), cost_dim(p)) -= p.cost->hessian();
    for (const auto& term : p.terms)
        if (term.penalty.is_smooth())
            h += term.map.transpose() * oce_hessian(term.map * x + term.offset, term.probs, term.penalty) * term.map;
    return h;
}

ProgramSolution newton(const ConcaveProgram& p, Eigen::VectorXd x, const SolverOptions& opt) {
    ProgramSolution sol;
    double f = p.value(x);
    Eigen::VectorXd g = p.gradient(x);
    double res = inf_norm(g);
    int it = 0;
    for (; it < opt.max_iterations && res > opt.tolerance; ++it) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-p.hessian(x));
        Eigen::VectorXd ev = eig.eigenvalues();
        const double floor = std::max(1e-12, 1e-10 * inf_norm(ev));
        ev = ev.cwiseMax(floor);
        const Eigen::VectorXd d = eig.eigenvectors() * (eig.eigenvectors().transpose() * g).cwiseQuotient(ev);
        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd xn;
        double fn = 0.0;
        Eigen::VectorXd gn;
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + step * d;
            fn = p.value(xn);
            if (std::isfinite(fn) && fn >= f + 1e-4 * step * g.dot(d)) {
                accepted = true;
            } else if (step == 1.0 && std::isfinite(fn) && fn >= f - 1e-13 * (1.0 + std::abs(f))) {
                // f differences are below rounding near the optimum; trust the gradient
                gn = p.gradient(xn);
                accepted = inf_norm(gn) < res;
            }
            if (accepted) break;
            step *= 0.5;
        }
        if (!accepted) break;
        x = std::move(xn);
        f = fn;
        g = gn.size() == p.n ? gn : p.gradient(x);
        gn.resize(0);
        res = inf_norm(g);
    }
    sol.x = std::move(x);
    sol.value = f;
    sol.residual = res;
    sol.iterations = it;
    sol.converged = res <= opt.tolerance;
    sol.method = "newton";
    return sol;
}

Eigen::VectorXd grid_best(const ConcaveProgram& p, double radius, int points) {
    const int n = p.n;
    points = std::max(points, 3);
    const double budget = 200000.0;
    while (points > 3 && std::pow(static_cast<double>(points), n) > budget) --points;
    std::vector<int> digit(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd x(n), best = Eigen::VectorXd::Zero(n);
    double best_value = -kInf;
    const double stride = 2.0 * radius / (points - 1);
    while (true) {
        for (int i = 0; i < n; ++i) x(i) = -radius + stride * digit[static_cast<std::size_t>(i)];
        const double v = p.value(x);
        if (v > best_value) {
            best_value = v;
            best = x;
        }
        int i = 0;
        while (i < n && ++digit[static_cast<std::size_t>(i)] == points) digit[static_cast<std::size_t>(i++)] = 0;
        if (i == n) break;
    }
    return best;
}

// Lifted program: y = [x, (s_j, u_j1..u_jK) per TVAR term], minimise F = -f
// subject to -u <= 0 and s - (M x + b) - u <= 0.
class Lifted {
public:
    explicit Lifted(const ConcaveProgram& p) : p_(p) {
        ny_ = p.n;
        int m = 0;
        for (std::size_t j = 0; j < p.terms.size(); ++j) {
            if (p.terms[j].penalty.is_smooth()) continue;
            tvar_.push_back(j);
            offset_.push_back(ny_);
            const int K = static_cast<int>(p.terms[j].probs.size());
            ny_ += 1 + K;
            m += 2 * K;
        }
        G_ = Eigen::MatrixXd::Zero(m, ny_);
        h_ = Eigen::VectorXd::Zero(m);
        int row = 0;
        for (std::size_t k = 0; k < tvar_.size(); ++k) {
            const auto& term = p.terms[tvar_[k]];
            const int o = offset_[k];
            for (Eigen::Index i = 0; i < term.probs.size(); ++i) {
                G_(row, o + 1 + i) = -1.0;
                ++row;
                G_(row, o) = 1.0;
                G_.row(row).head(p.n) = -term.map.row(i);
                G_(row, o + 1 + i) = -1.0;
                h_(row) = term.offset(i);
                ++row;
            }
        }
    }

    int ny() const { return ny_; }
    int m() const { return static_cast<int>(h_.size()); }
    const Eigen::MatrixXd& G() const { return G_; }
    const Eigen::VectorXd& h() const { return h_; }

    Eigen::VectorXd start(const Eigen::VectorXd& x) const {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(ny_);
        y.head(p_.n) = x;
        for (std::size_t k = 0; k < tvar_.size(); ++k) {
            const auto& term = p_.terms[tvar_[k]];
            const Eigen::VectorXd X = term.map * x + term.offset;
            y(offset_[k]) = X.minCoeff() - 1.0;
            y.segment(offset_[k] + 1, X.size()).setOnes();
        }
        return y;
    }

    Eigen::VectorXd gradF(const Eigen::VectorXd& y) const {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(ny_);
        g.head(p_.n) = -smooth_gradient(p_, y.head(p_.n));
        for (std::size_t k = 0; k < tvar_.size(); ++k) {
            const auto& term = p_.terms[tvar_[k]];
            g(offset_[k]) = -1.0;
            g.segment(offset_[k] + 1, term.probs.size()) = term.probs / term.penalty.lambda();
        }
        return g;
    }

    Eigen::MatrixXd hessF(const Eigen::VectorXd& y) const {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(ny_, ny_);
        H.topLeftCorner(p_.n, p_.n) = -smooth_hessian(p_, y.head(p_.n));
        return H;
    }

private:
    const ConcaveProgram& p_;
    int ny_ = 0;
    std::vector<std::size_t> tvar_;
    std::vector<int> offset_;
    Eigen::MatrixXd G_;
    Eigen::VectorXd h_;
};

// Newton on the equality-constrained KKT system of an active set.
bool crossover(const Lifted& L, const ConcaveProgram& p, Eigen::VectorXd& y, const Eigen::VectorXd& lambda,
               double threshold, double reference_value, double& residual) {
    const Eigen::VectorXd f = L.G() * y - L.h();
    std::vector<int> active;
    for (int i = 0; i < L.m(); ++i)
        if (lambda(i) > threshold * -f(i)) active.push_back(i);
    const int na = static_cast<int>(active.size());
    const int ny = L.ny();
    Eigen::MatrixXd GA(na, ny);
    Eigen::VectorXd hA(na), lamA(na);
    for (int k = 0; k < na; ++k) {
        GA.row(k) = L.G().row(active[static_cast<std::size_t>(k)]);
        hA(k) = L.h()(active[static_cast<std::size_t>(k)]);
        lamA(k) = lambda(active[static_cast<std::size_t>(k)]);
    }
    Eigen::VectorXd yc = y;
    auto kkt = [&](Eigen::VectorXd& r) {
        r.resize(ny + na);
        r.head(ny) = L.gradF(yc) + GA.transpose() * lamA;
        r.tail(na) = GA * yc - hA;
        return inf_norm(r);
    };
    Eigen::VectorXd r;
    double res = kkt(r);
    for (int it = 0; it < 30 && res > 1e-15; ++it) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(ny + na, ny + na);
        J.topLeftCorner(ny, ny) = L.hessF(yc);
        J.topRightCorner(ny, na) = GA.transpose();
        J.bottomLeftCorner(na, ny) = GA;
        const Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(-r);
        const Eigen::VectorXd y_prev = yc, l_prev = lamA;
        yc += step.head(ny);
        lamA += step.tail(na);
        const double next = kkt(r);
        if (!(next < res)) {
            yc = y_prev;
            lamA = l_prev;
            break;
        }
        res = next;
    }
    if (!(res < 1e-9)) return false;
    const double scale = 1.0 + inf_norm(L.h()) + inf_norm(yc);
    if (L.m() > 0 && (L.G() * yc - L.h()).maxCoeff() > 1e-11 * scale) return false;
    if (na > 0 && lamA.minCoeff() < -1e-11) return false;
    const double v = p.value(yc.head(p.n));
    if (!(v >= reference_value - 1e-12 * (1.0 + std::abs(reference_value)))) return false;
    y = std::move(yc);
    residual = res;
    return true;
}

ProgramSolution interior_point(const ConcaveProgram& p, const Eigen::VectorXd& start, const SolverOptions& opt) {
    const Lifted L(p);
    const int m = L.m();
    Eigen::VectorXd y = L.start(start);
    Eigen::VectorXd f = L.G() * y - L.h();
    Eigen::VectorXd lambda = (-f).cwiseInverse();
    constexpr double mu = 10.0;
    const double tol = opt.tolerance;

    auto residual_norm = [&](const Eigen::VectorXd& yy, const Eigen::VectorXd& ll, double t) {
        const Eigen::VectorXd ff = L.G() * yy - L.h();
        const Eigen::VectorXd rd = L.gradF(yy) + L.G().transpose() * ll;
        const Eigen::VectorXd rc = -ll.cwiseProduct(ff).array() - 1.0 / t;
        return std::sqrt(rd.squaredNorm() + rc.squaredNorm());
    };

    int it = 0;
    double gap = kInf, dual = kInf;
    const int max_it = std::max(200, 2 * opt.max_iterations);
    for (; it < max_it; ++it) {
        f = L.G() * y - L.h();
        gap = -f.dot(lambda);
        const Eigen::VectorXd rd = L.gradF(y) + L.G().transpose() * lambda;
        dual = inf_norm(rd);
        if (dual <= tol && gap <= 1e-2 * tol) break;
        const double t = mu * m / gap;
        const Eigen::VectorXd rc = -lambda.cwiseProduct(f).array() - 1.0 / t;
        const Eigen::VectorXd w = lambda.cwiseQuotient(-f);
        Eigen::MatrixXd H = L.hessF(y) + L.G().transpose() * w.asDiagonal() * L.G();
        H.diagonal().array() += 1e-14 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
        const Eigen::VectorXd rhs = -rd - L.G().transpose() * rc.cwiseQuotient(f);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        Eigen::VectorXd dy = ldlt.solve(rhs);
        if (ldlt.info() != Eigen::Success || !dy.allFinite()) dy = H.completeOrthogonalDecomposition().solve(rhs);
        const Eigen::VectorXd Gdy = L.G() * dy;
        const Eigen::VectorXd dl = (rc - lambda.cwiseProduct(Gdy)).cwiseQuotient(f);
        double smax = 1.0;
        for (int i = 0; i < m; ++i)
            if (dl(i) < 0.0) smax = std::min(smax, -lambda(i) / dl(i));
        double s = 0.99 * smax;
        for (int ls = 0; ls < 80 && (f + s * Gdy).maxCoeff() >= 0.0; ++ls) s *= 0.5;
        const double r0 = residual_norm(y, lambda, t);
        for (int ls = 0; ls < 80; ++ls) {
            if (residual_norm(y + s * dy, lambda + s * dl, t) <= (1.0 - 0.01 * s) * r0) break;
            s *= 0.5;
        }
        if (s < 1e-14) break;
        y += s * dy;
        lambda += s * dl;
        if (!y.allFinite() || inf_norm(y) > 1e12) break;
    }

    ProgramSolution sol;
    sol.iterations = it;
    sol.method = "interior-point";
    const double ipm_value = p.value(y.head(p.n));
    sol.residual = std::max(dual, gap);
    sol.converged = y.allFinite() && dual <= 1e2 * tol && gap <= 1e2 * tol;
    double polished = 0.0;
    for (double threshold : {1.0, 1e-4, 1e2}) {
        Eigen::VectorXd yc = y;
        if (crossover(L, p, yc, lambda, threshold, ipm_value, polished)) {
            y = std::move(yc);
            sol.residual = polished;
            sol.converged = true;
            sol.method = "interior-point+crossover";
            break;
        }
    }
    sol.x = y.head(p.n);
    sol.value = p.value(sol.x);
    return sol;
}

}  // namespace

bool ConcaveProgram::smooth() const {
    return std::all_of(terms.begin(), terms.end(), [](const OceTerm& t) { return t.penalty.is_smooth(); });
}

double ConcaveProgram::value(const Eigen::VectorXd& x) const {
    double v = cost ? -cost->value(x.head(cost->dim())) : 0.0;
    for (const auto& term : terms) v += oce_value(term.map * x + term.offset, term.probs, term.penalty);
    return v;
}

Eigen::VectorXd ConcaveProgram::gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    if (cost) g.head(cost->dim()) -= cost->gradient(x.head(cost->dim()));
    for (const auto& term : terms)
        g += term.map.transpose() * oce_gradient(term.map * x + term.offset, term.probs, term.penalty);
    return g;
}

Eigen::MatrixXd ConcaveProgram::hessian(const Eigen::VectorXd& x) const { return smooth_hessian(*this, x); }

ProgramSolution maximize(const ConcaveProgram& program, const Eigen::VectorXd& start, double radius,
                         const SolverOptions& options) {
    if (!program.smooth()) return interior_point(program, start, options);
    ProgramSolution sol = newton(program, start, options);
    if (sol.converged) return sol;
    const Eigen::VectorXd seed = grid_best(program, radius, options.grid_points);
    ProgramSolution retry = newton(program, seed, options);
    retry.iterations += sol.iterations;
    retry.method = "grid+newton";
    if (retry.converged || retry.value > sol.value) return retry;
    return sol;
}

}  // namespace contract_forge
