#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

inline double entropic(const Eigen::VectorXd& x, const Eigen::VectorXd& p, double gamma) {
    const double m = x.minCoeff();
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += p(i) * std::exp(-gamma * (x(i) - m));
    return m - std::log(s) / gamma;
}

// s - E[(s - X)_+] / lambda is concave piecewise linear in s with kinks at the outcomes.
inline double tvar(const Eigen::VectorXd& x, const Eigen::VectorXd& p, double lambda) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double s = x(j);
        double loss = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) loss += p(i) * std::max(s - x(i), 0.0);
        best = std::max(best, s - loss / lambda);
    }
    return best;
}

inline double golden_max(const std::function<double(double)>& f, double lo, double hi, int iterations = 200) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iterations; ++i) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// sup_s { s - E H(s - X) } by golden section on a wide bracket.
inline double generic_oce(const Eigen::VectorXd& x, const Eigen::VectorXd& p, const std::function<double(double)>& H) {
    auto f = [&](double s) {
        double e = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) e += p(i) * H(s - x(i));
        return s - e;
    };
    return f(golden_max(f, x.minCoeff() - 10.0, x.maxCoeff() + 10.0));
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
    double flo = f(lo);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Closed-form optimal-effort equation of the one-asset entropic example.
inline double entropic_effort_equation(double a, double ga, double gp, double sigma, double mu, double h) {
    const double sh = std::sqrt(h);
    return -(ga * gp / (ga + gp)) * sh * sigma * a - 0.5 * std::log((sigma * sh + a * h - mu) / (sigma * sh - a * h + mu));
}

inline double entropic_effort(double ga, double gp, double sigma, double mu, double h) {
    const double sh = std::sqrt(h);
    const double lo = (mu - sigma * sh) / h, hi = (mu + sigma * sh) / h;
    const double eps = 1e-12 * (hi - lo);
    return bisect([&](double a) { return entropic_effort_equation(a, ga, gp, sigma, mu, h); }, lo + eps, hi - eps);
}

// Hooke-Jeeves maximization with pattern moves, used to polish grid optima.
inline Eigen::VectorXd polish(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x, double step,
                              double min_step = 1e-12) {
    double fx = f(x);
    auto explore = [&](Eigen::VectorXd& y, double fy) {
        for (Eigen::Index i = 0; i < y.size(); ++i)
            for (double s : {step, -step}) {
                Eigen::VectorXd t = y;
                t(i) += s;
                const double ft = f(t);
                if (ft > fy) {
                    y = t;
                    fy = ft;
                    break;
                }
            }
        return fy;
    };
    int guard = 0;
    while (step > min_step && ++guard < 200000) {
        Eigen::VectorXd y = x;
        const double fy = explore(y, fx);
        if (!(fy > fx)) {
            step *= 0.5;
            continue;
        }
        Eigen::VectorXd prev = x;
        x = y;
        fx = fy;
        while (++guard < 200000) {
            Eigen::VectorXd z = x + (x - prev);
            const double fz = explore(z, f(z));
            if (!(fz > fx)) break;
            prev = x;
            x = z;
            fx = fz;
        }
    }
    return x;
}

struct GridResult {
    Eigen::VectorXd x;
    double value;
};

// Nested golden-section maximization of a jointly concave f over a box around `centre`.
inline Eigen::VectorXd nested_golden(const std::function<double(const Eigen::VectorXd&)>& f,
                                     const Eigen::VectorXd& centre, double radius) {
    auto inner = [&](double a) {
        Eigen::VectorXd x(2);
        x(0) = a;
        x(1) = golden_max([&](double g) { return f(Eigen::Vector2d(a, g)); }, centre(1) - radius, centre(1) + radius);
        return x;
    };
    const double a = golden_max([&](double a) { return f(inner(a)); }, centre(0) - radius, centre(0) + radius);
    return inner(a);
}

// Exhaustive search over [lo, hi]^2 at `points` per axis, refined by nested golden section
// around the best grid point and then by pattern search; the better refinement wins.
inline GridResult grid_search_2d(const std::function<double(const Eigen::VectorXd&)>& f, double lo, double hi,
                                 int points) {
    const double stride = (hi - lo) / (points - 1);
    Eigen::VectorXd best(2), x(2);
    double fbest = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < points; ++i)
        for (int j = 0; j < points; ++j) {
            x << lo + i * stride, lo + j * stride;
            const double v = f(x);
            if (v > fbest) {
                fbest = v;
                best = x;
            }
        }
    const Eigen::VectorXd p = polish(f, best, stride);
    const Eigen::VectorXd q = nested_golden(f, best, 4.0 * stride);
    return f(q) > f(p) ? GridResult{q, f(q)} : GridResult{p, f(p)};
}

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = 1e-6) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd a = x, b = x;
        a(i) += h;
        b(i) -= h;
        g(i) = (f(a) - f(b)) / (2.0 * h);
    }
    return g;
}

// Two-point Walsh increments +-sqrt(h) for one driver, positive move first.
inline Eigen::VectorXd binary_increments(double h) {
    Eigen::VectorXd w(2);
    w << std::sqrt(h), -std::sqrt(h);
    return w;
}

}  // namespace oracle
