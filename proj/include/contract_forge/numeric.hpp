#pragma once

#include <cmath>
#include <utility>

namespace contract_forge::numeric {

struct ScalarMax {
    double argmax;
    double value;
};

/// Golden-section search for the maximum of a unimodal f on [lo, hi].
template <class F>
ScalarMax golden_max(F&& f, double lo, double hi, double width = 1e-12, int max_iter = 400) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < max_iter && (b - a) > width; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    return f1 >= f2 ? ScalarMax{x1, f1} : ScalarMax{x2, f2};
}

/// Bisection for a root of a continuous f with f(lo), f(hi) of opposite sign
/// (or zero). Returns the midpoint of the final bracket.
template <class F>
double bisect(F&& f, double lo, double hi, double tol = 1e-15, int max_iter = 400) {
    double flo = f(lo);
    if (flo == 0.0) return lo;
    for (int it = 0; it < max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi || (hi - lo) <= tol * (1.0 + std::abs(mid))) return mid;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace contract_forge::numeric
