// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations used by the test suites. Everything in
// here is deliberately written from scratch (plain recursion, brute force,
// finite differences) so that it shares no code path with the library.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Richardson-extrapolated recursive Simpson rule, independent of the library
// quadrature.
inline double simpson_rec(const std::function<double(double)>& f, double a, double b,
                          double fa, double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double flm = f(0.5 * (a + m)), frm = f(0.5 * (m + b));
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

inline double integral(const std::function<double(double)>& f, double a, double b,
                       double tol = 1e-13) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 52);
}

// Legendre transform by brute-force grid search: sup_y (x y - phi(y)).
inline double legendre_sup(const std::function<double(double)>& phi, double x, double y_max,
                           int n = 2000000) {
    double best = 0.0; // y = 0 gives -phi(0) = 0
    for (int i = 1; i <= n; ++i) {
        const double y = y_max * static_cast<double>(i) / n;
        best = std::max(best, x * y - phi(y));
    }
    return best;
}

// Central finite difference of a scalar function of a 2-vector.
inline double fd_partial(const std::function<double(double, double)>& f, double x, double y,
                         int dir, double h) {
    if (dir == 0) return (f(x + h, y) - f(x - h, y)) / (2.0 * h);
    return (f(x, y + h) - f(x, y - h)) / (2.0 * h);
}

} // namespace oracle
