// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

namespace slipstokes {

/// Result of a least-squares exponent fit on log-log data.
struct FitResult {
    double exponent = 0.0;
    double intercept = 0.0;
    double band_low = 0.0;  ///< exponent minus one standard error
    double band_high = 0.0; ///< exponent plus one standard error
    std::vector<std::pair<double, double>> raw; ///< the (x, y) table that was fitted
};

/// Least-squares line fit y = a + b x; returns (a, b, stderr_of_b).
inline std::tuple<double, double, double> line_fit(const std::vector<double>& x,
                                                   const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("line_fit: need >= 2 matching points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0) throw std::invalid_argument("line_fit: degenerate abscissae");
    const double b = (n * sxy - sx * sy) / den;
    const double a = (sy - b * sx) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - a - b * x[i];
        ss += r * r;
    }
    const double se = (n > 2) ? std::sqrt(ss / (n - 2) * n / den) : 0.0;
    return {a, b, se};
}

/// Fits y ~ C * x^e from positive samples; exponent band is +- one standard error.
inline FitResult fit_exponent(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    FitResult out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
            out.raw.emplace_back(x[i], y[i]);
        }
    }
    auto [a, b, se] = line_fit(lx, ly);
    out.exponent = b;
    out.intercept = a;
    out.band_low = b - se;
    out.band_high = b + se;
    return out;
}

} // namespace slipstokes
