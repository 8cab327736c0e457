// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace slipstokes {

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    const double err = left + right - whole;
    if (depth <= 0 || std::abs(err) <= 15.0 * tol)
        return left + right + err / 15.0; // Richardson correction
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Adaptive composite Simpson rule with a Richardson-extrapolated error check.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, int max_depth = 48) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = detail::simpson(f, a, b, fa, fm, fb);
    const double scale = std::max({1.0, std::abs(whole)});
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol * scale, max_depth);
}

/// Nodes and weights of the 7-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre7 {
    static constexpr int n = 7;
    static constexpr double xs[7] = {-0.9491079123427585, -0.7415311855993945, -0.4058451513773972,
                                     0.0,
                                     0.4058451513773972, 0.7415311855993945, 0.9491079123427585};
    static constexpr double ws[7] = {0.1294849661688697, 0.2797053914892766, 0.3818300505051189,
                                     0.4179591836734694,
                                     0.3818300505051189, 0.2797053914892766, 0.1294849661688697};
};

inline double gauss7(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b), r = 0.5 * (b - a);
    double s = 0.0;
    for (int k = 0; k < GaussLegendre7::n; ++k)
        s += GaussLegendre7::ws[k] * f(c + r * GaussLegendre7::xs[k]);
    return s * r;
}

/// Cumulative integral F(t) = int_0^t f, tabulated once on a graded grid and
/// evaluated through a cubic Hermite interpolant whose nodal slopes are the
/// exact integrand values. The table is refined until two consecutive panel
/// counts agree to `tol` (relative), and extends itself on demand.
class CumulativeIntegral {
public:
    CumulativeIntegral() = default;

    CumulativeIntegral(std::function<double(double)> f, double t_hi, double tol = 1e-12)
        : f_(std::move(f)), tol_(tol) {
        const double hi = std::max(t_hi, 1.0);
        int n_uniform = 512;
        for (int round = 0; round < 4; ++round) {
            build(hi, n_uniform);
            if (interp_error() <= tol_) break;
            n_uniform *= 4;
        }
    }

    double operator()(double t) const {
        if (t < 0.0) throw std::domain_error("CumulativeIntegral: negative argument");
        if (t == 0.0) return 0.0;
        // beyond the table: integrate the tail directly (keeps the object immutable)
        if (t > nodes_.back())
            return vals_.back() + integrate(f_, nodes_.back(), t, tol_);
        // locate panel
        const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
        std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
        if (i == 0) i = 1;
        if (i >= nodes_.size()) i = nodes_.size() - 1;
        const double x0 = nodes_[i - 1], x1 = nodes_[i];
        const double hel = x1 - x0, s = (t - x0) / hel;
        const double y0 = vals_[i - 1], y1 = vals_[i];
        const double d0 = slopes_[i - 1] * hel, d1 = slopes_[i] * hel;
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * d0 +
               (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * d1;
    }

    bool valid() const { return !nodes_.empty(); }

private:
    void build(double t_hi, int n_uniform) {
        // graded nodes: geometric from t_hi*2^-40 up to the uniform zone
        std::vector<double> nodes;
        nodes.push_back(0.0);
        double t = t_hi * std::pow(2.0, -40);
        while (t < t_hi / n_uniform) {
            nodes.push_back(t);
            t *= 2.0;
        }
        const double lo = nodes.back();
        for (int k = 1; k <= n_uniform; ++k)
            nodes.push_back(lo + (t_hi - lo) * static_cast<double>(k) / n_uniform);

        std::vector<double> vals(nodes.size(), 0.0), slopes(nodes.size(), 0.0);
        slopes[0] = f_(0.0);
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            double panel = gauss7(f_, nodes[i - 1], nodes[i]);
            // Richardson check against the split panel; subdivide estimate if needed
            const double mid = 0.5 * (nodes[i - 1] + nodes[i]);
            double split = gauss7(f_, nodes[i - 1], mid) + gauss7(f_, mid, nodes[i]);
            if (std::abs(split - panel) > tol_ * std::max(1.0, std::abs(split))) {
                panel = refine_panel(nodes[i - 1], nodes[i], split, 40);
            } else {
                panel = split;
            }
            vals[i] = vals[i - 1] + panel;
            slopes[i] = f_(nodes[i]);
        }
        nodes_ = std::move(nodes);
        vals_ = std::move(vals);
        slopes_ = std::move(slopes);
    }

    /// Largest relative mismatch between the Hermite interpolant and a direct
    /// quadrature value at panel midpoints of the uniform zone.
    double interp_error() const {
        double worst = 0.0;
        const std::size_t n = nodes_.size();
        for (std::size_t i = 0; i + 1 < n; i += std::max<std::size_t>(1, n / 128)) {
            const double mid = 0.5 * (nodes_[i] + nodes_[i + 1]);
            const double direct = vals_[i] + gauss7(f_, nodes_[i], mid);
            const double interp = (*this)(mid);
            worst = std::max(worst, std::abs(interp - direct) / std::max(1.0, std::abs(direct)));
        }
        return worst;
    }

    double refine_panel(double a, double b, double coarse, int depth) {
        const double mid = 0.5 * (a + b);
        const double fine = gauss7(f_, a, mid) + gauss7(f_, mid, b);
        if (depth <= 0 || std::abs(fine - coarse) <= tol_ * std::max(1.0, std::abs(fine)))
            return fine;
        return refine_panel(a, mid, gauss7(f_, a, mid), depth - 1) +
               refine_panel(mid, b, gauss7(f_, mid, b), depth - 1);
    }

    std::function<double(double)> f_;
    double tol_ = 1e-12;
    std::vector<double> nodes_, vals_, slopes_;
};

} // namespace slipstokes
