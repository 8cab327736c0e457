// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slipstokes/core.hpp"
#include "slipstokes/grid_field.hpp"
#include "slipstokes/interp.hpp"

namespace slipstokes {

/// Boundary chart y2 = h(y1) on [-R/2, R/2]. The constructor renormalizes so
/// that h(0) = 0 and h'(0) = 0 (the wall passes flat through the chart
/// origin); the subtracted affine part corresponds to the free choice of
/// chart translation and tilt.
class BoundaryGraph {
public:
    enum class Regularity { C11, C2Beta, C1AlphaTilted, C2AlphaTilted };

    static BoundaryGraph flat(double R) {
        return analytic([](double) { return 0.0; }, [](double) { return 0.0; },
                        [](double) { return 0.0; }, R);
    }

    static BoundaryGraph analytic(std::function<double(double)> h, std::function<double(double)> dh,
                                  std::function<double(double)> ddh, double R,
                                  Regularity tag = Regularity::C11) {
        if (!(R > 0.0)) throw std::invalid_argument("BoundaryGraph: side length must be positive");
        BoundaryGraph g;
        g.R_ = R;
        g.tag_ = tag;
        g.h_ = std::move(h);
        g.dh_ = std::move(dh);
        g.ddh_ = std::move(ddh);
        g.off0_ = g.h_(0.0);
        g.off1_ = g.dh_(0.0);
        g.record_lipschitz();
        return g;
    }

    /// Sampled chart; h' and h'' by analytic differentiation of the monotone
    /// cubic interpolant unless explicit columns are supplied.
    static BoundaryGraph sampled(std::vector<double> x, std::vector<double> h,
                                 std::vector<double> dh, std::vector<double> ddh, double R) {
        if (x.size() < 2 || h.size() != x.size())
            throw std::invalid_argument("BoundaryGraph::sampled: malformed table");
        auto hi = std::make_shared<MonotoneCubic>(x, h);
        std::shared_ptr<MonotoneCubic> di, ddi;
        if (!dh.empty()) {
            if (dh.size() != x.size()) throw std::invalid_argument("BoundaryGraph::sampled: h' column size");
            di = std::make_shared<MonotoneCubic>(x, dh);
        }
        if (!ddh.empty()) {
            if (ddh.size() != x.size()) throw std::invalid_argument("BoundaryGraph::sampled: h'' column size");
            ddi = std::make_shared<MonotoneCubic>(x, ddh);
        }
        std::function<double(double)> hf = [hi](double t) { return (*hi)(t); };
        std::function<double(double)> dhf =
            di ? std::function<double(double)>([di](double t) { return (*di)(t); })
               : std::function<double(double)>([hi](double t) { return hi->deriv(t); });
        std::function<double(double)> ddhf;
        if (ddi) ddhf = [ddi](double t) { return (*ddi)(t); };
        else if (di) ddhf = [di](double t) { return di->deriv(t); };
        else ddhf = [hi](double t) { return hi->second_deriv(t); };
        return analytic(std::move(hf), std::move(dhf), std::move(ddhf), R);
    }

    /// Text table with columns x1, h, h' and an optional fourth column h''.
    static BoundaryGraph from_table_file(const std::string& path, double R) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("BoundaryGraph::from_table_file: cannot open " + path);
        std::vector<double> x, h, dh, ddh;
        std::string line;
        bool has4 = false, first = true;
        while (std::getline(in, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ls(line);
            double a, b, c, d;
            if (ls >> a >> b >> c) {
                if (first) { has4 = static_cast<bool>(ls >> d); first = false; }
                else if (has4 && !(ls >> d)) throw std::runtime_error("BoundaryGraph: ragged table");
                x.push_back(a); h.push_back(b); dh.push_back(c);
                if (has4) ddh.push_back(d);
            }
        }
        return sampled(std::move(x), std::move(h), std::move(dh), std::move(ddh), R);
    }

    double h(double x1) const { return h_(x1) - off0_ - off1_ * x1; }
    double dh(double x1) const { return dh_(x1) - off1_; }
    double ddh(double x1) const { return ddh_(x1); }

    double side_length() const { return R_; }
    double half_width() const { return 0.5 * R_; }
    Regularity regularity() const { return tag_; }
    double lipschitz_bound() const { return lip_; }

private:
    void record_lipschitz() {
        double m = 0.0;
        for (int k = 0; k <= 512; ++k) {
            const double x = -half_width() + R_ * k / 512.0;
            m = std::max(m, std::abs(dh(x)));
        }
        lip_ = m;
    }

    double R_ = 1.0;
    Regularity tag_ = Regularity::C11;
    std::function<double(double)> h_, dh_, ddh_;
    double off0_ = 0.0, off1_ = 0.0;
    double lip_ = 0.0;
};

/// The flat half-cube chart Q_R^+ together with its image under the map
/// T(x1, x2) = (x1, x2 + h(x1)). T is area preserving (det grad T = 1).
class GraphDomain {
public:
    explicit GraphDomain(BoundaryGraph g) : graph_(std::move(g)) {}

    const BoundaryGraph& graph() const { return graph_; }
    double side_length() const { return graph_.side_length(); }

    bool in_flat_chart(const Vec2& x) const {
        const double w = graph_.half_width();
        return x.x >= -w && x.x <= w && x.y >= 0.0 && x.y <= w;
    }
    bool in_domain(const Vec2& y) const { return in_flat_chart(unflatten_unchecked(y)); }

    /// The chart map T: Q_R^+ -> Omega_R^+.
    Vec2 flatten(const Vec2& x) const {
        if (!in_flat_chart(x)) throw std::domain_error("GraphDomain::flatten: point outside chart");
        return {x.x, x.y + graph_.h(x.x)};
    }

    /// Inverse chart map T^{-1}: Omega_R^+ -> Q_R^+.
    Vec2 unflatten(const Vec2& y) const {
        const Vec2 x = unflatten_unchecked(y);
        if (!in_flat_chart(x)) throw std::domain_error("GraphDomain::unflatten: point outside image");
        return x;
    }

    /// H(x) = (grad T)^{-1}(T x) = [[1, 0], [-h'(x1), 1]].
    Mat2 H(const Vec2& x) const { return {1.0, 0.0, -graph_.dh(x.x), 1.0}; }

    /// H^{-1}(x) = grad T(x) = [[1, 0], [h'(x1), 1]].
    Mat2 Hinv(const Vec2& x) const { return {1.0, 0.0, graph_.dh(x.x), 1.0}; }

    /// Correction matrix of a field g: single entry h''(x1) g1(x) at (2,1).
    Mat2 correction_matrix(const Vec2& x, double g1) const {
        return {0.0, 0.0, graph_.ddh(x.x) * g1, 0.0};
    }

    /// Unit outer normal and tangent of the graph boundary at x1.
    std::pair<Vec2, Vec2> normal_tangent(double x1) const {
        const double s = graph_.dh(x1);
        const double w = 1.0 / std::sqrt(1.0 + s * s);
        const Vec2 nu{s * w, -w};
        const Vec2 tau{w, s * w};
        return {nu, tau};
    }

    /// Empirical sandwich constants: the largest lambda and smallest Lambda
    /// such that Q_{lambda R} cap Omega sits inside the chart image inside
    /// Q_{Lambda R}, estimated from the sampled extremes of |h|.
    std::pair<double, double> sandwich_constants(int samples = 512) const {
        double hmax = 0.0;
        for (int k = 0; k <= samples; ++k) {
            const double x = -graph_.half_width() + graph_.side_length() * k / samples;
            hmax = std::max(hmax, std::abs(graph_.h(x)));
        }
        const double ratio = 2.0 * hmax / graph_.side_length();
        return {std::max(0.0, 1.0 - ratio), 1.0 + ratio};
    }

private:
    Vec2 unflatten_unchecked(const Vec2& y) const { return {y.x, y.y - graph_.h(y.x)}; }

    BoundaryGraph graph_;
};

/// Axis rectangle in the flat chart; bottom edge on {x2 = 0}.
struct ChartRect {
    double x1_lo = -0.5, x1_hi = 0.5, x2_hi = 0.5;
    double width() const { return x1_hi - x1_lo; }
};

/// Velocity pulled back to the flat chart. The first component has mean zero
/// over the chart rectangle; the second acquires the -h' u1 tilt so that the
/// pair stays divergence free in chart coordinates.
struct PulledBackVelocity {
    std::function<Vec2(Vec2)> ubar;
    double mean_u1 = 0.0;
};

/// Discrete divergence check by central differences at interior samples.
inline double max_divergence(const std::function<Vec2(Vec2)>& u, const ChartRect& q, int n,
                             double step) {
    double worst = 0.0;
    for (int j = 1; j < n; ++j)
        for (int i = 1; i < n; ++i) {
            const Vec2 x{q.x1_lo + q.width() * i / n, q.x2_hi * j / n};
            const double div = (u({x.x + step, x.y}).x - u({x.x - step, x.y}).x +
                                u({x.x, x.y + step}).y - u({x.x, x.y - step}).y) /
                               (2.0 * step);
            worst = std::max(worst, std::abs(div));
        }
    return worst;
}

/// Pull a velocity on the curved image T(Q^+) back to the flat chart Q^+.
/// The input must be divergence free (checked by finite differences).
inline PulledBackVelocity pullback_velocity(const GraphDomain& dom,
                                            const std::function<Vec2(Vec2)>& u, const ChartRect& q,
                                            int n_quad = 128, double div_tol = 1e-6) {
    const double fd = std::sqrt(1e-16) * std::max(1.0, q.width());
    // divergence check in physical coordinates over the chart image
    double worst = 0.0;
    for (int j = 1; j < 16; ++j)
        for (int i = 1; i < 16; ++i) {
            const double x1 = q.x1_lo + q.width() * i / 16.0;
            const double x2 = q.x2_hi * j / 16.0;
            const Vec2 y{x1, x2 + dom.graph().h(x1)};
            const double d = (u({y.x + fd, y.y}).x - u({y.x - fd, y.y}).x +
                              u({y.x, y.y + fd}).y - u({y.x, y.y - fd}).y) /
                             (2.0 * fd);
            worst = std::max(worst, std::abs(d));
        }
    if (worst > div_tol)
        throw std::invalid_argument("pullback_velocity: input field is not divergence free");

    // <u1>_{T(Q^+)} equals the chart average of u1 o T (area preservation)
    double acc = 0.0;
    for (int j = 0; j < n_quad; ++j)
        for (int i = 0; i < n_quad; ++i) {
            const double x1 = q.x1_lo + q.width() * (i + 0.5) / n_quad;
            const double x2 = q.x2_hi * (j + 0.5) / n_quad;
            acc += u({x1, x2 + dom.graph().h(x1)}).x;
        }
    const double mean_u1 = acc / (n_quad * n_quad);

    const BoundaryGraph g = dom.graph();
    auto ubar = [g, u, mean_u1](Vec2 x) -> Vec2 {
        const Vec2 y{x.x, x.y + g.h(x.x)};
        const Vec2 val = u(y);
        return {val.x - mean_u1, val.y - g.dh(x.x) * (val.x - mean_u1)};
    };
    return {ubar, mean_u1};
}

/// Divergence-free corrector removing the bottom-trace mismatch -h' <u1> of a
/// pulled-back velocity. Both components depend on a single variable, so the
/// divergence vanishes identically.
class SlipCorrector {
public:
    SlipCorrector(const GraphDomain& dom, double mean_u1)
        : graph_(dom.graph()), mean_u1_(mean_u1), ddh0_(dom.graph().ddh(0.0)) {}

    Vec2 operator()(const Vec2& x) const {
        return {-ddh0_ * mean_u1_ * x.y, graph_.dh(x.x) * mean_u1_};
    }

    Mat2 grad(const Vec2& x) const {
        return {0.0, -ddh0_ * mean_u1_, graph_.ddh(x.x) * mean_u1_, 0.0};
    }

    SymMat2 sym_grad(const Vec2& x) const {
        const double off = 0.5 * mean_u1_ * (graph_.ddh(x.x) - ddh0_);
        return {0.0, off, 0.0};
    }

    double mean_u1() const { return mean_u1_; }

private:
    BoundaryGraph graph_;
    double mean_u1_;
    double ddh0_;
};

inline SlipCorrector corrector(const GraphDomain& dom, double mean_u1) {
    return {dom, mean_u1};
}

/// (H^{-1} grad_ubar H)_sym + sym(H_{ubar}); equals (D u)(T x) when ubar is
/// the pullback of u.
inline SymMat2 transformed_sym_gradient(const GraphDomain& dom, const Mat2& grad_ubar,
                                        double ubar1, const Vec2& x) {
    const Mat2 m = dom.Hinv(x) * grad_ubar * dom.H(x);
    return sym(m) + sym(dom.correction_matrix(x, ubar1));
}

// ---- perfect-slip reflection across the flat bottom edge ----

/// Even/odd extension of a velocity across {x2 = 0}. Defined wherever the
/// original field is defined for |x2|.
inline std::function<Vec2(Vec2)> reflect_velocity_fn(std::function<Vec2(Vec2)> u) {
    return [u = std::move(u)](Vec2 x) -> Vec2 {
        if (x.y >= 0.0) return u(x);
        const Vec2 v = u({x.x, -x.y});
        return {v.x, -v.y};
    };
}

/// Tensor extension: diagonal even, off-diagonal odd.
inline std::function<SymMat2(Vec2)> reflect_tensor_fn(std::function<SymMat2(Vec2)> F) {
    return [F = std::move(F)](Vec2 x) -> SymMat2 {
        if (x.y >= 0.0) return F(x);
        const SymMat2 f = F({x.x, -x.y});
        return {f.a11, -f.a12, f.a22};
    };
}

/// Gridded reflection: doubles the grid downwards. The bottom normal trace of
/// the input (linearly extrapolated to the edge) must vanish within tol.
inline VectorField reflect_velocity(const VectorField& u, double trace_tol) {
    const Grid2& g = u.grid;
    if (g.ny < 2) throw std::invalid_argument("reflect_velocity: need at least two rows");
    for (int i = 0; i < g.nx; ++i) {
        const double trace = 1.5 * u.at(i, 0).y - 0.5 * u.at(i, 1).y;
        if (std::abs(trace) > trace_tol)
            throw std::invalid_argument("reflect_velocity: nonzero normal trace on the slip edge");
    }
    Grid2 gg(g.nx, 2 * g.ny, g.x0, g.y0 - g.ny * g.hy, g.hx, g.hy);
    VectorField out(gg);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const Vec2 v = u.at(i, j);
            out.at(i, g.ny + j) = v;
            out.at(i, g.ny - 1 - j) = {v.x, -v.y};
            out.mask[gg.index(i, g.ny + j)] = u.mask[g.index(i, j)];
            out.mask[gg.index(i, g.ny - 1 - j)] = u.mask[g.index(i, j)];
        }
    return out;
}

inline SymTensorField reflect_tensor(const SymTensorField& F) {
    const Grid2& g = F.grid;
    Grid2 gg(g.nx, 2 * g.ny, g.x0, g.y0 - g.ny * g.hy, g.hx, g.hy);
    SymTensorField out(gg);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const SymMat2 f = F.at(i, j);
            out.at(i, g.ny + j) = f;
            out.at(i, g.ny - 1 - j) = {f.a11, -f.a12, f.a22};
            out.mask[gg.index(i, g.ny + j)] = F.mask[g.index(i, j)];
            out.mask[gg.index(i, g.ny - 1 - j)] = F.mask[g.index(i, j)];
        }
    return out;
}

// ---- counterexample domains ----

/// Sector {0 < theta < beta} in polar coordinates.
struct CornerDomain {
    double beta;

    explicit CornerDomain(double beta_) : beta(beta_) {
        if (!(beta > 0.0 && beta < M_PI))
            throw std::invalid_argument("CornerDomain: opening angle must lie in (0, pi)");
    }

    static Vec2 from_polar(double r, double theta) {
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    bool contains(const Vec2& p) const {
        const double r = p.norm();
        if (r == 0.0) return false;
        const double theta = std::atan2(p.y, p.x);
        return theta > 0.0 && theta < beta;
    }

    /// The Lipschitz constant of the corner seen as a graph over the bisector
    /// chart; tends to 0 as the opening angle approaches pi.
    double lipschitz_constant() const { return std::tan(0.5 * (M_PI - beta)); }
};

/// Domain above the curve x2 = -|x1|^{order+alpha}; order = 2 gives a C^{2,alpha}
/// boundary, order = 1 a C^{1,alpha} one (exactly, not better, at the origin).
struct TiltedHalfPlane {
    double alpha;
    int order;

    TiltedHalfPlane(double alpha_, int order_) : alpha(alpha_), order(order_) {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("TiltedHalfPlane: alpha must lie in (0, 1)");
        if (order != 1 && order != 2)
            throw std::invalid_argument("TiltedHalfPlane: order must be 1 or 2");
    }

    double boundary_height(double x1) const { return -std::pow(std::abs(x1), order + alpha); }
    double boundary_slope(double x1) const {
        const double e = order + alpha;
        return x1 == 0.0 ? 0.0 : -e * std::pow(std::abs(x1), e - 1.0) * (x1 > 0 ? 1.0 : -1.0);
    }

    bool contains(const Vec2& p) const { return p.y >= boundary_height(p.x); }

    BoundaryGraph chart(double R) const {
        const double e = order + alpha;
        return BoundaryGraph::analytic(
            [e](double x) { return -std::pow(std::abs(x), e); },
            [e](double x) { return x == 0.0 ? 0.0 : -e * std::pow(std::abs(x), e - 1.0) * (x > 0 ? 1 : -1); },
            [e](double x) { return x == 0.0 ? 0.0 : -e * (e - 1.0) * std::pow(std::abs(x), e - 2.0); },
            R,
            order == 2 ? BoundaryGraph::Regularity::C2AlphaTilted
                       : BoundaryGraph::Regularity::C1AlphaTilted);
    }
};

} // namespace slipstokes
