// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "slipstokes/core.hpp"
#include "slipstokes/geometry.hpp"
#include "slipstokes/grid_field.hpp"
#include "slipstokes/quadrature.hpp"

namespace slipstokes {

/// Oscillation modulus omega(r). Three built-in kinds: the constant weight
/// (plain mean oscillation), the power weight r^alpha (Hölder/Campanato
/// scale), and the logarithmic weight 1/log(e/r).
class Weight {
public:
    enum class Kind { Constant1, PowerAlpha, LogDini };

    static Weight one() { return Weight(Kind::Constant1, 0.0, 1.0); }
    static Weight power(double alpha) {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("Weight::power: alpha must lie in (0,1)");
        return Weight(Kind::PowerAlpha, alpha, alpha);
    }
    static Weight log_dini() { return Weight(Kind::LogDini, 0.0, 0.5); }

    double omega(double r) const {
        if (!(r > 0.0)) throw std::domain_error("Weight::omega: radius must be positive");
        switch (kind_) {
        case Kind::Constant1: return 1.0;
        case Kind::PowerAlpha: return std::pow(r, alpha_);
        default: return r >= 1.0 ? 1.0 : 1.0 / std::log(std::exp(1.0) / r);
        }
    }

    /// psi(r) = int_r^1 omega(rho)/rho drho; closed forms where elementary,
    /// quadrature for the logarithmic weight.
    double dini_psi(double r) const {
        if (!(r > 0.0 && r <= 1.0)) throw std::domain_error("Weight::dini_psi: need 0 < r <= 1");
        switch (kind_) {
        case Kind::Constant1: return std::log(1.0 / r);
        case Kind::PowerAlpha: return (1.0 - std::pow(r, alpha_)) / alpha_;
        default:
            return integrate([this](double rho) { return omega(rho) / rho; }, r, 1.0, 1e-12);
        }
    }

    Kind kind() const { return kind_; }
    double alpha() const { return alpha_; }
    /// Index beta of the recorded almost-decrease property of omega(r) r^-beta.
    double beta() const { return beta_; }

private:
    Weight(Kind k, double a, double b) : kind_(k), alpha_(a), beta_(b) {}
    Kind kind_;
    double alpha_;
    double beta_;
};

/// Square patch of whole cells [i0, i0+size) x [j0, j0+size).
struct Cube {
    int i0 = 0, j0 = 0, size = 0;
    double diam = 0.0; ///< physical side length

    bool valid() const { return size > 0; }
};

/// Finite cube family approximating the sup over all cubes: a dyadic tiling
/// hierarchy, optionally extended with boundary-anchored cubes. A cube that
/// meets the mask is used only if at least a quarter of its cells are masked.
class CubeFamily {
public:
    static CubeFamily dyadic(const Grid2& g, int max_level) {
        CubeFamily fam;
        fam.grid_ = g;
        int s = std::min(g.nx, g.ny);
        for (int level = 0; level <= max_level && s >= 1; ++level, s /= 2) {
            for (int j0 = 0; j0 + s <= g.ny; j0 += s)
                for (int i0 = 0; i0 + s <= g.nx; i0 += s)
                    fam.cubes_.push_back({i0, j0, s, s * g.hx});
            if (s % 2 != 0 && s > 1) break;
        }
        if (fam.cubes_.empty()) throw std::invalid_argument("CubeFamily::dyadic: empty family");
        return fam;
    }

    /// Bottom-anchored squares [a, a+r] x [0, r] of all dyadic cell sizes at
    /// every admissible offset; the discrete proxy for cubes centered at flat
    /// boundary points.
    static CubeFamily bottom_anchored(const Grid2& g) {
        CubeFamily fam;
        fam.grid_ = g;
        for (int s = std::min(g.nx, g.ny); s >= 1; s /= 2) {
            const int stride = std::max(1, s / 2);
            for (int i0 = 0; i0 + s <= g.nx; i0 += stride)
                fam.cubes_.push_back({i0, 0, s, s * g.hx});
            if (s % 2 != 0 && s > 1) break;
        }
        return fam;
    }

    const std::vector<Cube>& cubes() const { return cubes_; }
    const Grid2& grid() const { return grid_; }
    bool empty() const { return cubes_.empty(); }

    void append(const CubeFamily& other) {
        cubes_.insert(cubes_.end(), other.cubes_.begin(), other.cubes_.end());
    }

private:
    Grid2 grid_;
    std::vector<Cube> cubes_;
};

struct SeminormReport {
    double value = 0.0;
    Cube argmax;
    std::vector<std::pair<Cube, double>> table;
    double boundary_value = 0.0;
    Cube boundary_argmax;

    std::string to_json() const {
        std::ostringstream os;
        os.precision(17);
        os << "{\"value\":" << value << ",\"argmax\":{\"i0\":" << argmax.i0
           << ",\"j0\":" << argmax.j0 << ",\"cells\":" << argmax.size
           << ",\"diam\":" << argmax.diam << "},\"boundary_value\":" << boundary_value
           << ",\"cubes\":" << table.size() << "}";
        return os.str();
    }
};

namespace detail {

template <typename T>
bool cube_mean(const Field<T>& f, const Cube& c, T& mean_out, int& count_out) {
    T acc{};
    int n = 0;
    for (int j = c.j0; j < c.j0 + c.size; ++j)
        for (int i = c.i0; i < c.i0 + c.size; ++i)
            if (f.inside(i, j)) {
                acc += f.at(i, j);
                ++n;
            }
    count_out = n;
    if (n * 4 < c.size * c.size || n == 0) return false; // sliver, skip
    mean_out = acc * (1.0 / n);
    return true;
}

template <typename T>
double cube_oscillation(const Field<T>& f, const Cube& c, const T& center) {
    double acc = 0.0;
    int n = 0;
    for (int j = c.j0; j < c.j0 + c.size; ++j)
        for (int i = c.i0; i < c.i0 + c.size; ++i)
            if (f.inside(i, j)) {
                acc += component_norm(f.at(i, j) - center);
                ++n;
            }
    return acc / n;
}

} // namespace detail

/// sup over the family of (1/omega(diam Q)) avg_Q |f - <f>_Q|.
template <typename T>
SeminormReport bmo_seminorm(const Field<T>& f, const CubeFamily& family, const Weight& w) {
    if (family.empty()) throw std::invalid_argument("bmo_seminorm: empty cube family");
    SeminormReport rep;
    for (const Cube& c : family.cubes()) {
        T mean;
        int n = 0;
        if (!detail::cube_mean(f, c, mean, n)) continue;
        const double osc = detail::cube_oscillation(f, c, mean) / w.omega(c.diam);
        rep.table.emplace_back(c, osc);
        if (osc > rep.value) {
            rep.value = osc;
            rep.argmax = c;
        }
    }
    if (rep.table.empty()) throw std::invalid_argument("bmo_seminorm: no admissible cube");
    return rep;
}

template <typename T>
SeminormReport holder_via_campanato(const Field<T>& f, double alpha, const CubeFamily& family) {
    return bmo_seminorm(f, family, Weight::power(alpha));
}

/// Boundary traction average of a gridded tensor on a flat-bottom half-cube:
/// sup over bottom-anchored squares of (1/omega(r)) avg |F12| (the tangential
/// traction of F against nu = (0,-1), tau = (1,0)).
inline double boundary_traction_term(const SymTensorField& F, const Weight& w) {
    double best = 0.0;
    const CubeFamily anchored = CubeFamily::bottom_anchored(F.grid);
    for (const Cube& c : anchored.cubes()) {
        double acc = 0.0;
        int n = 0;
        for (int j = 0; j < c.size; ++j)
            for (int i = c.i0; i < c.i0 + c.size; ++i)
                if (F.inside(i, j)) {
                    acc += std::abs(F.at(i, j).a12);
                    ++n;
                }
        if (n * 4 < c.size * c.size || n == 0) continue;
        best = std::max(best, acc / n / w.omega(c.diam));
    }
    return best;
}

/// Boundary traction average for a callable tensor on a graph domain:
/// sup over sampled boundary points and radii of
/// (1/omega(r)) avg_{Q_{x,r} cap Omega} |[F(y) nu(x)] . tau(x)|.
inline double boundary_traction_term(const std::function<SymMat2(Vec2)>& F, const GraphDomain& dom,
                                     const Weight& w, int n_anchors, const std::vector<double>& radii,
                                     int n_quad = 32) {
    double best = 0.0;
    const double hw = dom.graph().half_width();
    for (int a = 0; a <= n_anchors; ++a) {
        const double x1 = -hw + 2.0 * hw * a / n_anchors;
        auto [nu, tau] = dom.normal_tangent(x1);
        const Vec2 bp{x1, dom.graph().h(x1)};
        for (double r : radii) {
            double acc = 0.0;
            int n = 0;
            for (int j = 0; j < n_quad; ++j)
                for (int i = 0; i < n_quad; ++i) {
                    const Vec2 y{bp.x - 0.5 * r + r * (i + 0.5) / n_quad,
                                 bp.y - 0.5 * r + r * (j + 0.5) / n_quad};
                    if (!dom.in_domain(y)) continue;
                    acc += std::abs(F(y).apply(nu).dot(tau));
                    ++n;
                }
            if (n == 0) continue;
            best = std::max(best, acc / n / w.omega(r));
        }
    }
    return best;
}

/// Oscillation + boundary traction seminorm on a flat-bottom half-cube grid.
inline SeminormReport traction_bmo_seminorm(const SymTensorField& F, const CubeFamily& family,
                                            const Weight& w) {
    SeminormReport rep = bmo_seminorm(F, family, w);
    rep.boundary_value = boundary_traction_term(F, w);
    rep.value += rep.boundary_value;
    return rep;
}

/// Half-cube star seminorm: max of the plain oscillation part and the
/// bottom-anchored average of |F12|. Equivalent (two-sidedly) to the whole
/// cube oscillation of the reflected tensor.
inline SeminormReport halfcube_star_seminorm(const SymTensorField& F, const Weight& w,
                                             int max_level = 16) {
    SeminormReport rep = bmo_seminorm(F, CubeFamily::dyadic(F.grid, max_level), w);
    rep.boundary_value = boundary_traction_term(F, w);
    rep.value = std::max(rep.value, rep.boundary_value);
    return rep;
}

/// Sharp oscillation against the diagonal-projected mean over a boundary
/// cube: (1/omega(diam)) avg_{Q cap Omega} |G - diag <G>_{Q cap Omega}|.
inline double diag_sharp_oscillation(const SymTensorField& G, const Cube& c, const Weight& w) {
    SymMat2 mean;
    int n = 0;
    if (!detail::cube_mean(G, c, mean, n))
        throw std::invalid_argument("diag_sharp_oscillation: cube misses the domain");
    const SymMat2 dm = mean.diag_part();
    double acc = 0.0;
    for (int j = c.j0; j < c.j0 + c.size; ++j)
        for (int i = c.i0; i < c.i0 + c.size; ++i)
            if (G.inside(i, j)) acc += component_norm(G.at(i, j) - dm);
    return acc / n / w.omega(c.diam);
}

/// Telescoping drift of means over the concentric dyadic shrinkage of Q:
/// lhs = |<|g|>_{2^-m Q} - <|g|>_Q|, rhs = 8 sum_i avg_{2^-i Q}|g - <g>|.
template <typename T>
std::pair<double, double> telescope_check(const Field<T>& f, const Cube& q, int m) {
    if (q.size % (1 << m) != 0)
        throw std::invalid_argument("telescope_check: cube not divisible to depth m");
    auto shrink = [&](int k) {
        const int s = q.size >> k;
        const int c = q.size >> 1;
        return Cube{q.i0 + c - s / 2, q.j0 + c - s / 2, s, s * f.grid.hx};
    };
    auto mean_abs = [&](const Cube& c) {
        double acc = 0.0;
        int n = 0;
        for (int j = c.j0; j < c.j0 + c.size; ++j)
            for (int i = c.i0; i < c.i0 + c.size; ++i)
                if (f.inside(i, j)) {
                    acc += component_norm(f.at(i, j));
                    ++n;
                }
        return acc / n;
    };
    const double lhs = std::abs(mean_abs(shrink(m)) - mean_abs(shrink(0)));
    double rhs = 0.0;
    for (int i = 0; i < m; ++i) {
        const Cube c = shrink(i);
        T mean;
        int n = 0;
        detail::cube_mean(f, c, mean, n);
        rhs += detail::cube_oscillation(f, c, mean);
    }
    return {lhs, 8.0 * rhs};
}

} // namespace slipstokes
