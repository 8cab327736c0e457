// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Sparse>

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "slipstokes/fit.hpp"
#include "slipstokes/geometry.hpp"
#include "slipstokes/oscillation.hpp"
#include "slipstokes/orlicz.hpp"
#include "slipstokes/quadrature.hpp"
#include "slipstokes/solver.hpp"

namespace slipstokes {

/// Exact slip flow in the sector of opening beta: stream function
/// w = Im(z^{pi/beta}), velocity u = (-dw/dy, dw/dx). Solves the quadratic
/// system with zero forcing and zero pressure; satisfies u.nu = 0 and
/// [Du nu].tau = 0 on both rays.
class CornerFlow {
public:
    explicit CornerFlow(double beta) : beta_(beta), k_(M_PI / beta) {
        if (!(beta > 0.0 && beta < M_PI))
            throw std::invalid_argument("CornerFlow: opening angle must lie in (0, pi)");
    }

    double stream(const Vec2& p) const { return std::imag(zpow(p, k_)); }

    Vec2 velocity(const Vec2& p) const {
        check(p);
        const std::complex<double> f1 = k_ * zpow(p, k_ - 1.0);
        return {-std::real(f1), std::imag(f1)};
    }

    Mat2 gradient(const Vec2& p) const {
        check(p);
        const std::complex<double> f2 = k_ * (k_ - 1.0) * zpow(p, k_ - 2.0);
        const double re = std::real(f2), im = std::imag(f2);
        return {-re, im, im, re};
    }

    /// |grad u|(r) = sqrt(2) k |k-1| r^{k-2}, independent of the angle.
    double gradient_norm(double r) const {
        if (!(r > 0.0)) throw std::domain_error("CornerFlow: gradient singular at the tip");
        return std::sqrt(2.0) * k_ * std::abs(k_ - 1.0) * std::pow(r, k_ - 2.0);
    }

    double beta() const { return beta_; }
    double corner_exponent() const { return k_; }

private:
    static std::complex<double> zpow(const Vec2& p, double e) {
        return std::pow(std::complex<double>(p.x, p.y), e);
    }
    void check(const Vec2& p) const {
        if (p.norm() == 0.0) throw std::domain_error("CornerFlow: fields singular at the tip");
    }

    double beta_, k_;
};

/// Integrability threshold of |grad u|^q near the tip: finite for
/// q < 2/(2 - pi/beta) when beta > pi/2, unbounded exponent otherwise.
inline double lq_threshold(double beta) {
    if (!(beta > 0.0 && beta < M_PI))
        throw std::invalid_argument("lq_threshold: opening angle must lie in (0, pi)");
    if (beta <= 0.5 * M_PI) return std::numeric_limits<double>::infinity();
    return 2.0 / (2.0 - M_PI / beta);
}

/// Numeric integral of |grad u|^q over (B_1 cap sector) minus B_{r_min} by
/// composite polar Gauss quadrature on dyadic annuli.
inline double lq_norm_corner(double beta, double q, double r_min) {
    if (!(r_min > 0.0 && r_min < 1.0))
        throw std::invalid_argument("lq_norm_corner: need 0 < r_min < 1");
    const CornerFlow flow(beta);
    double total = 0.0;
    double hi = 1.0;
    while (hi > r_min) {
        const double lo = std::max(r_min, 0.5 * hi);
        // GL in radius and angle; the integrand is |grad u|^q r
        const int n_theta = 8;
        double panel = 0.0;
        for (int t = 0; t < n_theta; ++t) {
            const double th_lo = beta * t / n_theta, th_hi = beta * (t + 1) / n_theta;
            panel += gauss7(
                [&](double r) {
                    return gauss7(
                               [&](double th) {
                                   const Vec2 p = CornerDomain::from_polar(r, th);
                                   return std::pow(flow.gradient(p).frobenius(), q);
                               },
                               th_lo, th_hi) *
                           r;
                },
                lo, hi);
        }
        total += panel;
        hi = lo;
    }
    return total;
}

struct TiltedSharpnessResult {
    FitResult fit;              ///< log|d| against log|x1|
    double exponent = 0.0;      ///< reported Hölder exponent of the boundary derivative
    double min_boundary_gradient = 0.0; ///< Hopf positivity check
    bool degenerate = false;    ///< flat boundary: derivative vanishes identically
    int grid = 0;
};

/// Harmonic Dirichlet solve above the boundary graph given by its slope,
/// done on the flattened chart with the transformed Laplacian div(H H^T grad w).
/// Fits the decay exponent of the boundary tangential derivative around the
/// tilt point and reports the implied Hölder exponent (order shifts the fit
/// by the vanishing rate of the slope itself).
inline TiltedSharpnessResult tilted_sharpness_custom(const std::function<double(double)>& hprime,
                                                     int order, int n) {
    // chart rectangle (-1,1) x (0,1), nodal Q1 grid, elements 2n x n
    const int nx = 2 * n, ny = n;
    const double hx = 2.0 / nx, hy = 1.0 / ny;
    auto nid = [nx](int i, int j) { return j * (nx + 1) + i; };
    const int nnode = (nx + 1) * (ny + 1);
    for (int i = 0; i <= nx; ++i)
        if (std::abs(hprime(-1.0 + i * hx)) > 50.0)
            throw std::runtime_error("tilted_sharpness: chart slope too steep for the mesh");

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nnode);
    std::vector<int> fixed(nnode, 0);
    std::vector<double> fixed_val(nnode, 0.0);
    for (int i = 0; i <= nx; ++i) {
        fixed[nid(i, 0)] = 1;
        fixed_val[nid(i, 0)] = 0.0; // curved wall
        fixed[nid(i, ny)] = 1;
        fixed_val[nid(i, ny)] = 1.0; // far field
    }
    for (int j = 0; j <= ny; ++j) {
        const double x2 = j * hy;
        fixed[nid(0, j)] = 1;
        fixed_val[nid(0, j)] = x2;
        fixed[nid(nx, j)] = 1;
        fixed_val[nid(nx, j)] = x2;
    }

    // Q1 elements, 2x2 Gauss, coefficient A = H H^T = [[1, -h'], [-h', 1+h'^2]]
    const double gp[2] = {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)};
    for (int ej = 0; ej < ny; ++ej)
        for (int ei = 0; ei < nx; ++ei) {
            const int nodes[4] = {nid(ei, ej), nid(ei + 1, ej), nid(ei + 1, ej + 1),
                                  nid(ei, ej + 1)};
            double ke[4][4] = {};
            for (int gx = 0; gx < 2; ++gx)
                for (int gy = 0; gy < 2; ++gy) {
                    const double xi = gp[gx], eta = gp[gy];
                    // shape gradients on the reference square
                    const double dxi[4] = {-(1 - eta) / 4, (1 - eta) / 4, (1 + eta) / 4,
                                           -(1 + eta) / 4};
                    const double deta[4] = {-(1 - xi) / 4, -(1 + xi) / 4, (1 + xi) / 4,
                                            (1 - xi) / 4};
                    const double x1 = -1.0 + (ei + 0.5 * (1 + xi)) * hx;
                    const double hp = hprime(x1);
                    const double a11 = 1.0, a12 = -hp, a22 = 1.0 + hp * hp;
                    const double w = 0.25 * hx * hy; // gauss weight 1 x jacobian
                    for (int a = 0; a < 4; ++a)
                        for (int b = 0; b < 4; ++b) {
                            const double gax = dxi[a] * 2.0 / hx, gay = deta[a] * 2.0 / hy;
                            const double gbx = dxi[b] * 2.0 / hx, gby = deta[b] * 2.0 / hy;
                            ke[a][b] += w * (a11 * gax * gbx + a12 * (gax * gby + gay * gbx) +
                                             a22 * gay * gby);
                        }
                }
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) {
                    if (fixed[nodes[a]]) continue;
                    if (fixed[nodes[b]])
                        rhs[nodes[a]] -= ke[a][b] * fixed_val[nodes[b]];
                    else
                        trip.emplace_back(nodes[a], nodes[b], ke[a][b]);
                }
        }
    for (int k = 0; k < nnode; ++k)
        if (fixed[k]) {
            trip.emplace_back(k, k, 1.0);
            rhs[k] = fixed_val[k];
        }

    Eigen::SparseMatrix<double> K(nnode, nnode);
    K.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("tilted_sharpness: stiffness factorization failed");
    Eigen::VectorXd w = ldlt.solve(rhs);

    // wall-normal derivative of the chart solution (second-order one-sided)
    auto dnormal = [&](int i) {
        return (4.0 * w[nid(i, 1)] - w[nid(i, 2)]) / (2.0 * hy);
    };

    TiltedSharpnessResult out;
    out.grid = n;
    out.min_boundary_gradient = 1e300;
    for (int i = 1; i < nx; ++i) {
        const double x1 = -1.0 + i * hx;
        const double gn = std::abs(dnormal(i)) * std::sqrt(1.0 + hprime(x1) * hprime(x1));
        out.min_boundary_gradient = std::min(out.min_boundary_gradient, gn);
    }

    // boundary tangential derivative d(x1) = -h'(x1) dn w(x1); fit |d| ~ |x1|^s
    // over a geometric ladder, excluding the two coarsest and two finest points
    std::vector<double> xs, ds;
    for (double x1 = 0.7; x1 >= 3.0 * hx; x1 *= std::sqrt(0.5)) {
        const int i = static_cast<int>(std::lround((x1 + 1.0) / hx));
        const double xnode = -1.0 + i * hx;
        const double d = -hprime(xnode) * dnormal(i);
        if (std::abs(d) > 1e-13) {
            xs.push_back(xnode);
            ds.push_back(std::abs(d));
        }
    }
    if (xs.size() < 6) {
        out.degenerate = true;
        return out;
    }
    xs.erase(xs.begin(), xs.begin() + 2);
    ds.erase(ds.begin(), ds.begin() + 2);
    xs.resize(xs.size() - 2);
    ds.resize(ds.size() - 2);
    out.fit = fit_exponent(xs, ds);
    out.exponent = out.fit.exponent - (order - 1);
    return out;
}

inline TiltedSharpnessResult tilted_sharpness(double alpha, int order, int n) {
    const TiltedHalfPlane plane(alpha, order);
    return tilted_sharpness_custom([plane](double x) { return plane.boundary_slope(x); }, order, n);
}

// ---- forcing families for the stability experiments ----

/// Built-in forcing families; all have vanishing tangential traction F12 on
/// the flat slip wall {x2 = 0}.
inline std::function<SymMat2(Vec2)> forcing_family(int id, double scale = 1.0) {
    switch (id) {
    case 0: // smooth
        return [scale](Vec2 p) -> SymMat2 {
            return {scale * std::sin(4.0 * p.x) * std::cos(2.0 * p.y),
                    scale * p.y * std::cos(3.0 * p.x),
                    scale * std::cos(4.0 * p.x) * std::sin(2.0 * p.y)};
        };
    case 1: // interior jump in F11: bounded mean oscillation but discontinuous
        return [scale](Vec2 p) -> SymMat2 {
            const double jump = p.x > 0.13 ? 1.0 : -1.0;
            return {scale * jump, scale * p.y * std::cos(3.0 * p.x),
                    scale * std::cos(2.0 * p.x)};
        };
    case 2: // zero forcing
        return [](Vec2) { return SymMat2{}; };
    default:
        throw std::invalid_argument("forcing_family: unknown id");
    }
}

struct StabilityRow {
    int n = 0;
    double numerator = 0.0;   ///< stress seminorm on the half-size boundary cube
    double denominator = 0.0; ///< forcing seminorm plus the additive mean term
    double mean_term = 0.0;
    double ratio = 0.0;
};

/// Oscillation-stability probe: solve on the slip half-cube, measure the
/// boundary-adapted oscillation seminorm of S(Du_h) on the concentric
/// half-size cube against the forcing seminorm plus the mean term.
inline void require_increasing(const std::vector<int>& grids) {
    for (std::size_t k = 1; k < grids.size(); ++k)
        if (!(grids[k] > grids[k - 1]))
            throw std::invalid_argument("resolution ladder must be strictly increasing");
}

inline std::vector<StabilityRow> bmo_stability(
    const NFunction& phi, const std::vector<int>& grids, int family,
    const Weight& wgt = Weight::one(),
    const std::function<Vec2(Vec2)>& dirichlet = [](Vec2) { return Vec2{}; }) {
    require_increasing(grids);
    std::vector<StabilityRow> rows;
    auto F = forcing_family(family);
    for (int n : grids) {
        StaggeredGrid g = StaggeredGrid::half_cube(n);
        StokesSolver solver(g, phi, F, dirichlet);
        auto rep = solver.solve();
        if (!rep.converged) throw NonConvergence(rep);

        const SymTensorField S_all = [&] {
            SymTensorField du = solver.cell_sym_gradient(rep.state);
            SymTensorField s(du.grid);
            for (std::size_t k = 0; k < du.data.size(); ++k)
                s.data[k] = stress_shifted(phi, rep.state.eps_reg, du.data[k]);
            return s;
        }();

        // restriction to the concentric half-size boundary cube
        const int qx0 = g.nx / 4, qw = g.nx / 2, qh = g.ny / 2;
        Grid2 half(qw, qh, g.x0 + qx0 * g.h, 0.0, g.h, g.h);
        SymTensorField S_half(half);
        for (int j = 0; j < qh; ++j)
            for (int i = 0; i < qw; ++i) S_half.at(i, j) = S_all.at(qx0 + i, j);

        StabilityRow row;
        row.n = n;
        row.numerator = traction_bmo_seminorm(S_half, CubeFamily::dyadic(half, 16), wgt).value;
        auto Ff = SymTensorField::sampled(g.cell_grid(), F);
        const double fnorm =
            traction_bmo_seminorm(Ff, CubeFamily::dyadic(Ff.grid, 16), wgt).value;

        // additive mean term (1/omega(R)) avg (|S(Du)| + Phi'(|u|/R))
        double mean = 0.0;
        const double R = g.nx * g.h;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double u1 =
                    0.5 * (rep.state.u1[solver.idx_u1(i, j)] + rep.state.u1[solver.idx_u1(i + 1, j)]);
                const double u2 =
                    0.5 * (rep.state.u2[solver.idx_u2(i, j)] + rep.state.u2[solver.idx_u2(i, j + 1)]);
                mean += S_all.at(i, j).norm() + phi.deriv(Vec2{u1, u2}.norm() / R);
            }
        row.mean_term = mean / (g.nx * g.ny) / wgt.omega(R);
        row.denominator = fnorm + row.mean_term;
        row.ratio = row.numerator / row.denominator;
        rows.push_back(row);
    }
    return rows;
}

/// Trend slope of log2(ratio) per grid doubling; the boundedness acceptance
/// is slope <= 0.05.
inline double stability_trend_slope(const std::vector<StabilityRow>& rows) {
    std::vector<double> x, y;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        x.push_back(static_cast<double>(k));
        y.push_back(std::log2(rows[k].ratio));
    }
    auto [a, b, se] = line_fit(x, y);
    (void)a;
    (void)se;
    return b;
}

struct ScalingRow {
    int n = 0;
    double norm_grad_u = 0.0;
    double norm_pressure = 0.0;
    double norm_forcing = 0.0;
    double ratio = 0.0;
};

/// Hölder-scaling probe: Campanato-proxy seminorms of grad u and pi with the
/// exponent min(beta, beta (p-1)) against the forcing with beta (p-1).
inline std::vector<ScalingRow> holder_scaling(const NFunction& phi, double beta,
                                              const std::vector<int>& grids, int family = 0) {
    require_increasing(grids);
    const double p = phi.exponent();
    const double expo_f = std::min(1.0, beta * (p - 1.0));
    const double expo_u = std::min(beta, beta * (p - 1.0));
    auto F = forcing_family(family);
    std::vector<ScalingRow> rows;
    for (int n : grids) {
        StaggeredGrid g = StaggeredGrid::half_cube(n);
        StokesSolver solver(g, phi, F, [](Vec2) { return Vec2{}; });
        auto rep = solver.solve();
        if (!rep.converged) throw NonConvergence(rep);

        ScalingRow row;
        row.n = n;
        auto grad = solver.cell_gradient(rep.state);
        // gradient magnitude as a scalar field for the oscillation estimator
        ScalarField gmag(grad.grid);
        for (std::size_t k = 0; k < grad.data.size(); ++k) gmag.data[k] = grad.data[k].frobenius();
        row.norm_grad_u =
            holder_via_campanato(gmag, expo_u, CubeFamily::dyadic(gmag.grid, 16)).value;
        ScalarField pf(g.cell_grid());
        for (std::size_t k = 0; k < pf.data.size(); ++k) pf.data[k] = rep.state.pressure[k];
        row.norm_pressure = holder_via_campanato(pf, expo_u, CubeFamily::dyadic(pf.grid, 16)).value;
        auto Ff = SymTensorField::sampled(g.cell_grid(), F);
        row.norm_forcing =
            holder_via_campanato(Ff, expo_f, CubeFamily::dyadic(Ff.grid, 16)).value;
        row.ratio = (std::pow(row.norm_grad_u, p - 1.0) + row.norm_pressure) / row.norm_forcing;
        rows.push_back(row);
    }
    return rows;
}

/// Max relative deviation of solve(lambda F) from lambda^{1/(p-1)} solve(F)
/// over the supplied factors (pure power law only).
inline double homogeneity_check(const NFunction& phi, int n, int family,
                                const std::vector<double>& lambdas) {
    if (phi.model() != PotentialModel::PowerLaw)
        throw std::invalid_argument("homogeneity_check: power-law model required");
    const double p = phi.exponent();
    auto F = forcing_family(family);
    auto zero = [](Vec2) { return Vec2{}; };
    StaggeredGrid g = StaggeredGrid::half_cube(n);
    StokesSolver base(g, phi, F, zero);
    auto rbase = base.solve();
    double worst = 0.0;
    for (double lambda : lambdas) {
        auto Fl = [&F, lambda](Vec2 x) { return F(x) * lambda; };
        StokesSolver scaled(g, phi, Fl, zero);
        auto rs = scaled.solve();
        const double s = std::pow(lambda, 1.0 / (p - 1.0));
        double dev = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < rbase.state.u1.size(); ++k) {
            dev = std::max(dev, std::abs(rs.state.u1[k] - s * rbase.state.u1[k]));
            scale = std::max(scale, std::abs(s * rbase.state.u1[k]));
        }
        for (std::size_t k = 0; k < rbase.state.u2.size(); ++k) {
            dev = std::max(dev, std::abs(rs.state.u2[k] - s * rbase.state.u2[k]));
            scale = std::max(scale, std::abs(s * rbase.state.u2[k]));
        }
        worst = std::max(worst, dev / scale);
    }
    return worst;
}

struct ReflectionResult {
    double half_residual = 0.0;      ///< residual certified by the half-cube solve
    double interior_residual = 0.0;  ///< whole-cube interior residual of the reflection
    double diag_identity_error = 0.0;///< worst deviation in the concentric mean identity
    double newton_tol = 0.0;
};

/// Solves on the slip half-cube, reflects velocity, pressure and forcing
/// across the wall and evaluates the interior weak residual of the reflected
/// state on the doubled cube together with the concentric diagonal-mean
/// identity of the reflected forcing.
inline ReflectionResult reflection_experiment(
    const NFunction& phi, int n, int family = 0,
    const std::function<Vec2(Vec2)>& dirichlet = [](Vec2) { return Vec2{}; }) {
    StaggeredGrid g = StaggeredGrid::half_cube(n);
    auto F = forcing_family(family);
    StokesSolver solver(g, phi, F, dirichlet);
    SolverConfig cfg;
    auto rep = solver.solve(cfg);
    if (!rep.converged) throw NonConvergence(rep);

    // doubled cube with Dirichlet bottom (the seam becomes interior)
    StaggeredGrid gg(g.nx, 2 * g.ny, g.x0, g.y0 - g.ny * g.h, g.h, EdgeBC::Dirichlet);
    auto Fr = reflect_tensor_fn(F);
    auto dr = reflect_velocity_fn(dirichlet);
    StokesSolver whole(gg, phi, Fr, dr);

    DiscreteState full;
    full.u1.assign(static_cast<std::size_t>(gg.nx + 1) * gg.ny, 0.0);
    full.u2.assign(static_cast<std::size_t>(gg.nx) * (gg.ny + 1), 0.0);
    full.pressure.assign(static_cast<std::size_t>(gg.nx) * gg.ny, 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
            const double v = rep.state.u1[solver.idx_u1(i, j)];
            full.u1[whole.idx_u1(i, g.ny + j)] = v;
            full.u1[whole.idx_u1(i, g.ny - 1 - j)] = v;
        }
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double v = rep.state.u2[solver.idx_u2(i, j)];
            full.u2[whole.idx_u2(i, g.ny + j)] = v;
            full.u2[whole.idx_u2(i, g.ny - j)] = -v;
        }
    const Grid2 cg = g.cell_grid(), cgg = gg.cell_grid();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double v = rep.state.pressure[cg.index(i, j)];
            full.pressure[cgg.index(i, g.ny + j)] = v;
            full.pressure[cgg.index(i, g.ny - 1 - j)] = v;
        }

    ReflectionResult out;
    out.newton_tol = cfg.newton_tol;
    out.half_residual = rep.weak_residual;
    out.interior_residual =
        whole.interior_weak_residual(full, 2, rep.state.eps_reg) / rep.data_scale;

    // concentric diagonal-mean identity of the reflected forcing
    auto Fgrid = SymTensorField::sampled(cg, F);
    auto Frefl = reflect_tensor(Fgrid);
    for (int scale : {1, 2, 4}) {
        const int mj = Frefl.grid.ny / 2, mi = Frefl.grid.nx / 2;
        const int hw = Frefl.grid.nx / (2 * scale), hh = Frefl.grid.ny / (2 * scale);
        SymMat2 acc{};
        int cnt = 0;
        for (int j = mj - hh; j < mj + hh; ++j)
            for (int i = mi - hw; i < mi + hw; ++i) {
                acc += Frefl.at(i, j);
                ++cnt;
            }
        const SymMat2 full_mean = acc * (1.0 / cnt);
        SymMat2 acc_h{};
        int cnt_h = 0;
        for (int j = 0; j < g.ny / scale; ++j)
            for (int i = mi - hw; i < mi + hw; ++i) {
                acc_h += Fgrid.at(i, j);
                ++cnt_h;
            }
        const SymMat2 half_mean = acc_h * (1.0 / cnt_h);
        out.diag_identity_error = std::max(
            {out.diag_identity_error, std::abs(full_mean.a11 - half_mean.a11),
             std::abs(full_mean.a22 - half_mean.a22), std::abs(full_mean.a12)});
    }
    return out;
}

} // namespace slipstokes
