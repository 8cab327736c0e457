// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "slipstokes/core.hpp"
#include "slipstokes/geometry.hpp"
#include "slipstokes/grid_field.hpp"
#include "slipstokes/orlicz.hpp"

namespace slipstokes {

enum class EdgeBC { Dirichlet, PerfectSlip };

/// MAC staggered grid: u1 on vertical face centers, u2 on horizontal face
/// centers, pressure at cell centers. Square cells. Only the bottom edge may
/// carry the perfect-slip condition; the other edges are Dirichlet.
struct StaggeredGrid {
    int nx = 0, ny = 0;
    double x0 = 0.0, y0 = 0.0;
    double h = 0.0;
    EdgeBC bottom = EdgeBC::PerfectSlip;

    StaggeredGrid() = default;
    StaggeredGrid(int nx_, int ny_, double x0_, double y0_, double h_,
                  EdgeBC bottom_ = EdgeBC::PerfectSlip)
        : nx(nx_), ny(ny_), x0(x0_), y0(y0_), h(h_), bottom(bottom_) {
        if (nx < 2 || ny < 2 || !(h > 0.0))
            throw std::invalid_argument("StaggeredGrid: need nx, ny >= 2 and h > 0");
    }

    /// Half-cube (-R/2, R/2) x (0, R/2) with n x n/2 cells.
    static StaggeredGrid half_cube(int n, double R = 1.0, EdgeBC bottom = EdgeBC::PerfectSlip) {
        if (n % 2 != 0) throw std::invalid_argument("StaggeredGrid::half_cube: n must be even");
        return {n, n / 2, -0.5 * R, 0.0, R / n, bottom};
    }

    Vec2 u1_pos(int i, int j) const { return {x0 + i * h, y0 + (j + 0.5) * h}; }
    Vec2 u2_pos(int i, int j) const { return {x0 + (i + 0.5) * h, y0 + j * h}; }
    Vec2 cell_center(int i, int j) const { return {x0 + (i + 0.5) * h, y0 + (j + 0.5) * h}; }
    Vec2 node_pos(int a, int b) const { return {x0 + a * h, y0 + b * h}; }

    Grid2 cell_grid() const { return {nx, ny, x0, y0, h, h}; }
};

struct SolverConfig {
    double newton_tol = 1e-11;    ///< relative residual and divergence tolerance
    int max_newton = 60;          ///< Newton iterations per multiplier round
    double rho_al = 0.0;          ///< penalty; 0 selects an automatic scale
    double eps_init_rel = 1e-1;   ///< shift continuation start, relative to the data scale
    double eps_floor_rel = 1e-8;  ///< shift continuation floor, relative to the data scale
    double eps_factor = 0.1;      ///< geometric continuation factor
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    int max_backtrack = 40;
    int max_uzawa = 80;
    int verbose = 0;

    void validate() const {
        if (!(newton_tol > 0.0) || max_newton <= 0 || !(eps_init_rel > 0.0) ||
            !(eps_floor_rel > 0.0) || !(eps_factor > 0.0 && eps_factor < 1.0) ||
            !(armijo_c > 0.0) || !(backtrack > 0.0 && backtrack < 1.0) || max_backtrack <= 0 ||
            max_uzawa <= 0)
            throw std::invalid_argument("SolverConfig: all parameters must be positive");
    }
};

struct DiscreteState {
    std::vector<double> u1; ///< (nx+1) x ny, row major
    std::vector<double> u2; ///< nx x (ny+1)
    std::vector<double> pressure; ///< nx x ny, mean zero
    double eps_reg = 0.0;
};

struct SolveReport {
    DiscreteState state;
    std::vector<double> residual_history;
    std::vector<double> energy_history;
    std::vector<int> energy_segment; ///< minimization segment of each history entry
    std::vector<int> newton_per_stage;
    std::vector<double> stage_eps;
    double weak_residual = 0.0;
    double max_divergence = 0.0;  ///< max deviation from the feasible mean
    double mean_divergence = 0.0; ///< data-induced compatibility defect
    double data_scale = 1.0;
    bool converged = false;
};

struct NonConvergence : std::runtime_error {
    explicit NonConvergence(SolveReport rep)
        : std::runtime_error("solver did not converge"), report(std::move(rep)) {}
    SolveReport report;
};

struct IllPosedData : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

namespace detail {

struct LinTerm {
    int dof;
    double c;
};

struct LinForm {
    std::vector<LinTerm> terms;
    double c0 = 0.0;

    double eval(const std::vector<double>& z) const {
        double v = c0;
        for (const auto& t : terms) v += t.c * z[t.dof];
        return v;
    }

    void add(int dof, double c, double fixed_value) {
        if (dof >= 0) {
            for (auto& t : terms)
                if (t.dof == dof) {
                    t.c += c;
                    return;
                }
            terms.push_back({dof, c});
        } else {
            c0 += c * fixed_value;
        }
    }

    void axpy(const LinForm& other, double s) {
        c0 += s * other.c0;
        for (const auto& t : other.terms) {
            bool found = false;
            for (auto& mine : terms)
                if (mine.dof == t.dof) {
                    mine.c += s * t.c;
                    found = true;
                    break;
                }
            if (!found) terms.push_back({t.dof, s * t.c});
        }
    }
};

struct CellStencil {
    LinForm m[6]; ///< M11, M22, m12 at the 4 cell corners
    LinForm divf;
    double fcoef[6] = {0, 0, 0, 0, 0, 0}; ///< contraction coefficients of the data tensor
};

constexpr double kFormWeights[6] = {1.0, 1.0, 0.5, 0.5, 0.5, 0.5};

} // namespace detail

/// Convex-minimization solver for the generalized Stokes system with perfect
/// slip on the flat bottom edge. Curved walls are handled in transformed mode
/// on the flat half-cube: the symmetric gradient is replaced by
/// (H^{-1} grad v H)_sym plus the h'' correction and the data tensor is pulled
/// back through the chart; the divergence constraint stays the flat one.
class StokesSolver {
public:
    StokesSolver(const StaggeredGrid& grid, NFunction phi,
                 std::function<SymMat2(Vec2)> forcing,
                 std::function<Vec2(Vec2)> dirichlet,
                 const GraphDomain* chart = nullptr)
        : g_(grid), phi_(std::move(phi)),
          forcing_(std::move(forcing)), dirichlet_(std::move(dirichlet)) {
        if (chart) chart_ = std::make_shared<GraphDomain>(*chart);
        build_dof_maps();
        build_stencils();
        check_slip_data();
    }

    int n_unknowns() const { return n_unknowns_; }
    const StaggeredGrid& grid() const { return g_; }

    /// Total functional sum_cells h^2 [Phi_eps(|M(v)|) - F : M(v)] for the
    /// velocity packed in z; eps = 0 gives the unregularized energy.
    double energy(const std::vector<double>& z, double eps = 0.0) const {
        return energy_with(z, ShiftedNFunction(phi_, eps));
    }

    double energy_with(const std::vector<double>& z, const ShiftedNFunction& se) const {
        double acc = 0.0;
        const double area = g_.h * g_.h;
        for (const auto& cs : stencils_) {
            double m[6];
            double s2 = 0.0, fdot = 0.0;
            for (int k = 0; k < 6; ++k) {
                m[k] = cs.m[k].eval(z);
                s2 += detail::kFormWeights[k] * m[k] * m[k];
                fdot += cs.fcoef[k] * m[k];
            }
            acc += area * (se.value(std::sqrt(s2)) - fdot);
        }
        return acc;
    }

    SolveReport solve(const SolverConfig& cfg = {}) const {
        cfg.validate();
        SolveReport rep;
        std::vector<double> z(n_unknowns_, 0.0);
        std::vector<double> pi(g_.nx * g_.ny, 0.0);

        const double du_char = characteristic_gradient();
        const double stress_scale = std::max({phi_.deriv(du_char), data_fmax_, 1e-300});
        rep.data_scale = stress_scale;
        const double rho = cfg.rho_al > 0.0 ? cfg.rho_al
                                            : 1e4 * std::max(phi_.deriv(du_char) / du_char, 1e-12);

        std::vector<double> eps_list;
        const bool quadratic = phi_.model() == PotentialModel::PowerLaw &&
                               std::abs(phi_.exponent() - 2.0) < 1e-14;
        if (quadratic) {
            eps_list.push_back(0.0);
        } else {
            for (double e = cfg.eps_init_rel * du_char; e > cfg.eps_floor_rel * du_char;
                 e *= cfg.eps_factor)
                eps_list.push_back(e);
            eps_list.push_back(cfg.eps_floor_rel * du_char);
        }

        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
        bool factorized = false;
        int segment = 0;

        // face-sampled Dirichlet data may carry an O(h^2) net flux; the
        // feasible divergence target is then the U-independent mean defect
        const double div_mean = divergence_mean();

        for (double eps : eps_list) {
            rep.stage_eps.push_back(eps);
            const ShiftedNFunction se(phi_, eps);
            int stage_newton = 0;
            const double grad_tol = cfg.newton_tol * stress_scale * g_.h * g_.h;
            bool stage_done = false;
            for (int uz = 0; uz < cfg.max_uzawa && !stage_done; ++uz) {
                // inner damped Newton at fixed multiplier
                double gn_prev = 1e300;
                int stalls = 0;
                for (int it = 0; it < cfg.max_newton; ++it) {
                    std::vector<double> grad;
                    const double gn = assemble_gradient(z, pi, rho, eps, grad, div_mean);
                    if (cfg.verbose > 1)
                        std::fprintf(stderr, "  eps=%.3e uz=%d it=%d |g|=%.3e tol=%.3e\n", eps, uz,
                                     it, gn, grad_tol);
                    if (gn <= grad_tol) break;
                    // rounding floor: no further decrease is attainable
                    if (gn > 0.5 * gn_prev && ++stalls >= 2) break;
                    gn_prev = std::min(gn_prev, gn);
                    if (!quadratic || !factorized) {
                        Eigen::SparseMatrix<double> H(n_unknowns_, n_unknowns_);
                        assemble_hessian(z, rho, eps, H);
                        ldlt.compute(H);
                        if (ldlt.info() != Eigen::Success) throw NonConvergence(rep);
                        factorized = true;
                    }
                    Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size());
                    Eigen::VectorXd dz = ldlt.solve(-gv);
                    // Armijo backtracking on the augmented objective
                    const double m0 = merit(z, pi, rho, se, div_mean);
                    const double slope = gv.dot(dz);
                    double alpha = 1.0;
                    std::vector<double> trial(z);
                    bool accepted = false;
                    for (int bt = 0; bt < cfg.max_backtrack; ++bt) {
                        for (int k = 0; k < n_unknowns_; ++k) trial[k] = z[k] + alpha * dz[k];
                        const double mt = merit(trial, pi, rho, se, div_mean);
                        if (mt <= m0 + cfg.armijo_c * alpha * slope + 1e-14 * std::abs(m0)) {
                            accepted = true;
                            break;
                        }
                        alpha *= cfg.backtrack;
                    }
                    if (!accepted) break; // stagnation at rounding level
                    z = trial;
                    ++stage_newton;
                    rep.energy_history.push_back(merit(z, pi, rho, se, div_mean));
                    rep.energy_segment.push_back(segment);
                    if (!quadratic) factorized = false;
                }
                // multiplier update and constraint check on the feasible part
                std::vector<double> div;
                double dmax = 0.0;
                cell_divergences(z, div);
                for (double& v : div) {
                    v -= div_mean;
                    dmax = std::max(dmax, std::abs(v));
                }
                rep.residual_history.push_back(dmax);
                if (dmax <= cfg.newton_tol * std::max(du_char, 1e-12)) {
                    stage_done = true;
                } else {
                    for (std::size_t c = 0; c < pi.size(); ++c) pi[c] -= rho * div[c];
                    ++segment; // new multiplier, new minimization target
                }
            }
            ++segment; // new continuation shift
            rep.newton_per_stage.push_back(stage_newton);
            if (!stage_done) throw NonConvergence(rep);
        }

        // pack the final state; report the effective multiplier pi - rho div u
        std::vector<double> div;
        cell_divergences(z, div);
        rep.mean_divergence = div_mean;
        rep.max_divergence = 0.0;
        for (double v : div) rep.max_divergence = std::max(rep.max_divergence, std::abs(v - div_mean));
        std::vector<double> pressure(pi.size());
        for (std::size_t c = 0; c < pi.size(); ++c) pressure[c] = pi[c] - rho * (div[c] - div_mean);
        double pmean = 0.0;
        for (double v : pressure) pmean += v;
        pmean /= pressure.size();
        for (double& v : pressure) v -= pmean;

        rep.state = pack_state(z, pressure);
        rep.state.eps_reg = eps_list.back();
        rep.weak_residual = weak_residual(z, pressure, rep.state.eps_reg) / stress_scale;
        rep.converged = true;
        return rep;
    }

    /// Max over the discrete test basis of the weak-form defect
    /// |<S(Du), D phi> - <pi, div phi> - <F, D phi>| (unnormalized); eps > 0
    /// evaluates the shifted stress of the regularized scheme.
    double weak_residual(const std::vector<double>& z, const std::vector<double>& pressure,
                         double eps = 0.0) const {
        std::vector<double> grad(n_unknowns_, 0.0);
        const double area = g_.h * g_.h;
        for (std::size_t ci = 0; ci < stencils_.size(); ++ci) {
            const auto& cs = stencils_[ci];
            double m[6];
            double s2 = 0.0;
            for (int k = 0; k < 6; ++k) {
                m[k] = cs.m[k].eval(z);
                s2 += detail::kFormWeights[k] * m[k] * m[k];
            }
            const double t = eps + std::sqrt(s2);
            const double mu = t > 0.0 ? phi_.deriv(t) / t : 0.0;
            for (int k = 0; k < 6; ++k) {
                const double coef = area * (mu * detail::kFormWeights[k] * m[k] - cs.fcoef[k]);
                for (const auto& tm : cs.m[k].terms) grad[tm.dof] += coef * tm.c;
            }
            const double pc = pressure[ci];
            for (const auto& tm : cs.divf.terms) grad[tm.dof] -= area * pc * tm.c;
        }
        double worst = 0.0;
        for (double v : grad) worst = std::max(worst, std::abs(v));
        return worst / (g_.h * g_.h);
    }

    double weak_residual(const SolveReport& rep) const {
        return weak_residual(unpack_state(rep.state), rep.state.pressure, rep.state.eps_reg);
    }

    /// Interior weak residual of an externally supplied full state (used for
    /// reflected solutions); skips test functions within `ring` cells of any
    /// Dirichlet edge.
    double interior_weak_residual(const DiscreteState& st, int ring, double eps = 0.0) const {
        std::vector<double> z = unpack_state(st);
        std::vector<double> grad(n_unknowns_, 0.0);
        const double area = g_.h * g_.h;
        for (std::size_t ci = 0; ci < stencils_.size(); ++ci) {
            const auto& cs = stencils_[ci];
            double m[6];
            double s2 = 0.0;
            for (int k = 0; k < 6; ++k) {
                m[k] = cs.m[k].eval(z);
                s2 += detail::kFormWeights[k] * m[k] * m[k];
            }
            const double t = eps + std::sqrt(s2);
            const double mu = t > 0.0 ? phi_.deriv(t) / t : 0.0;
            for (int k = 0; k < 6; ++k) {
                const double coef = area * (mu * detail::kFormWeights[k] * m[k] - cs.fcoef[k]);
                for (const auto& tm : cs.m[k].terms) grad[tm.dof] += coef * tm.c;
            }
            const double pc = st.pressure[ci];
            for (const auto& tm : cs.divf.terms) grad[tm.dof] -= area * pc * tm.c;
        }
        double worst = 0.0;
        for (int j = ring; j < g_.ny - ring; ++j)
            for (int i = ring; i <= g_.nx - ring; ++i) {
                const int d = dof_u1(i, j);
                if (d >= 0) worst = std::max(worst, std::abs(grad[d]));
            }
        for (int j = ring; j <= g_.ny - ring; ++j)
            for (int i = ring; i < g_.nx - ring; ++i) {
                const int d = dof_u2(i, j);
                if (d >= 0) worst = std::max(worst, std::abs(grad[d]));
            }
        return worst / (g_.h * g_.h);
    }

    /// Cell-centered symmetric gradient (transformed one in chart mode).
    SymTensorField cell_sym_gradient(const DiscreteState& st) const {
        std::vector<double> z = unpack_state(st);
        SymTensorField out(g_.cell_grid());
        for (int j = 0; j < g_.ny; ++j)
            for (int i = 0; i < g_.nx; ++i) {
                const auto& cs = stencils_[g_.cell_grid().index(i, j)];
                double m[6];
                for (int k = 0; k < 6; ++k) m[k] = cs.m[k].eval(z);
                const double off = 0.25 * (m[2] + m[3] + m[4] + m[5]);
                out.at(i, j) = {m[0], off, m[1]};
            }
        return out;
    }

    /// Cell-centered full gradient of the velocity (flat interpretation).
    Field<Mat2> cell_gradient(const DiscreteState& st) const {
        std::vector<double> z = unpack_state(st);
        Field<Mat2> out(g_.cell_grid());
        for (int j = 0; j < g_.ny; ++j)
            for (int i = 0; i < g_.nx; ++i) {
                double d1 = (u1_value(st, i + 1, j) - u1_value(st, i, j)) / g_.h;
                double d2 = (u2_value(st, i, j + 1) - u2_value(st, i, j)) / g_.h;
                double g12 = 0.0, g21 = 0.0;
                for (int b = j; b <= j + 1; ++b)
                    for (int a = i; a <= i + 1; ++a) {
                        g12 += node_g12(st, a, b);
                        g21 += node_g21(st, a, b);
                    }
                out.at(i, j) = {d1, 0.25 * g12, 0.25 * g21, d2};
            }
        return out;
    }

    /// Direct monolithic KKT solve of the quadratic (p = 2) problem with the
    /// zero-mean pressure gauge. The reference for the iterative path.
    std::pair<std::vector<double>, std::vector<double>> direct_linear_solve() const {
        if (!(phi_.model() == PotentialModel::PowerLaw && std::abs(phi_.exponent() - 2.0) < 1e-14))
            throw std::logic_error("direct_linear_solve: quadratic potential only");
        const int nu = n_unknowns_, np = g_.nx * g_.ny;
        const double area = g_.h * g_.h;
        const double mu0 = phi_.viscosity_scale();
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu + np + 1);

        for (std::size_t ci = 0; ci < stencils_.size(); ++ci) {
            const auto& cs = stencils_[ci];
            for (int k = 0; k < 6; ++k) {
                const double w = area * mu0 * detail::kFormWeights[k];
                for (const auto& ta : cs.m[k].terms) {
                    for (const auto& tb : cs.m[k].terms)
                        trip.emplace_back(ta.dof, tb.dof, w * ta.c * tb.c);
                    rhs[ta.dof] -= w * ta.c * cs.m[k].c0;
                    rhs[ta.dof] += area * cs.fcoef[k] * ta.c;
                }
            }
            for (const auto& t : cs.divf.terms) {
                trip.emplace_back(t.dof, nu + static_cast<int>(ci), -area * t.c);
                trip.emplace_back(nu + static_cast<int>(ci), t.dof, area * t.c);
            }
            rhs[nu + static_cast<int>(ci)] = -area * cs.divf.c0;
            trip.emplace_back(nu + static_cast<int>(ci), nu + np, area);
            trip.emplace_back(nu + np, nu + static_cast<int>(ci), area);
        }

        Eigen::SparseMatrix<double> K(nu + np + 1, nu + np + 1);
        K.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(K);
        if (lu.info() != Eigen::Success) throw std::runtime_error("direct_linear_solve: singular KKT");
        Eigen::VectorXd sol = lu.solve(rhs);
        std::vector<double> z(nu), pi(np);
        for (int k = 0; k < nu; ++k) z[k] = sol[k];
        double pmean = 0.0;
        for (int c = 0; c < np; ++c) pmean += sol[nu + c];
        pmean /= np;
        for (int c = 0; c < np; ++c) pi[c] = sol[nu + c] - pmean;
        return {z, pi};
    }

    DiscreteState pack_state(const std::vector<double>& z, std::vector<double> pressure) const {
        DiscreteState st;
        st.u1.assign(static_cast<std::size_t>(g_.nx + 1) * g_.ny, 0.0);
        st.u2.assign(static_cast<std::size_t>(g_.nx) * (g_.ny + 1), 0.0);
        for (int j = 0; j < g_.ny; ++j)
            for (int i = 0; i <= g_.nx; ++i) {
                const int d = dof_u1(i, j);
                st.u1[idx_u1(i, j)] = d >= 0 ? z[d] : fixed_u1(i, j);
            }
        for (int j = 0; j <= g_.ny; ++j)
            for (int i = 0; i < g_.nx; ++i) {
                const int d = dof_u2(i, j);
                st.u2[idx_u2(i, j)] = d >= 0 ? z[d] : fixed_u2(i, j);
            }
        st.pressure = std::move(pressure);
        return st;
    }

    std::vector<double> unpack_state(const DiscreteState& st) const {
        std::vector<double> z(n_unknowns_, 0.0);
        for (int j = 0; j < g_.ny; ++j)
            for (int i = 0; i <= g_.nx; ++i) {
                const int d = dof_u1(i, j);
                if (d >= 0) z[d] = st.u1[idx_u1(i, j)];
            }
        for (int j = 0; j <= g_.ny; ++j)
            for (int i = 0; i < g_.nx; ++i) {
                const int d = dof_u2(i, j);
                if (d >= 0) z[d] = st.u2[idx_u2(i, j)];
            }
        return z;
    }

    std::size_t idx_u1(int i, int j) const { return static_cast<std::size_t>(j) * (g_.nx + 1) + i; }
    std::size_t idx_u2(int i, int j) const { return static_cast<std::size_t>(j) * g_.nx + i; }

    double max_cell_divergence(const DiscreteState& st) const {
        std::vector<double> z = unpack_state(st);
        std::vector<double> div;
        return cell_divergences(z, div);
    }

private:
    // ---- DOF layout ----
    void build_dof_maps() {
        dof1_.assign(static_cast<std::size_t>(g_.nx + 1) * g_.ny, -1);
        dof2_.assign(static_cast<std::size_t>(g_.nx) * (g_.ny + 1), -1);
        int next = 0;
        for (int j = 0; j < g_.ny; ++j)
            for (int i = 1; i <= g_.nx - 1; ++i) dof1_[idx_u1(i, j)] = next++;
        for (int j = 1; j <= g_.ny - 1; ++j)
            for (int i = 0; i < g_.nx; ++i) dof2_[idx_u2(i, j)] = next++;
        n_unknowns_ = next;
    }

    int dof_u1(int i, int j) const { return dof1_[idx_u1(i, j)]; }
    int dof_u2(int i, int j) const { return dof2_[idx_u2(i, j)]; }

    double fixed_u1(int i, int j) const { return dirichlet_(g_.u1_pos(i, j)).x; }
    double fixed_u2(int i, int j) const {
        if (j == 0 && g_.bottom == EdgeBC::PerfectSlip) return 0.0;
        return dirichlet_(g_.u2_pos(i, j)).y;
    }

    double u1_value(const DiscreteState& st, int i, int j) const { return st.u1[idx_u1(i, j)]; }
    double u2_value(const DiscreteState& st, int i, int j) const { return st.u2[idx_u2(i, j)]; }

    // nodal derivative values from a packed state (for reporting fields)
    double node_g12(const DiscreteState& st, int a, int b) const {
        if (b == 0) {
            if (g_.bottom == EdgeBC::PerfectSlip) return 0.0;
            return 2.0 * (u1_value(st, a, 0) - dirichlet_(g_.node_pos(a, 0)).x) / g_.h;
        }
        if (b == g_.ny)
            return 2.0 * (dirichlet_(g_.node_pos(a, b)).x - u1_value(st, a, b - 1)) / g_.h;
        return (u1_value(st, a, b) - u1_value(st, a, b - 1)) / g_.h;
    }
    double node_g21(const DiscreteState& st, int a, int b) const {
        if (a == 0) return 2.0 * (u2_value(st, 0, b) - dirichlet_(g_.node_pos(0, b)).y) / g_.h;
        if (a == g_.nx)
            return 2.0 * (dirichlet_(g_.node_pos(a, b)).y - u2_value(st, a - 1, b)) / g_.h;
        return (u2_value(st, a, b) - u2_value(st, a - 1, b)) / g_.h;
    }

    // ---- linear forms of the discrete derivative quantities ----
    void add_u1(detail::LinForm& f, int i, int j, double c) const {
        f.add(dof_u1(i, j), c, dof_u1(i, j) >= 0 ? 0.0 : fixed_u1(i, j));
    }
    void add_u2(detail::LinForm& f, int i, int j, double c) const {
        f.add(dof_u2(i, j), c, dof_u2(i, j) >= 0 ? 0.0 : fixed_u2(i, j));
    }

    detail::LinForm d1_form(int i, int j) const {
        detail::LinForm f;
        add_u1(f, i + 1, j, 1.0 / g_.h);
        add_u1(f, i, j, -1.0 / g_.h);
        return f;
    }
    detail::LinForm d2_form(int i, int j) const {
        detail::LinForm f;
        add_u2(f, i, j + 1, 1.0 / g_.h);
        add_u2(f, i, j, -1.0 / g_.h);
        return f;
    }
    detail::LinForm g12_form(int a, int b) const {
        detail::LinForm f;
        if (b == 0) {
            if (g_.bottom == EdgeBC::PerfectSlip) return f; // ghost even reflection
            add_u1(f, a, 0, 2.0 / g_.h);
            f.c0 -= 2.0 * dirichlet_(g_.node_pos(a, 0)).x / g_.h;
        } else if (b == g_.ny) {
            add_u1(f, a, b - 1, -2.0 / g_.h);
            f.c0 += 2.0 * dirichlet_(g_.node_pos(a, b)).x / g_.h;
        } else {
            add_u1(f, a, b, 1.0 / g_.h);
            add_u1(f, a, b - 1, -1.0 / g_.h);
        }
        return f;
    }
    detail::LinForm g21_form(int a, int b) const {
        detail::LinForm f;
        if (a == 0) {
            add_u2(f, 0, b, 2.0 / g_.h);
            f.c0 -= 2.0 * dirichlet_(g_.node_pos(0, b)).y / g_.h;
        } else if (a == g_.nx) {
            add_u2(f, a - 1, b, -2.0 / g_.h);
            f.c0 += 2.0 * dirichlet_(g_.node_pos(a, b)).y / g_.h;
        } else {
            add_u2(f, a, b, 1.0 / g_.h);
            add_u2(f, a - 1, b, -1.0 / g_.h);
        }
        return f;
    }
    detail::LinForm v1_form(int a, int b) const {
        detail::LinForm f;
        if (b == 0) {
            if (g_.bottom == EdgeBC::PerfectSlip) {
                add_u1(f, a, 0, 1.0);
            } else {
                f.c0 = dirichlet_(g_.node_pos(a, 0)).x;
            }
        } else if (b == g_.ny) {
            f.c0 = dirichlet_(g_.node_pos(a, b)).x;
        } else {
            add_u1(f, a, b - 1, 0.5);
            add_u1(f, a, b, 0.5);
        }
        return f;
    }
    detail::LinForm g11_node_form(int a, int b) const {
        detail::LinForm f;
        int n = 0;
        for (int cj = b - 1; cj <= b; ++cj)
            for (int ci = a - 1; ci <= a; ++ci)
                if (ci >= 0 && ci < g_.nx && cj >= 0 && cj < g_.ny) ++n;
        for (int cj = b - 1; cj <= b; ++cj)
            for (int ci = a - 1; ci <= a; ++ci)
                if (ci >= 0 && ci < g_.nx && cj >= 0 && cj < g_.ny)
                    f.axpy(d1_form(ci, cj), 1.0 / n);
        return f;
    }
    detail::LinForm g22_node_form(int a, int b) const {
        detail::LinForm f;
        int n = 0;
        for (int cj = b - 1; cj <= b; ++cj)
            for (int ci = a - 1; ci <= a; ++ci)
                if (ci >= 0 && ci < g_.nx && cj >= 0 && cj < g_.ny) ++n;
        for (int cj = b - 1; cj <= b; ++cj)
            for (int ci = a - 1; ci <= a; ++ci)
                if (ci >= 0 && ci < g_.nx && cj >= 0 && cj < g_.ny)
                    f.axpy(d2_form(ci, cj), 1.0 / n);
        return f;
    }

    double chart_dh(double x1) const { return chart_ ? chart_->graph().dh(x1) : 0.0; }
    double chart_ddh(double x1) const { return chart_ ? chart_->graph().ddh(x1) : 0.0; }

    Vec2 physical_point(Vec2 x) const {
        if (!chart_) return x;
        return {x.x, x.y + chart_->graph().h(x.x)};
    }

    void build_stencils() {
        const Grid2 cg = g_.cell_grid();
        stencils_.resize(cg.size());
        data_fmax_ = 0.0;
        for (int j = 0; j < g_.ny; ++j)
            for (int i = 0; i < g_.nx; ++i) {
                detail::CellStencil cs;
                const Vec2 xc = g_.cell_center(i, j);
                const double hp_c = chart_dh(xc.x);

                // averaged nodal g12 used by the diagonal transform terms
                detail::LinForm g12c;
                for (int b = j; b <= j + 1; ++b)
                    for (int a = i; a <= i + 1; ++a) g12c.axpy(g12_form(a, b), 0.25);

                cs.m[0] = d1_form(i, j);
                if (hp_c != 0.0) cs.m[0].axpy(g12c, -hp_c);
                cs.m[1] = d2_form(i, j);
                if (hp_c != 0.0) cs.m[1].axpy(g12c, hp_c);

                int k = 2;
                for (int b = j; b <= j + 1; ++b)
                    for (int a = i; a <= i + 1; ++a, ++k) {
                        const double xa = g_.node_pos(a, b).x;
                        const double hp = chart_dh(xa), hpp = chart_ddh(xa);
                        detail::LinForm f;
                        f.axpy(g12_form(a, b), 0.5 * (1.0 - hp * hp));
                        f.axpy(g21_form(a, b), 0.5);
                        if (hp != 0.0) {
                            f.axpy(g11_node_form(a, b), 0.5 * hp);
                            f.axpy(g22_node_form(a, b), -0.5 * hp);
                        }
                        if (hpp != 0.0) f.axpy(v1_form(a, b), 0.5 * hpp);
                        cs.m[k] = f;
                    }

                cs.divf = d1_form(i, j);
                cs.divf.axpy(d2_form(i, j), 1.0);

                const SymMat2 Fc = forcing_(physical_point(xc));
                cs.fcoef[0] = Fc.a11;
                cs.fcoef[1] = Fc.a22;
                k = 2;
                for (int b = j; b <= j + 1; ++b)
                    for (int a = i; a <= i + 1; ++a, ++k)
                        cs.fcoef[k] = 0.5 * forcing_(physical_point(g_.node_pos(a, b))).a12;
                data_fmax_ = std::max(data_fmax_, Fc.norm());

                stencils_[cg.index(i, j)] = std::move(cs);
            }
    }

    void check_slip_data() const {
        if (g_.bottom != EdgeBC::PerfectSlip) return;
        double fmax = 0.0;
        for (int a = 0; a <= g_.nx; ++a)
            fmax = std::max(fmax, std::abs(forcing_(physical_point(g_.node_pos(a, 0))).a12));
        if (fmax > 1e-9 * std::max(1.0, data_fmax_))
            throw IllPosedData("solve: forcing has nonzero tangential traction on the slip edge");
    }

    double characteristic_gradient() const {
        double gmax = 0.0;
        for (int k = 0; k <= 64; ++k) {
            const double t = static_cast<double>(k) / 64.0;
            const Vec2 a = dirichlet_({g_.x0 + t * g_.nx * g_.h, g_.y0 + g_.ny * g_.h});
            const Vec2 b = dirichlet_({g_.x0, g_.y0 + t * g_.ny * g_.h});
            const Vec2 c = dirichlet_({g_.x0 + g_.nx * g_.h, g_.y0 + t * g_.ny * g_.h});
            gmax = std::max({gmax, a.norm(), b.norm(), c.norm()});
        }
        const double L = std::min(g_.nx, g_.ny) * g_.h;
        double du = gmax / (0.25 * L);
        if (data_fmax_ > 0.0) du = std::max(du, phi_.deriv_inverse(data_fmax_));
        return std::max(du, 1e-8);
    }

    /// Mean cell divergence; depends only on the boundary data (interior
    /// faces telescope away), hence constant throughout the solve.
    double divergence_mean() const {
        std::vector<double> z(n_unknowns_, 0.0), div;
        cell_divergences(z, div);
        double acc = 0.0;
        for (double v : div) acc += v;
        return acc / div.size();
    }

    // gradient of the augmented objective; returns the max-norm
    double assemble_gradient(const std::vector<double>& z, const std::vector<double>& pi,
                             double rho, double eps, std::vector<double>& grad,
                             double div_mean) const {
        grad.assign(n_unknowns_, 0.0);
        const double area = g_.h * g_.h;
        for (std::size_t ci = 0; ci < stencils_.size(); ++ci) {
            const auto& cs = stencils_[ci];
            double m[6];
            double s2 = 0.0;
            for (int k = 0; k < 6; ++k) {
                m[k] = cs.m[k].eval(z);
                s2 += detail::kFormWeights[k] * m[k] * m[k];
            }
            const double s = std::sqrt(s2);
            const double t = eps + s;
            const double mu = t > 0.0 ? phi_.deriv(t) / t : 0.0;
            const double dv = cs.divf.eval(z) - div_mean;
            for (int k = 0; k < 6; ++k) {
                const double coef = area * (mu * detail::kFormWeights[k] * m[k] - cs.fcoef[k]);
                for (const auto& tm : cs.m[k].terms) grad[tm.dof] += coef * tm.c;
            }
            const double pcoef = area * (rho * dv - pi[ci]);
            for (const auto& tm : cs.divf.terms) grad[tm.dof] += pcoef * tm.c;
        }
        double gn = 0.0;
        for (double v : grad) gn = std::max(gn, std::abs(v));
        return gn;
    }

    double merit(const std::vector<double>& z, const std::vector<double>& pi, double rho,
                 const ShiftedNFunction& se, double div_mean) const {
        double acc = energy_with(z, se);
        const double area = g_.h * g_.h;
        for (std::size_t ci = 0; ci < stencils_.size(); ++ci) {
            const double dv = stencils_[ci].divf.eval(z) - div_mean;
            acc += area * (0.5 * rho * dv * dv - pi[ci] * dv);
        }
        return acc;
    }

    void assemble_hessian(const std::vector<double>& z, double rho, double eps,
                          Eigen::SparseMatrix<double>& H) const {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(stencils_.size() * 260);
        const double area = g_.h * g_.h;
        for (const auto& cs : stencils_) {
            double m[6];
            double s2 = 0.0;
            for (int k = 0; k < 6; ++k) {
                m[k] = cs.m[k].eval(z);
                s2 += detail::kFormWeights[k] * m[k] * m[k];
            }
            const double s = std::sqrt(s2);
            const double t = eps + s;
            const double mu = t > 0.0 ? phi_.deriv(t) / t : phi_.second_deriv(0.0);
            const double dmu = t > 0.0 ? (phi_.second_deriv(t) * t - phi_.deriv(t)) / (t * t) : 0.0;

            // diagonal part mu * w_k L_k^T L_k
            for (int k = 0; k < 6; ++k) {
                const double w = area * mu * detail::kFormWeights[k];
                for (const auto& ta : cs.m[k].terms)
                    for (const auto& tb : cs.m[k].terms)
                        trip.emplace_back(ta.dof, tb.dof, w * ta.c * tb.c);
            }
            // rank-one curvature part (dmu/s) (w o m . L)^T (w o m . L)
            if (s > 1e-30 && dmu != 0.0) {
                std::map<int, double> combo;
                for (int k = 0; k < 6; ++k) {
                    const double c = detail::kFormWeights[k] * m[k];
                    for (const auto& tm : cs.m[k].terms) combo[tm.dof] += c * tm.c;
                }
                const double w = area * dmu / s;
                for (const auto& [da, ca] : combo)
                    for (const auto& [db, cb] : combo) trip.emplace_back(da, db, w * ca * cb);
            }
            // augmentation rho * div^T div
            for (const auto& ta : cs.divf.terms)
                for (const auto& tb : cs.divf.terms)
                    trip.emplace_back(ta.dof, tb.dof, area * rho * ta.c * tb.c);
        }
        H.setFromTriplets(trip.begin(), trip.end());
    }

    double cell_divergences(const std::vector<double>& z, std::vector<double>& div) const {
        div.resize(stencils_.size());
        double worst = 0.0;
        for (std::size_t ci = 0; ci < stencils_.size(); ++ci) {
            div[ci] = stencils_[ci].divf.eval(z);
            worst = std::max(worst, std::abs(div[ci]));
        }
        return worst;
    }

    StaggeredGrid g_;
    NFunction phi_;
    std::function<SymMat2(Vec2)> forcing_;
    std::function<Vec2(Vec2)> dirichlet_;
    std::shared_ptr<GraphDomain> chart_;
    std::vector<detail::CellStencil> stencils_;
    std::vector<int> dof1_, dof2_;
    int n_unknowns_ = 0;
    double data_fmax_ = 0.0;
};

/// Natural-metric distance: sum over cells of |V(A) - V(B)|^2 times area.
inline double v_distance(const NFunction& phi, const SymTensorField& a, const SymTensorField& b) {
    if (a.grid.nx != b.grid.nx || a.grid.ny != b.grid.ny)
        throw std::invalid_argument("v_distance: grids do not match");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.data.size(); ++k) {
        const SymMat2 d = v_map(phi, a.data[k]) - v_map(phi, b.data[k]);
        acc += d.ddot(d);
    }
    return acc * a.grid.cell_area();
}

/// Discrete constant of the full-gradient-by-symmetric-gradient inequality on
/// a slip half-cube (quadratic case): largest Rayleigh quotient
/// <grad f, grad f> / <Df, Df> over fields with f2 = 0 on the bottom and
/// mean f1 = 0, by inverse-power iteration on the generalized eigenproblem.
inline double korn_constant(const StaggeredGrid& grid, double tol = 1e-9, int max_iter = 2000) {
    // unknowns: all u1 faces, u2 faces except bottom row (pinned by slip)
    const int nx = grid.nx, ny = grid.ny;
    auto idx1 = [nx](int i, int j) { return j * (nx + 1) + i; };
    auto idx2 = [nx](int i, int j) { return j * nx + i; };
    const int n1 = (nx + 1) * ny;
    std::vector<int> dof2((std::size_t)nx * (ny + 1), -1);
    int next = n1;
    for (int j = 1; j <= ny; ++j)
        for (int i = 0; i < nx; ++i) dof2[idx2(i, j)] = next++;
    const int n = next;

    std::vector<Eigen::Triplet<double>> tg, td;
    auto addq = [](std::vector<Eigen::Triplet<double>>& t,
                   const std::vector<std::pair<int, double>>& form, double w) {
        for (const auto& [da, ca] : form)
            for (const auto& [db, cb] : form)
                if (da >= 0 && db >= 0) t.emplace_back(da, db, w * ca * cb);
    };

    const double h = grid.h, area = h * h;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            std::vector<std::pair<int, double>> d1{{idx1(i + 1, j), 1.0 / h}, {idx1(i, j), -1.0 / h}};
            std::vector<std::pair<int, double>> d2{{dof2[idx2(i, j + 1)], 1.0 / h},
                                                   {dof2[idx2(i, j)], -1.0 / h}};
            addq(tg, d1, area);
            addq(tg, d2, area);
            addq(td, d1, area);
            addq(td, d2, area);
        }
    // interior nodes only: both cross derivatives well defined without BC
    for (int b = 1; b < ny; ++b)
        for (int a = 1; a < nx; ++a) {
            std::vector<std::pair<int, double>> g12{{idx1(a, b), 1.0 / h}, {idx1(a, b - 1), -1.0 / h}};
            std::vector<std::pair<int, double>> g21{{dof2[idx2(a, b)], 1.0 / h},
                                                    {dof2[idx2(a - 1, b)], -1.0 / h}};
            addq(tg, g12, area);
            addq(tg, g21, area);
            std::vector<std::pair<int, double>> sym;
            sym.insert(sym.end(), g12.begin(), g12.end());
            for (auto [d, c] : g21) sym.emplace_back(d, c);
            addq(td, sym, 0.5 * area); // 2 * ((g12+g21)/2)^2
        }

    Eigen::SparseMatrix<double> G(n, n), D(n, n);
    G.setFromTriplets(tg.begin(), tg.end());
    D.setFromTriplets(td.begin(), td.end());

    // bordered system pins the mean-f1 direction (the kernel of D on the
    // admissible space); pure rotations are excluded by the pinned bottom row
    std::vector<Eigen::Triplet<double>> tb(td);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            tb.emplace_back(idx1(i, j), n, 1.0);
            tb.emplace_back(n, idx1(i, j), 1.0);
        }
    Eigen::SparseMatrix<double> Db(n + 1, n + 1);
    Db.setFromTriplets(tb.begin(), tb.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(Db);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("korn_constant: factorization failed");

    Eigen::VectorXd f = Eigen::VectorXd::Random(n);
    auto project = [&](Eigen::VectorXd& v) {
        double meanf1 = 0.0;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i <= nx; ++i) meanf1 += v[idx1(i, j)];
        meanf1 /= ny * (nx + 1);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i <= nx; ++i) v[idx1(i, j)] -= meanf1;
    };
    project(f);
    f.normalize();
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
        rhs.head(n) = G * f;
        Eigen::VectorXd y = lu.solve(rhs).head(n);
        project(y);
        const double ny_ = y.norm();
        if (ny_ == 0.0) throw std::runtime_error("korn_constant: iteration collapsed");
        y /= ny_;
        const double num = y.dot(G * y), den = y.dot(D * y);
        const double next_lambda = num / den;
        const bool done = std::abs(next_lambda - lambda) <= tol * std::max(1.0, next_lambda);
        lambda = next_lambda;
        f = y;
        if (done && it > 3) return lambda;
    }
    throw std::runtime_error("korn_constant: inverse power iteration did not converge");
}

/// Recovers the pressure from the converged velocity through the Neumann
/// Poisson identity <pi, lap psi> = <F - S(Du), hess psi>, gauge-fixed to
/// zero mean.
inline ScalarField pressure_from_poisson(const StokesSolver& solver, const NFunction& phi,
                                         const std::function<SymMat2(Vec2)>& forcing,
                                         const DiscreteState& st) {
    const StaggeredGrid& g = solver.grid();
    const int nx = g.nx, ny = g.ny;
    const int np = nx * ny;
    const Grid2 cg = g.cell_grid();

    const SymTensorField Du = solver.cell_sym_gradient(st);

    // G = S(Du) - F at cell centers: pairing the weak form with gradient test
    // fields grad(psi) (normal derivative zero, hence slip-admissible) gives
    // <pi, lap psi> = <S(Du) - F, hess psi>
    std::vector<SymMat2> G(np);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            G[cg.index(i, j)] = stress(phi, Du.at(i, j)) - forcing(g.cell_center(i, j));

    // rhs b(psi) = <G, hess psi> assembled through transposed second-difference
    // stencils with homogeneous Neumann ghosts
    Eigen::VectorXd b = Eigen::VectorXd::Zero(np);
    auto idx = [&](int i, int j) { return cg.index(i, j); };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            // d_xx: psi(i-1) - 2 psi(i) + psi(i+1), ghosts mirror
            const double gxx = G[idx(i, j)].a11, gyy = G[idx(i, j)].a22;
            if (i > 0) b[idx(i - 1, j)] += gxx;
            else b[idx(i, j)] += gxx;
            b[idx(i, j)] -= 2.0 * gxx;
            if (i + 1 < nx) b[idx(i + 1, j)] += gxx;
            else b[idx(i, j)] += gxx;
            if (j > 0) b[idx(i, j - 1)] += gyy;
            else b[idx(i, j)] += gyy;
            b[idx(i, j)] -= 2.0 * gyy;
            if (j + 1 < ny) b[idx(i, j + 1)] += gyy;
            else b[idx(i, j)] += gyy;
        }
    // cross term on interior nodes: psi stencil (+ - ; - +) / h^2 against G12
    // averaged to the node
    for (int b2 = 1; b2 < ny; ++b2)
        for (int a = 1; a < nx; ++a) {
            const double g12 = 0.25 * (G[idx(a - 1, b2 - 1)].a12 + G[idx(a, b2 - 1)].a12 +
                                       G[idx(a - 1, b2)].a12 + G[idx(a, b2)].a12);
            const double w = 2.0 * g12;
            b[idx(a, b2)] += w;
            b[idx(a - 1, b2)] -= w;
            b[idx(a, b2 - 1)] -= w;
            b[idx(a - 1, b2 - 1)] += w;
        }

    // Neumann 5-point Laplacian; the common h^-2 scaling cancels between the
    // two sides, so the stencils carry unit weights
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            double diag = 0.0;
            auto link = [&](int ii, int jj) {
                if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) return;
                trip.emplace_back(idx(i, j), idx(ii, jj), 1.0);
                diag -= 1.0;
            };
            link(i - 1, j);
            link(i + 1, j);
            link(i, j - 1);
            link(i, j + 1);
            trip.emplace_back(idx(i, j), idx(i, j), diag);
        }
    // zero-mean gauge through a bordered multiplier (all-Neumann system is
    // singular along constants)
    for (int c = 0; c < np; ++c) {
        trip.emplace_back(c, np, 1.0);
        trip.emplace_back(np, c, 1.0);
    }
    Eigen::SparseMatrix<double> L(np + 1, np + 1);
    L.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(np + 1);
    const double bmean = b.mean();
    for (int k = 0; k < np; ++k) rhs[k] = b[k] - bmean;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(L);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("pressure_from_poisson: factorization failed");
    Eigen::VectorXd p = lu.solve(rhs).head(np);
    const double pmean = p.mean();

    ScalarField out(cg);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) out.at(i, j) = p[idx(i, j)] - pmean;
    return out;
}

} // namespace slipstokes
