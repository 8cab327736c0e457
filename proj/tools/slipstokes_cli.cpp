// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: property suites, solves and experiments, driven by
// JSON configs, emitting CSV tables and JSON summaries plus a run manifest.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "slipstokes/experiments.hpp"
#include "slipstokes/grid_field.hpp"
#include "slipstokes/oscillation.hpp"
#include "slipstokes/orlicz.hpp"
#include "slipstokes/solver.hpp"

using json = nlohmann::json;
using namespace slipstokes;

namespace {

constexpr const char* kVersion = "slipstokes 0.1.0";

struct RunContext {
    std::filesystem::path out_dir;
    std::uint64_t seed = 1;
    int verbosity = 0;
    int jobs = 1;
    json config; // canonical config of the command
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::filesystem::path resolve_out(const std::string& cli_out) {
    const char* env = std::getenv("SLIPSTOKES_OUT");
    std::filesystem::path root = env ? env : ".";
    return cli_out.empty() ? root : root / cli_out;
}

void write_manifest(const RunContext& ctx, const std::string& command, bool pass) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.t0).count();
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["config_hash"] = fnv1a(ctx.config.dump());
    m["seed"] = ctx.seed;
    m["wall_time_s"] = wall;
    m["pass"] = pass;
    std::ofstream(ctx.out_dir / (command + "_manifest.json")) << m.dump(2) << '\n';
}

void write_summary(const RunContext& ctx, const std::string& command, const json& body) {
    std::ofstream(ctx.out_dir / (command + "_summary.json")) << body.dump(2) << '\n';
}

std::ofstream open_csv(const RunContext& ctx, const std::string& name) {
    std::ofstream out(ctx.out_dir / name);
    out.precision(17);
    return out;
}

// index-ordered parallel map keeps outputs byte-identical regardless of jobs
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(jobs, n); ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

NFunction model_from_json(const json& j) {
    const std::string type = j.value("type", "power");
    const double p = j.value("p", 2.0);
    const double mu0 = j.value("mu0", 1.0);
    if (type == "power") return make_power(p, mu0);
    if (type == "carreau") return make_carreau(p, mu0);
    if (type == "table") return make_custom_file(j.at("file").get<std::string>());
    throw std::invalid_argument("model.type must be power|carreau|table");
}

std::function<Vec2(Vec2)> dirichlet_from_json(const json& j) {
    const std::string name = j.value("builtin", "zero");
    if (name == "zero") return [](Vec2) { return Vec2{}; };
    if (name == "linear") return [](Vec2 p) { return Vec2{-p.x, p.y}; };
    if (name == "cubic")
        return [](Vec2 p) { return Vec2{-3 * p.x * p.x + 3 * p.y * p.y, 6 * p.x * p.y}; };
    if (name == "trig")
        return [](Vec2 p) {
            return Vec2{-2.0 * std::sin(2.0 * p.x) * std::cosh(2.0 * p.y),
                        2.0 * std::cos(2.0 * p.x) * std::sinh(2.0 * p.y)};
        };
    throw std::invalid_argument("dirichlet.builtin must be zero|linear|cubic|trig");
}

std::function<SymMat2(Vec2)> forcing_from_json(const json& j, const NFunction& phi) {
    if (j.contains("file")) {
        auto field = read_csv<SymMat2>(j.at("file").get<std::string>());
        return [field](Vec2 p) {
            const Grid2& g = field.grid;
            int i = static_cast<int>((p.x - g.x0) / g.hx);
            int jj = static_cast<int>((p.y - g.y0) / g.hy);
            i = std::clamp(i, 0, g.nx - 1);
            jj = std::clamp(jj, 0, g.ny - 1);
            return field.at(i, jj);
        };
    }
    if (j.contains("manufactured")) {
        const std::string name = j.at("manufactured").get<std::string>();
        if (name == "cubic") {
            return [phi](Vec2 p) {
                return stress(phi, SymMat2{-6.0 * p.x, 6.0 * p.y, 6.0 * p.x});
            };
        }
        if (name == "trig") {
            return [phi](Vec2 p) {
                const double c = 4.0;
                return stress(phi, SymMat2{-c * std::cos(2 * p.x) * std::cosh(2 * p.y),
                                           -c * std::sin(2 * p.x) * std::sinh(2 * p.y),
                                           c * std::cos(2 * p.x) * std::cosh(2 * p.y)});
            };
        }
        throw std::invalid_argument("F.manufactured must be cubic|trig");
    }
    return forcing_family(j.value("builtin", 0), j.value("scale", 1.0));
}

int run_solve(RunContext& ctx) {
    const json& cfg = ctx.config;
    const NFunction phi = model_from_json(cfg.value("model", json::object()));
    const json gj = cfg.value("grid", json::object());
    const int n = gj.value("n", 32);
    const json bcj = cfg.value("bc", json::object());
    const EdgeBC bottom =
        bcj.value("bottom", "slip") == std::string("slip") ? EdgeBC::PerfectSlip : EdgeBC::Dirichlet;

    const json dj = cfg.value("domain", json::object());
    std::unique_ptr<GraphDomain> chart;
    if (dj.value("type", "flat") == std::string("graph")) {
        const double R = dj.value("R", 1.0);
        chart = std::make_unique<GraphDomain>(
            BoundaryGraph::from_table_file(dj.at("table").get<std::string>(), R));
    }

    StaggeredGrid grid = StaggeredGrid::half_cube(n, dj.value("R", 1.0), bottom);
    auto dirichlet = dirichlet_from_json(cfg.value("dirichlet", json::object()));
    auto forcing = forcing_from_json(cfg.value("F", json::object()), phi);

    SolverConfig scfg;
    const json sj = cfg.value("solver", json::object());
    scfg.newton_tol = sj.value("tol", scfg.newton_tol);
    scfg.max_newton = sj.value("max_newton", scfg.max_newton);
    scfg.rho_al = sj.value("rho_al", scfg.rho_al);
    scfg.verbose = ctx.verbosity;

    StokesSolver solver(grid, phi, forcing, dirichlet, chart.get());
    auto rep = solver.solve(scfg);

    // artifacts: cell fields in the shared CSV grid format
    VectorField vel(grid.cell_grid());
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i)
            vel.at(i, j) = {0.5 * (rep.state.u1[solver.idx_u1(i, j)] +
                                   rep.state.u1[solver.idx_u1(i + 1, j)]),
                            0.5 * (rep.state.u2[solver.idx_u2(i, j)] +
                                   rep.state.u2[solver.idx_u2(i, j + 1)])};
    write_csv(vel, (ctx.out_dir / "solve_velocity.csv").string());
    write_csv(solver.cell_sym_gradient(rep.state), (ctx.out_dir / "solve_sym_gradient.csv").string());
    SymTensorField S(grid.cell_grid());
    auto Du = solver.cell_sym_gradient(rep.state);
    for (std::size_t k = 0; k < S.data.size(); ++k)
        S.data[k] = stress_shifted(phi, rep.state.eps_reg, Du.data[k]);
    write_csv(S, (ctx.out_dir / "solve_stress.csv").string());
    ScalarField pf(grid.cell_grid());
    for (std::size_t k = 0; k < pf.data.size(); ++k) pf.data[k] = rep.state.pressure[k];
    write_csv(pf, (ctx.out_dir / "solve_pressure.csv").string());

    auto hist = open_csv(ctx, "solve_history.csv");
    hist << "iteration,divergence\n";
    for (std::size_t k = 0; k < rep.residual_history.size(); ++k)
        hist << k << ',' << rep.residual_history[k] << '\n';

    json sum;
    sum["converged"] = rep.converged;
    sum["weak_residual"] = rep.weak_residual;
    sum["max_divergence"] = rep.max_divergence;
    sum["mean_divergence"] = rep.mean_divergence;
    sum["stages"] = rep.stage_eps.size();
    sum["eps_floor"] = rep.state.eps_reg;
    sum["seed"] = ctx.seed;
    write_summary(ctx, "solve", sum);
    write_manifest(ctx, "solve", rep.converged);
    return rep.converged ? 0 : 1;
}

int run_corner(RunContext& ctx) {
    const json& cfg = ctx.config;
    const double beta = cfg.at("beta").get<double>();
    std::vector<double> qs = cfg.value("q", std::vector<double>{2.0, 3.0, 4.0});
    const int levels = cfg.value("levels", 11);
    const double threshold = lq_threshold(beta);

    auto csv = open_csv(ctx, "corner_lq.csv");
    csv << "q,r_min,value,threshold\n";
    json sum;
    sum["beta"] = beta;
    sum["threshold"] = std::isinf(threshold) ? -1.0 : threshold;
    sum["seed"] = ctx.seed;
    bool all_pass = true;

    std::vector<std::vector<double>> values(qs.size());
    parallel_for(static_cast<int>(qs.size()), ctx.jobs, [&](int qi) {
        std::vector<double> vals;
        for (int k = 2; k <= levels; ++k)
            vals.push_back(lq_norm_corner(beta, qs[qi], std::pow(2.0, -k)));
        values[qi] = std::move(vals);
    });

    for (std::size_t qi = 0; qi < qs.size(); ++qi) {
        const double q = qs[qi];
        const auto& vals = values[qi];
        for (int k = 2; k <= levels; ++k)
            csv << q << ',' << std::pow(2.0, -k) << ',' << vals[k - 2] << ','
                << (std::isinf(threshold) ? -1.0 : threshold) << '\n';
        // classification by the difference ladder
        bool cauchy = true;
        for (std::size_t i = 2; i < vals.size(); ++i)
            if (std::abs(vals[i] - vals[i - 1]) >= std::abs(vals[i - 1] - vals[i - 2]))
                cauchy = false;
        const bool expect_cauchy = q < threshold;
        json row;
        row["q"] = q;
        row["cauchy"] = cauchy;
        row["expected_cauchy"] = expect_cauchy;
        bool ok = cauchy == expect_cauchy;
        if (!expect_cauchy) {
            std::vector<double> rm, df;
            for (std::size_t i = 1; i < vals.size(); ++i) {
                rm.push_back(std::pow(2.0, -(double)(i + 2)));
                df.push_back(vals[i] - vals[i - 1]);
            }
            const double slope = fit_exponent(rm, df).exponent;
            const double expect = q * M_PI / beta - 2.0 * q + 2.0;
            row["blowup_exponent"] = slope;
            row["expected_exponent"] = expect;
            ok = ok && std::abs(slope - expect) <= 0.05 * std::abs(expect) + 1e-6;
        }
        row["pass"] = ok;
        all_pass = all_pass && ok;
        sum["rows"].push_back(row);
    }
    sum["pass"] = all_pass;
    write_summary(ctx, "corner", sum);
    write_manifest(ctx, "corner", all_pass);
    return all_pass ? 0 : 1;
}

int run_tilted(RunContext& ctx) {
    const json& cfg = ctx.config;
    const double alpha = cfg.at("alpha").get<double>();
    const int order = cfg.value("order", 2);
    const int n = cfg.value("n", 96);
    auto res = tilted_sharpness(alpha, order, n);

    auto csv = open_csv(ctx, "tilted_fit.csv");
    csv << "x1,derivative\n";
    for (const auto& [x, d] : res.fit.raw) csv << x << ',' << d << '\n';

    const bool pass = !res.degenerate && res.min_boundary_gradient > 0.0 &&
                      res.exponent <= alpha + 0.15;
    json sum;
    sum["alpha"] = alpha;
    sum["order"] = order;
    sum["n"] = n;
    sum["exponent"] = res.exponent;
    sum["band_low"] = res.fit.band_low - (order - 1);
    sum["band_high"] = res.fit.band_high - (order - 1);
    sum["hopf_min_gradient"] = res.min_boundary_gradient;
    sum["degenerate"] = res.degenerate;
    sum["pass"] = pass;
    sum["seed"] = ctx.seed;
    write_summary(ctx, "tilted", sum);
    write_manifest(ctx, "tilted", pass);
    return pass ? 0 : 1;
}

int run_scaling(RunContext& ctx) {
    const json& cfg = ctx.config;
    const NFunction phi = model_from_json(cfg.value("model", json::object()));
    const double beta = cfg.value("beta", 0.3);
    std::vector<int> grids = cfg.value("grids", std::vector<int>{16, 32, 64});
    auto rows = holder_scaling(phi, beta, grids, cfg.value("family", 0));

    auto csv = open_csv(ctx, "scaling.csv");
    csv << "n,norm_grad_u,norm_pressure,norm_forcing,ratio\n";
    for (const auto& r : rows)
        csv << r.n << ',' << r.norm_grad_u << ',' << r.norm_pressure << ',' << r.norm_forcing
            << ',' << r.ratio << '\n';

    json sum;
    sum["beta"] = beta;
    sum["beta_tilde"] = std::min(beta, beta * (phi.exponent() - 1.0));
    sum["pass"] = true;
    sum["seed"] = ctx.seed;
    write_summary(ctx, "scaling", sum);
    write_manifest(ctx, "scaling", true);
    return 0;
}

int run_bmo(RunContext& ctx) {
    const json& cfg = ctx.config;
    const NFunction phi = model_from_json(cfg.value("model", json::object()));
    std::vector<int> grids = cfg.value("grids", std::vector<int>{32, 64, 128});
    const int family = cfg.value("family", 1);
    auto rows = bmo_stability(phi, grids, family);
    const double slope = stability_trend_slope(rows);

    auto csv = open_csv(ctx, "bmo_stability.csv");
    csv << "n,numerator,denominator,mean_term,ratio\n";
    for (const auto& r : rows)
        csv << r.n << ',' << r.numerator << ',' << r.denominator << ',' << r.mean_term << ','
            << r.ratio << '\n';

    const bool pass = slope <= 0.05;
    json sum;
    sum["family"] = family;
    sum["trend_slope_per_doubling"] = slope;
    sum["pass"] = pass;
    sum["seed"] = ctx.seed;
    write_summary(ctx, "bmo", sum);
    write_manifest(ctx, "bmo", pass);
    return pass ? 0 : 1;
}

int run_homogeneity(RunContext& ctx) {
    const json& cfg = ctx.config;
    const NFunction phi = model_from_json(cfg.value("model", json::object()));
    const int n = cfg.value("n", 32);
    std::vector<double> lambdas = cfg.value("lambdas", std::vector<double>{0.1, 8.0});
    SolverConfig scfg;
    const double gate = 10.0 * scfg.newton_tol;
    const double dev = homogeneity_check(phi, n, cfg.value("family", 0), lambdas);
    const bool pass = dev <= gate;

    auto csv = open_csv(ctx, "homogeneity.csv");
    csv << "n,max_relative_deviation\n" << n << ',' << dev << '\n';

    json sum;
    sum["max_relative_deviation"] = dev;
    sum["gate"] = gate;
    sum["pass"] = pass;
    sum["seed"] = ctx.seed;
    write_summary(ctx, "homogeneity", sum);
    write_manifest(ctx, "homogeneity", pass);
    return pass ? 0 : 1;
}

int run_reflect(RunContext& ctx) {
    const json& cfg = ctx.config;
    const NFunction phi = model_from_json(cfg.value("model", json::object()));
    const int n = cfg.value("n", 32);
    auto res = reflection_experiment(phi, n, cfg.value("family", 0));
    const bool pass = res.interior_residual <=
                          2.0 * std::max(res.half_residual, res.newton_tol) &&
                      res.diag_identity_error <= 1e-12;

    auto csv = open_csv(ctx, "reflect.csv");
    csv << "n,half_residual,interior_residual,diag_identity_error\n"
        << n << ',' << res.half_residual << ',' << res.interior_residual << ','
        << res.diag_identity_error << '\n';

    json sum;
    sum["half_residual"] = res.half_residual;
    sum["interior_residual"] = res.interior_residual;
    sum["diag_identity_error"] = res.diag_identity_error;
    sum["pass"] = pass;
    sum["seed"] = ctx.seed;
    write_summary(ctx, "reflect", sum);
    write_manifest(ctx, "reflect", pass);
    return pass ? 0 : 1;
}

int run_proptest(RunContext& ctx) {
    const json& cfg = ctx.config;
    const int samples = cfg.value("samples", 10000);
    std::mt19937_64 rng(ctx.seed);
    std::uniform_real_distribution<double> mat(-10.0 / std::sqrt(2.0), 10.0 / std::sqrt(2.0));
    std::uniform_real_distribution<double> ts(0.0, 10.0), del(1e-3, 1.0);

    json sum;
    bool all_pass = true;
    auto csv = open_csv(ctx, "proptest.csv");
    csv << "model,p,young_K2,hammer_envelope,shift_change_c,duality_gap,v_consistency_gap\n";

    struct ModelCase { const char* name; NFunction phi; double q_upper; };
    std::vector<ModelCase> cases;
    cases.push_back({"power", make_power(1.5, 1.0), 1.5});
    cases.push_back({"power", make_power(2.0, 1.0), 2.0});
    cases.push_back({"power", make_power(3.0, 1.0), 3.0});
    cases.push_back({"carreau", make_carreau(1.5, 1.0), 2.0});

    for (auto& mc : cases) {
        const NFunction& phi = mc.phi;
        double youngK2 = 1.0;
        double envelope = 1.0;
        double shift_c = 1.0;
        double duality = 0.0;
        double vgap = 0.0;
        const double pbar = std::min(phi.exponent(), 2.0);
        const double pbar_conj = pbar / (pbar - 1.0);
        for (int k = 0; k < samples; ++k) {
            const SymMat2 P{mat(rng), mat(rng), mat(rng)}, Q{mat(rng), mat(rng), mat(rng)};
            // five-way comparability envelope
            if ((P - Q).norm() > 1e-8) {
                auto g = monotonicity_gap(phi, P, Q);
                const double vals[5] = {g.stress_pairing, g.v_gap_sq, g.shifted_potential,
                                        g.shifted_conjugate, g.second_deriv_form};
                double lo = 1e300, hi = 0.0;
                for (double v : vals) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                envelope = std::max(envelope, hi / lo);
            }
            // Young's inequality: smallest admissible K2 on the sample
            const double t = ts(rng), s = ts(rng), dd = del(rng);
            const double phit = phi.value(t), phis = conjugate_value(phi, s);
            const double rest = t * s - dd * phis;
            if (rest > 0.0 && phit > 0.0) {
                const double k2 = std::pow(rest / (std::pow(dd, 1.0 - mc.q_upper) * phit),
                                           1.0 / (mc.q_upper - 1.0));
                youngK2 = std::max(youngK2, k2);
            }
            // shift change constant
            const double tt = ts(rng) * 0.3;
            for (double epsv : {1.0, 0.5, 0.1}) {
                const SymMat2 dV = v_map(phi, P) - v_map(phi, Q);
                const double lhs = shifted(phi, P.norm()).value(tt) - epsv * dV.ddot(dV);
                const double den =
                    std::pow(epsv, 1.0 - pbar_conj) * shifted(phi, Q.norm()).value(tt);
                if (lhs > 0.0 && den > 0.0) shift_c = std::max(shift_c, lhs / den);
            }
            // Fenchel equality and |V|^2 = S : A
            const double d = phi.deriv(t);
            duality = std::max(duality,
                               std::abs(phi.value(t) + conjugate_value(phi, d) - t * d) /
                                   std::max(1.0, t * d));
            const SymMat2 V = v_map(phi, P);
            vgap = std::max(vgap, std::abs(V.ddot(V) - stress(phi, P).ddot(P)) /
                                      std::max(1.0, V.ddot(V)));
        }
        csv << mc.name << ',' << phi.exponent() << ',' << youngK2 << ',' << envelope << ','
            << shift_c << ',' << duality << ',' << vgap << '\n';
        json row;
        row["model"] = mc.name;
        row["p"] = phi.exponent();
        row["young_K2"] = youngK2;
        row["hammer_envelope"] = envelope;
        row["shift_change_c"] = shift_c;
        row["duality_gap"] = duality;
        row["v_consistency_gap"] = vgap;
        const bool ok = duality <= 1e-6 && vgap <= 1e-10 && envelope < 1e3 && youngK2 < 1e3;
        row["pass"] = ok;
        all_pass = all_pass && ok;
        sum["models"].push_back(row);
    }
    sum["samples"] = samples;
    sum["pass"] = all_pass;
    sum["seed"] = ctx.seed;
    write_summary(ctx, "proptest", sum);
    write_manifest(ctx, "proptest", all_pass);
    return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"generalized planar Stokes with perfect slip: solves, seminorm "
                 "estimators and boundary-regularity experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir;
    std::uint64_t seed = 1;
    int verbosity = 0, jobs = 1;
    app.add_option("--config", config_path, "JSON problem configuration");
    app.add_option("--out", out_dir, "output directory (under SLIPSTOKES_OUT if set)");
    app.add_option("--seed", seed, "random seed recorded in every output");
    app.add_option("--jobs", jobs, "worker cap for parameter lattices");
    app.add_flag_function("-v", [&verbosity](std::int64_t n) { verbosity = static_cast<int>(n); },
                          "verbosity");

    auto* c_solve = app.add_subcommand("solve", "run a single boundary-value solve");
    auto* c_corner = app.add_subcommand("corner", "corner-domain gradient integrability");
    double beta = 3.0 * M_PI / 4.0;
    std::string qlist = "2,3,4";
    c_corner->add_option("--beta", beta, "opening angle in (0, pi)");
    c_corner->add_option("--q", qlist, "comma-separated integrability exponents");
    auto* c_tilted = app.add_subcommand("tilted", "tilted-boundary sharpness probe");
    double alpha = 0.5;
    int order = 2, tn = 96;
    c_tilted->add_option("--alpha", alpha, "boundary Hoelder exponent in (0,1)");
    c_tilted->add_option("--order", order, "boundary differentiability order (1 or 2)");
    c_tilted->add_option("--n", tn, "chart resolution");
    auto* c_scaling = app.add_subcommand("scaling", "Hoelder-scaling ratio table");
    auto* c_bmo = app.add_subcommand("bmo", "oscillation-stability ratio ladder");
    auto* c_homog = app.add_subcommand("homogeneity", "power-law homogeneity deviation");
    auto* c_reflect = app.add_subcommand("reflect", "slip-wall reflection consistency");
    auto* c_prop = app.add_subcommand("proptest", "constitutive property suite");
    std::string module = "orlicz";
    int samples = 10000;
    c_prop->add_option("--module", module, "property module (orlicz)");
    c_prop->add_option("--samples", samples, "sample count per property");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        RunContext ctx;
        ctx.seed = seed;
        ctx.verbosity = verbosity;
        ctx.jobs = jobs;
        ctx.out_dir = resolve_out(out_dir);
        std::filesystem::create_directories(ctx.out_dir);
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw std::invalid_argument("cannot open config " + config_path);
            in >> ctx.config;
        } else {
            ctx.config = json::object();
        }

        if (c_solve->parsed()) return run_solve(ctx);
        if (c_corner->parsed()) {
            ctx.config["beta"] = beta;
            std::vector<double> qs;
            std::stringstream ss(qlist);
            std::string tok;
            while (std::getline(ss, tok, ',')) qs.push_back(std::stod(tok));
            ctx.config["q"] = qs;
            return run_corner(ctx);
        }
        if (c_tilted->parsed()) {
            ctx.config["alpha"] = alpha;
            ctx.config["order"] = order;
            ctx.config["n"] = tn;
            return run_tilted(ctx);
        }
        if (c_scaling->parsed()) return run_scaling(ctx);
        if (c_bmo->parsed()) return run_bmo(ctx);
        if (c_homog->parsed()) return run_homogeneity(ctx);
        if (c_reflect->parsed()) return run_reflect(ctx);
        if (c_prop->parsed()) {
            if (module != "orlicz") throw std::invalid_argument("unknown proptest module");
            ctx.config["samples"] = samples;
            return run_proptest(ctx);
        }
        return 2;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "run failed: %s\n", e.what());
        return 1;
    }
}
