// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "slipstokes/core.hpp"
#include "slipstokes/interp.hpp"
#include "slipstokes/quadrature.hpp"

namespace slipstokes {

enum class PotentialModel { PowerLaw, CarreauType, CustomTable };

/// Growth envelope of a convex potential: Phi(s t) <= K max(s^p, s^q) Phi(t)
/// together with the matching lower bound.
struct TypeIndices {
    double p_lower = 0.0;
    double q_upper = 0.0;
    double K = 1.0;
};

/// Convex potential Phi with Phi(0)=0, Phi'(0)=0, Phi' positive and
/// non-decreasing on (0, inf). Generates the stress law S(A) = Phi'(|A|) A/|A|.
/// Instances are immutable after construction and safe to share across threads.
class NFunction {
public:
    /// Phi(t) = mu0 t^p / p. Rejects p <= 1 (loss of convexity control) and mu0 <= 0.
    static NFunction power(double p, double mu0) {
        validate(p, mu0);
        NFunction f;
        f.model_ = PotentialModel::PowerLaw;
        f.p_ = p;
        f.mu0_ = mu0;
        return f;
    }

    /// Phi'(t) = mu0 (1 + t^2)^{(p-2)/2} t. The potential itself is recovered
    /// by quadrature of Phi'.
    static NFunction carreau(double p, double mu0) {
        validate(p, mu0);
        NFunction f;
        f.model_ = PotentialModel::CarreauType;
        f.p_ = p;
        f.mu0_ = mu0;
        f.table_value_ = std::make_shared<CumulativeIntegral>(
            [p, mu0](double t) { return mu0 * std::pow(1.0 + t * t, 0.5 * (p - 2.0)) * t; }, 16.0);
        f.attach_conjugate_table(f.deriv(16.0));
        return f;
    }

    /// Custom model from samples (t_i, Phi'(t_i)), both strictly increasing.
    static NFunction from_table(std::vector<double> t, std::vector<double> dphi) {
        if (t.size() < 2 || t.size() != dphi.size())
            throw std::invalid_argument("NFunction::from_table: need >= 2 matching samples");
        for (std::size_t i = 1; i < t.size(); ++i)
            if (!(t[i] > t[i - 1]) || !(dphi[i] > dphi[i - 1]))
                throw std::invalid_argument("NFunction::from_table: columns must be strictly increasing");
        if (t.front() > 0.0) {
            // anchor Phi'(0) = 0
            t.insert(t.begin(), 0.0);
            dphi.insert(dphi.begin(), 0.0);
        } else if (dphi.front() != 0.0) {
            throw std::invalid_argument("NFunction::from_table: Phi'(0) must be 0");
        }
        NFunction f;
        f.model_ = PotentialModel::CustomTable;
        f.p_ = 2.0; // exponent hint, refined by estimate_indices
        f.mu0_ = 1.0;
        f.table_ = std::make_shared<MonotoneCubic>(std::move(t), std::move(dphi));
        f.table_xmax_ = f.table_->x_max();
        f.table_dmax_ = (*f.table_)(f.table_xmax_);
        f.table_slope_ = std::max(f.table_->deriv(f.table_xmax_), f.table_dmax_ / f.table_xmax_);
        const NFunction probe = f;
        f.table_value_ = std::make_shared<CumulativeIntegral>(
            [probe](double s) { return probe.deriv(s); }, f.table_xmax_);
        f.attach_conjugate_table(f.table_dmax_);
        return f;
    }

    /// Two-column text file (t, Phi'(t)); '#' starts a comment line.
    static NFunction from_table_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("NFunction::from_table_file: cannot open " + path);
        std::vector<double> t, d;
        std::string line;
        while (std::getline(in, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ls(line);
            double a, b;
            if (ls >> a >> b) {
                t.push_back(a);
                d.push_back(b);
            }
        }
        return from_table(std::move(t), std::move(d));
    }

    double value(double t) const {
        if (t < 0.0) throw std::domain_error("NFunction::value: negative argument");
        switch (model_) {
        case PotentialModel::PowerLaw:
            return mu0_ * std::pow(t, p_) / p_;
        default:
            return (*table_value_)(t);
        }
    }

    double deriv(double t) const {
        if (t < 0.0) throw std::domain_error("NFunction::deriv: negative argument");
        switch (model_) {
        case PotentialModel::PowerLaw:
            return t == 0.0 ? 0.0 : mu0_ * std::pow(t, p_ - 1.0);
        case PotentialModel::CarreauType:
            return mu0_ * std::pow(1.0 + t * t, 0.5 * (p_ - 2.0)) * t;
        default:
            // linear extension beyond the sampled range keeps Phi' increasing
            if (t > table_xmax_) return table_dmax_ + table_slope_ * (t - table_xmax_);
            return std::max(0.0, (*table_)(t));
        }
    }

    double second_deriv(double t) const {
        if (t < 0.0) throw std::domain_error("NFunction::second_deriv: negative argument");
        switch (model_) {
        case PotentialModel::PowerLaw:
            return mu0_ * (p_ - 1.0) * std::pow(t, p_ - 2.0);
        case PotentialModel::CarreauType: {
            const double w = 1.0 + t * t;
            return mu0_ * std::pow(w, 0.5 * (p_ - 2.0) - 1.0) * (w + (p_ - 2.0) * t * t);
        }
        default:
            if (t > table_xmax_) return table_slope_;
            return table_->deriv(t);
        }
    }

    /// Generalized inverse of Phi': sup{ r : Phi'(r) <= s }, found by doubling
    /// the bracket and bisecting to 1e-12 relative width.
    double deriv_inverse(double s) const {
        if (s < 0.0) throw std::domain_error("NFunction::deriv_inverse: negative argument");
        if (model_ == PotentialModel::PowerLaw)
            return std::pow(s / mu0_, 1.0 / (p_ - 1.0));
        if (s == 0.0) return 0.0;
        double hi = 1.0;
        int guard = 0;
        while (deriv(hi) <= s) {
            hi *= 2.0;
            if (++guard > 4096) throw std::runtime_error("NFunction::deriv_inverse: Phi' does not reach level");
        }
        double lo = 0.0;
        for (int it = 0; it < 200 && (hi - lo) > 1e-12 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            if (deriv(mid) <= s) lo = mid; else hi = mid;
        }
        if (!(deriv(lo) <= s + 1e-9 * std::max(1.0, s)))
            throw std::runtime_error("NFunction::deriv_inverse: bisection failed (non-monotone Phi')");
        return 0.5 * (lo + hi);
    }

    /// Conjugate potential Phi*(s) = int_0^s (Phi')^{-1}; closed form for the
    /// power law, quadrature of the generalized inverse otherwise.
    double conjugate(double s) const {
        if (s < 0.0) throw std::domain_error("NFunction::conjugate: negative argument");
        if (model_ == PotentialModel::PowerLaw) {
            const double pc = p_ / (p_ - 1.0);
            return std::pow(mu0_, 1.0 - pc) * std::pow(s, pc) / pc;
        }
        return (*conj_value_)(s);
    }

    PotentialModel model() const { return model_; }
    double exponent() const { return p_; }
    double viscosity_scale() const { return mu0_; }

    /// Shear thinning iff Phi'' is (almost) decreasing; keyed on the sign of
    /// p-2 for the built-in models, sampled for custom tables.
    bool shear_thinning() const {
        if (model_ != PotentialModel::CustomTable) return p_ < 2.0;
        double lo = second_deriv(1e-2), hi = second_deriv(1e2);
        return lo > hi;
    }

    /// Exact indices (p, p, 1) for the power law; nullptr-like default otherwise.
    TypeIndices exact_indices() const {
        if (model_ == PotentialModel::PowerLaw) return {p_, p_, 1.0};
        throw std::logic_error("NFunction::exact_indices: only exact for the power law");
    }

private:
    static void validate(double p, double mu0) {
        if (!(p > 1.0)) throw std::invalid_argument("NFunction: exponent must satisfy p > 1");
        if (!(mu0 > 0.0)) throw std::invalid_argument("NFunction: viscosity scale must be positive");
    }

    void attach_conjugate_table(double s_hi) {
        const NFunction probe = *this; // conj table not consulted by deriv_inverse
        conj_value_ = std::make_shared<CumulativeIntegral>(
            [probe](double s) { return probe.deriv_inverse(s); }, s_hi, 1e-11);
    }

    PotentialModel model_ = PotentialModel::PowerLaw;
    double p_ = 2.0;
    double mu0_ = 1.0;
    double table_xmax_ = 0.0, table_dmax_ = 0.0, table_slope_ = 0.0;
    std::shared_ptr<MonotoneCubic> table_;           // Phi' samples (custom)
    std::shared_ptr<CumulativeIntegral> table_value_; // Phi by quadrature
    std::shared_ptr<CumulativeIntegral> conj_value_;  // Phi* by quadrature
};

inline NFunction make_power(double p, double mu0) { return NFunction::power(p, mu0); }

inline NFunction make_carreau(double p, double mu0) { return NFunction::carreau(p, mu0); }

inline NFunction make_custom(std::vector<double> t, std::vector<double> dphi) {
    return NFunction::from_table(std::move(t), std::move(dphi));
}

inline NFunction make_custom_file(const std::string& path) {
    return NFunction::from_table_file(path);
}

inline double conjugate_value(const NFunction& phi, double s) { return phi.conjugate(s); }

/// Stress law S(A) = Phi'(|A|) A / |A| with the limit value S(0) = 0.
inline SymMat2 stress(const NFunction& phi, const SymMat2& A) {
    const double n = A.norm();
    if (n == 0.0) return {};
    return A * (phi.deriv(n) / n);
}

/// V(A) = sqrt(Phi'(|A|) |A|) A / |A|; |V(A)|^2 equals S(A) : A.
inline SymMat2 v_map(const NFunction& phi, const SymMat2& A) {
    const double n = A.norm();
    if (n == 0.0) return {};
    return A * (std::sqrt(phi.deriv(n) * n) / n);
}

/// Shifted potential: Phi_a'(s) = Phi'(a+s) s/(a+s). The family regularizes
/// the degenerate origin uniformly in the shift.
class ShiftedNFunction {
public:
    ShiftedNFunction(NFunction base, double a) : base_(std::move(base)), a_(a) {
        if (a < 0.0) throw std::invalid_argument("ShiftedNFunction: shift must be >= 0");
    }

    double deriv(double s) const {
        if (s < 0.0) throw std::domain_error("ShiftedNFunction::deriv: negative argument");
        if (s == 0.0) return 0.0;
        return base_.deriv(a_ + s) * s / (a_ + s);
    }

    double value(double s) const {
        if (s < 0.0) throw std::domain_error("ShiftedNFunction::value: negative argument");
        if (s == 0.0) return 0.0;
        if (a_ == 0.0) return base_.value(s);
        if (base_.model() == PotentialModel::PowerLaw) {
            // int_0^s mu0 (a+r)^{p-2} r dr in closed form
            const double p = base_.exponent(), mu0 = base_.viscosity_scale(), a = a_;
            auto prim = [p, a, mu0](double r) {
                const double ap = std::pow(a + r, p - 1.0);
                return mu0 * (ap * (a + r) / p - a * ap / (p - 1.0));
            };
            return prim(s) - prim(0.0);
        }
        return integrate([this](double r) { return deriv(r); }, 0.0, s, 1e-11);
    }

    double second_deriv(double s) const {
        if (s < 0.0) throw std::domain_error("ShiftedNFunction::second_deriv: negative argument");
        const double t = a_ + s;
        if (t == 0.0) return base_.second_deriv(0.0);
        return base_.second_deriv(t) * s / t + base_.deriv(t) * a_ / (t * t);
    }

    const NFunction& base() const { return base_; }
    double shift() const { return a_; }

private:
    NFunction base_;
    double a_;
};

inline ShiftedNFunction shifted(const NFunction& phi, double a) { return {phi, a}; }

/// Regularized stress derived from the shifted potential:
/// S_eps(A) = Phi'(eps + |A|) A / (eps + |A|).
inline SymMat2 stress_shifted(const NFunction& phi, double eps, const SymMat2& A) {
    const double n = A.norm();
    const double t = eps + n;
    if (t == 0.0) return {};
    return A * (phi.deriv(t) / t);
}

/// Empirical type indices over a (s, t) lattice. The grids must cover at
/// least [1e-3, 1e3]. Exact for the power law without sampling.
inline TypeIndices estimate_indices(const NFunction& phi, std::span<const double> s_grid,
                                    std::span<const double> t_grid) {
    if (phi.model() == PotentialModel::PowerLaw) return phi.exact_indices();
    auto covers = [](std::span<const double> g) {
        double lo = 1e300, hi = -1e300;
        for (double v : g) { lo = std::min(lo, v); hi = std::max(hi, v); }
        return lo <= 1e-3 && hi >= 1e3;
    };
    if (!covers(s_grid) || !covers(t_grid))
        throw std::invalid_argument("estimate_indices: grids must cover [1e-3, 1e3]");

    double e_min = 1e300, e_max = -1e300;
    for (double s : s_grid) {
        if (s <= 0.0 || std::abs(std::log(s)) < 1e-9) continue;
        for (double t : t_grid) {
            if (t <= 0.0) continue;
            const double r = phi.value(s * t) / phi.value(t);
            if (!(r > 0.0)) continue;
            const double e = std::log(r) / std::log(s);
            e_min = std::min(e_min, e);
            e_max = std::max(e_max, e);
        }
    }
    TypeIndices idx;
    idx.p_lower = e_min;
    idx.q_upper = e_max;
    // smallest K validating both envelope inequalities on the lattice
    double K = 1.0;
    for (double s : s_grid) {
        if (s <= 0.0) continue;
        for (double t : t_grid) {
            if (t <= 0.0) continue;
            const double ratio = phi.value(s * t) / phi.value(t);
            const double env = std::max(std::pow(s, idx.p_lower), std::pow(s, idx.q_upper));
            const double env_lo = std::min(std::pow(s, idx.p_lower), std::pow(s, idx.q_upper));
            if (env > 0.0) K = std::max(K, ratio / env);
            if (ratio > 0.0) K = std::max(K, env_lo / ratio);
        }
    }
    idx.K = K;
    if (K > 1e6)
        throw std::runtime_error("estimate_indices: no admissible envelope with K <= 1e6 on the sampled range");
    return idx;
}

/// The five mutually comparable quantities quantifying the monotonicity of
/// the stress at a pair (P, Q):
///   (S(P)-S(Q)) : (P-Q),  |V(P)-V(Q)|^2,  Phi_{|Q|}(|P-Q|),
///   (Phi*)_{|S(Q)|}(|S(P)-S(Q)|),  Phi''(|P|+|Q|) |P-Q|^2.
struct MonotonicityGap {
    double stress_pairing = 0.0;
    double v_gap_sq = 0.0;
    double shifted_potential = 0.0;
    double shifted_conjugate = 0.0;
    double second_deriv_form = 0.0;
};

inline MonotonicityGap monotonicity_gap(const NFunction& phi, const SymMat2& P, const SymMat2& Q) {
    MonotonicityGap g;
    const SymMat2 SP = stress(phi, P), SQ = stress(phi, Q);
    const SymMat2 dS = SP - SQ, dA = P - Q;
    g.stress_pairing = dS.ddot(dA);
    const SymMat2 dV = v_map(phi, P) - v_map(phi, Q);
    g.v_gap_sq = dV.ddot(dV);
    g.shifted_potential = ShiftedNFunction(phi, Q.norm()).value(dA.norm());

    // (Phi*)_a with a = |S(Q)|, evaluated at |S(P)-S(Q)| by quadrature of the
    // shifted derivative of Phi*
    const double a = SQ.norm(), s = dS.norm();
    if (s > 0.0) {
        g.shifted_conjugate = integrate(
            [&phi, a](double r) { return r == 0.0 ? 0.0 : phi.deriv_inverse(a + r) * r / (a + r); },
            0.0, s, 1e-11);
    }

    const double n = P.norm() + Q.norm();
    if (n > 0.0) g.second_deriv_form = phi.second_deriv(n) * dA.ddot(dA);
    return g;
}

/// Conjugate model as a first-class potential so that duality can be probed
/// numerically: derivative = generalized inverse of Phi'.
class ConjugateFunction {
public:
    explicit ConjugateFunction(NFunction phi) : phi_(std::move(phi)) {}

    double deriv(double s) const { return phi_.deriv_inverse(s); }

    double value(double s) const { return phi_.conjugate(s); }

    /// Generalized inverse of (Phi*)' = (Phi')^{-1}; recovers Phi' where the
    /// latter is continuous.
    double deriv_inverse(double t) const {
        if (t < 0.0) throw std::domain_error("ConjugateFunction::deriv_inverse: negative argument");
        if (t == 0.0) return 0.0;
        double hi = 1.0;
        int guard = 0;
        while (deriv(hi) <= t) {
            hi *= 2.0;
            if (++guard > 4096) throw std::runtime_error("ConjugateFunction::deriv_inverse: unbounded bracket");
        }
        double lo = 0.0;
        for (int it = 0; it < 200 && (hi - lo) > 1e-12 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            if (deriv(mid) <= t) lo = mid; else hi = mid;
        }
        return 0.5 * (lo + hi);
    }

    /// (Phi*)*(t) by quadrature of the inverse of (Phi*)'.
    double biconjugate(double t) const {
        if (t == 0.0) return 0.0;
        return integrate([this](double r) { return deriv_inverse(r); }, 0.0, t, 1e-10);
    }

private:
    NFunction phi_;
};

} // namespace slipstokes
