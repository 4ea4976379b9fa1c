#pragma once

// Lower bounds on transformation time and purity loss: the phase-minimized
// variance, its gradient bound check, and the time / purity-loss / scaling
// bound evaluators.

#include "qcb/lindblad.hpp"

#include <limits>
#include <random>

namespace qcb {

inline const double kThreeSqrt2 = 3.0 * std::sqrt(2.0);

// T >= eps^2 / (2 sum_k ubar_k Lambda_k); +inf when all controls vanish.
inline double time_lower_bound(const TransformationSpec& spec, const ModelSystem& model,
                               const PulseStatistics& stats) {
    if (static_cast<int>(stats.u_bar.size()) != model.num_controls())
        throw std::invalid_argument("time_lower_bound: control count mismatch");
    double denom = 0.0;
    for (std::size_t k = 0; k < stats.u_bar.size(); ++k)
        denom += stats.u_bar[k] * model.lambda[k];
    if (denom <= 0.0) return std::numeric_limits<double>::infinity();
    return spec.epsilon * spec.epsilon / (2.0 * denom);
}

struct MinVarianceOptions {
    int starts = 32;
    int max_iter = 2000;
    double grad_tol = 1e-9;
    std::uint64_t seed = 20240901;
};

struct MinVarianceResult {
    double value = 0.0;
    RVec phi_star;
};

// min over phases of Var(X, sum_n r_n e^{i phi_n} |n>), gauge phi_ref = 0 at
// the first non-negligible amplitude; multi-start gradient descent on the
// phase torus with deterministic reduction (ties -> lowest start index).
inline MinVarianceResult min_variance_over_phases(const Mat& x, const RVec& r,
                                                  const ModelSystem& model,
                                                  const MinVarianceOptions& opts = {}) {
    const int d = model.dim;
    if (x.rows() != d || r.size() != d)
        throw std::invalid_argument("min_variance_over_phases: dim mismatch");
    if (std::abs(r.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("min_variance_over_phases: amplitudes not normalized");

    const Mat xt = model.eigen_basis.adjoint() * x * model.eigen_basis;

    std::vector<int> free_idx;
    int ref = -1;
    for (int n = 0; n < d; ++n)
        if (r(n) > amp_gauge_tol) {
            if (ref < 0) ref = n;
            else free_idx.push_back(n);
        }

    auto value_grad = [&](const RVec& phi, RVec* grad) -> double {
        Vec c(d);
        for (int n = 0; n < d; ++n) c(n) = r(n) * std::exp(cx(0, phi(n)));
        const Vec xc = xt * c;
        const double ex = std::real(c.dot(xc));
        const double ex2 = std::real(xc.dot(xc));
        if (grad) {
            const Vec x2c = xt * xc;
            grad->setZero();
            for (int f : free_idx) {
                const cx cb = std::conj(c(f));
                (*grad)(f) = 2.0 * std::imag(cb * x2c(f)) - 4.0 * ex * std::imag(cb * xc(f));
            }
        }
        return ex2 - ex * ex;
    };

    MinVarianceResult best;
    best.phi_star = RVec::Zero(d);
    if (free_idx.empty()) {  // single amplitude: variance is phase-independent
        best.value = std::max(0.0, value_grad(best.phi_star, nullptr));
        return best;
    }

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
    best.value = std::numeric_limits<double>::infinity();

    for (int start = 0; start < opts.starts; ++start) {
        RVec phi = RVec::Zero(d);
        if (start > 0)
            for (int f : free_idx) phi(f) = uni(rng);

        RVec g(d);
        double val = value_grad(phi, &g);
        double step = 0.1;
        for (int it = 0; it < opts.max_iter; ++it) {
            double gn = 0.0;
            for (int f : free_idx) gn += g(f) * g(f);
            if (std::sqrt(gn) < opts.grad_tol || step < 1e-14) break;
            RVec trial = phi;
            for (int f : free_idx) trial(f) = wrap_phase(phi(f) - step * g(f));
            RVec g2(d);
            const double v2 = value_grad(trial, &g2);
            if (v2 < val) {
                phi = trial;
                val = v2;
                g = g2;
                step *= 1.3;
            } else {
                step *= 0.5;
            }
        }
        if (val < best.value) {
            best.value = val;
            best.phi_star = phi;
        }
    }
    best.value = std::max(0.0, best.value);
    return best;
}

struct GradientCheck {
    bool differentiable = false;
    double grad_norm = 0.0;
};

// || grad_r min-variance || by central finite differences (step 1e-5 with
// renormalization); flagged non-differentiable when r has (near-)zero
// components.  Callers assert grad_norm <= 3 sqrt(2) Lambda^2 (+ slack).
inline GradientCheck variance_gradient_bound_check(const Mat& x, const RVec& r,
                                                   const ModelSystem& model,
                                                   const MinVarianceOptions& opts = {},
                                                   double step = 1e-5) {
    GradientCheck out;
    if (r.minCoeff() < 1e-6) return out;  // not differentiable at the boundary
    out.differentiable = true;
    const int d = model.dim;
    double acc = 0.0;
    for (int n = 0; n < d; ++n) {
        RVec rp = r, rm = r;
        rp(n) += step;
        rm(n) -= step;
        rp /= rp.norm();
        rm /= rm.norm();
        const double fp = min_variance_over_phases(x, rp, model, opts).value;
        const double fm = min_variance_over_phases(x, rm, model, opts).value;
        const double gn = (fp - fm) / (2.0 * step);
        acc += gn * gn;
    }
    out.grad_norm = std::sqrt(acc);
    return out;
}

// Eq. value: 2 eps^2 eta min_l(dvar_l - 3 sqrt(2) Lambda_l^2 eps) / max_l Lambda_l,
// clamped at 0 when the bracket goes negative (vacuous for large eps).
inline double purity_lower_bound(const TransformationSpec& spec, const ModelSystem& model,
                                 double eta, const MinVarianceOptions& opts = {}) {
    if (eta < 0) throw std::invalid_argument("purity_lower_bound: eta must be >= 0");
    if (eta == 0.0) return 0.0;
    double bracket = std::numeric_limits<double>::infinity();
    double lam_max = 0.0;
    for (int k = 0; k < model.num_controls(); ++k) {
        const double dvar =
            min_variance_over_phases(model.controls[k], spec.psi_i.r, model, opts).value;
        const double lam = model.lambda[static_cast<std::size_t>(k)];
        bracket = std::min(bracket, dvar - kThreeSqrt2 * lam * lam * spec.epsilon);
        lam_max = std::max(lam_max, lam);
    }
    if (lam_max <= 0.0) return 0.0;
    return 2.0 * spec.epsilon * spec.epsilon * eta * std::max(0.0, bracket) / lam_max;
}

inline double scaling_bound(double epsilon, double eta, int N) {
    if (epsilon <= 0 || eta < 0 || N < 1)
        throw std::invalid_argument("scaling_bound: inputs must be positive");
    return 2.0 * epsilon * epsilon * eta * N;
}

inline AmplitudePhaseState eigenstate_initial_condition(const ModelSystem& model, int which) {
    if (which < 0 || which >= model.dim)
        throw std::invalid_argument("eigenstate_initial_condition: index out of range");
    AmplitudePhaseState s;
    s.r = RVec::Zero(model.dim);
    s.r(which) = 1.0;
    s.phi = RVec::Zero(model.dim);
    s.basis_id = model.basis_id;
    return s;
}

// Operationalized "sufficiently small epsilon": eps <= dvar_min / (6 sqrt(2) Lambda_max^2)
// keeps the purity-bound bracket at least dvar_min / 2.
inline double small_epsilon_threshold(const ModelSystem& model, const RVec& r,
                                      const MinVarianceOptions& opts = {}) {
    double dvar_min = std::numeric_limits<double>::infinity();
    double lam_max = 0.0;
    for (int k = 0; k < model.num_controls(); ++k) {
        dvar_min = std::min(dvar_min,
                            min_variance_over_phases(model.controls[k], r, model, opts).value);
        lam_max = std::max(lam_max, model.lambda[static_cast<std::size_t>(k)]);
    }
    return dvar_min / (2.0 * kThreeSqrt2 * lam_max * lam_max);
}

struct BoundReport {
    double t_bound = 0.0;
    double dp_bound_general = 0.0;
    double dp_bound_scaling = 0.0;
    std::vector<double> min_variances;
    std::vector<RVec> phases_opt;
    // inputs echoed for reproducibility
    double epsilon = 0.0;
    double eta = 0.0;
    std::vector<double> u_bar;
    std::vector<double> lambda;
    int size_param = 0;
};

inline BoundReport bound_report(const TransformationSpec& spec, const ModelSystem& model,
                                const PulseStatistics& stats, double eta,
                                const MinVarianceOptions& opts = {}) {
    BoundReport rep;
    rep.epsilon = spec.epsilon;
    rep.eta = eta;
    rep.u_bar = stats.u_bar;
    rep.lambda = model.lambda;
    rep.size_param = model.size_param;
    rep.t_bound = time_lower_bound(spec, model, stats);
    rep.dp_bound_scaling = scaling_bound(spec.epsilon, eta, model.size_param);
    double bracket = std::numeric_limits<double>::infinity();
    double lam_max = 0.0;
    for (int k = 0; k < model.num_controls(); ++k) {
        auto mv = min_variance_over_phases(model.controls[k], spec.psi_i.r, model, opts);
        rep.min_variances.push_back(mv.value);
        rep.phases_opt.push_back(mv.phi_star);
        const double lam = model.lambda[static_cast<std::size_t>(k)];
        bracket = std::min(bracket, mv.value - kThreeSqrt2 * lam * lam * spec.epsilon);
        lam_max = std::max(lam_max, lam);
    }
    rep.dp_bound_general =
        (eta > 0 && lam_max > 0)
            ? 2.0 * spec.epsilon * spec.epsilon * eta * std::max(0.0, bracket) / lam_max
            : 0.0;
    return rep;
}

}  // namespace qcb
