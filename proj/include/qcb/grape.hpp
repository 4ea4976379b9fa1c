#pragma once

// Piecewise-constant pulse synthesis for state-to-state transfers:
// exact adjoint gradients (Daleckii-Krein segment derivative) driven by
// an L-BFGS ascent with Armijo backtracking.  Two target modes: a fixed
// full state, and amplitudes-only with free phases (the gradient is the
// full-state gradient evaluated at the instantaneous optimal phases).

#include "qcb/lindblad.hpp"

#include <random>

namespace qcb {

struct SynthesisConfig {
    double t_total = 1.0;
    int n_seg = 16;
    int max_iter = 500;
    double fidelity_goal = 0.9999;
    double amplitude_penalty = 0.0;
    std::uint64_t seed = 0;
    double u_init_scale = 0.1;
    std::optional<RMat> u_init;  // warm start; overrides the random init
    int lbfgs_memory = 10;
};

struct SynthesisResult {
    ControlPulse pulse;
    double fidelity = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_history;  // objective after init and each accepted step
};

namespace detail {

struct SegmentFrame {
    Eigh e;      // eigendecomposition of H0 + sum u_k X_k
    Vec chi;     // forward state before the segment
    Vec beta;    // backward state after the segment
};

// shared forward/backward machinery for fidelity and gradient
struct GrapeEngine {
    const ModelSystem& model;
    Vec psi_i;
    double dt;

    // target: fixed state, or free-phase amplitudes in the eigenbasis
    bool free_phase = false;
    Vec psi_f;
    RVec r_f;

    explicit GrapeEngine(const ModelSystem& m) : model(m) {}

    // returns overlap o with the (possibly phase-adapted) target and fills
    // the frames needed by grad(); psi_f_used reports the target state used
    cx forward(const RMat& u, std::vector<SegmentFrame>& frames, Vec& psi_f_used) const {
        const int d = model.dim;
        const int n = static_cast<int>(u.rows());
        frames.resize(static_cast<std::size_t>(n));
        Vec chi = psi_i;
        for (int s = 0; s < n; ++s) {
            Mat H = model.h0;
            for (int k = 0; k < model.num_controls(); ++k) H += u(s, k) * model.controls[k];
            auto& fr = frames[static_cast<std::size_t>(s)];
            fr.e = stable_eigh(H);
            fr.chi = chi;
            Vec w = fr.e.vectors.adjoint() * chi;
            for (int i = 0; i < d; ++i) w(i) *= std::exp(cx(0, -fr.e.values(i) * dt));
            chi = fr.e.vectors * w;
        }
        if (free_phase) {
            Vec c = model.eigen_basis.adjoint() * chi;
            Vec tgt(d);
            for (int i = 0; i < d; ++i) {
                const double a = std::abs(c(i));
                tgt(i) = (a > 1e-14) ? r_f(i) * c(i) / a : cx(r_f(i), 0);
            }
            psi_f_used = model.eigen_basis * tgt;
        } else {
            psi_f_used = psi_f;
        }
        const cx o = psi_f_used.dot(chi);  // <psi_f|chi>

        Vec beta = psi_f_used;
        for (int s = n - 1; s >= 0; --s) {
            auto& fr = frames[static_cast<std::size_t>(s)];
            fr.beta = beta;
            Vec w = fr.e.vectors.adjoint() * beta;
            for (int i = 0; i < d; ++i) w(i) *= std::exp(cx(0, fr.e.values(i) * dt));
            beta = fr.e.vectors * w;
        }
        return o;
    }

    // exact gradient of |o|^2 given the frames from forward()
    RMat grad(const RMat& u, const std::vector<SegmentFrame>& frames, cx o) const {
        const int d = model.dim;
        const int n = static_cast<int>(u.rows());
        const int K = model.num_controls();
        RMat g = RMat::Zero(n, K);
        Mat D(d, d);
        for (int s = 0; s < n; ++s) {
            const auto& fr = frames[static_cast<std::size_t>(s)];
            const RVec& lam = fr.e.values;
            Vec ph(d);
            for (int i = 0; i < d; ++i) ph(i) = std::exp(cx(0, -lam(i) * dt));
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    const double dl = lam(a) - lam(b);
                    D(a, b) = (std::abs(dl) > 1e-12) ? (ph(a) - ph(b)) / dl
                                                     : cx(0, -dt) * ph(a);
                }
            const Vec bt = fr.e.vectors.adjoint() * fr.beta;
            const Vec ct = fr.e.vectors.adjoint() * fr.chi;
            for (int k = 0; k < K; ++k) {
                const Mat Xt = fr.e.vectors.adjoint() * model.controls[k] * fr.e.vectors;
                const cx dov = bt.dot((Xt.cwiseProduct(D)) * ct);
                g(s, k) = 2.0 * std::real(std::conj(o) * dov);
            }
        }
        return g;
    }
};

struct Evaluation {
    double objective = 0.0;
    double fidelity = 0.0;
    RMat gradient;
};

inline Evaluation evaluate(const GrapeEngine& eng, const RMat& u, double penalty) {
    std::vector<SegmentFrame> frames;
    Vec psi_f_used;
    const cx o = eng.forward(u, frames, psi_f_used);
    Evaluation ev;
    ev.fidelity = std::norm(o);
    ev.gradient = eng.grad(u, frames, o);
    ev.objective = ev.fidelity;
    if (penalty > 0) {
        ev.objective -= penalty * u.squaredNorm() * eng.dt;
        ev.gradient -= 2.0 * penalty * eng.dt * u;
    }
    return ev;
}

// L-BFGS ascent with Armijo backtracking; monotone in the objective.
inline SynthesisResult optimize(const GrapeEngine& eng, const SynthesisConfig& cfg) {
    if (cfg.n_seg < 1 || cfg.t_total <= 0)
        throw std::invalid_argument("synthesize: invalid segmentation");
    if (!(cfg.fidelity_goal > 0 && cfg.fidelity_goal <= 1))
        throw std::invalid_argument("synthesize: fidelity_goal must be in (0,1]");
    const int K = eng.model.num_controls();
    RMat u;
    if (cfg.u_init) {
        u = *cfg.u_init;
        if (u.rows() != cfg.n_seg || u.cols() != K)
            throw std::invalid_argument("synthesize: u_init shape mismatch");
    } else {
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> uni(-cfg.u_init_scale, cfg.u_init_scale);
        u = RMat::NullaryExpr(cfg.n_seg, K, [&](Eigen::Index, Eigen::Index) { return uni(rng); });
    }

    Evaluation ev = evaluate(eng, u, cfg.amplitude_penalty);
    std::vector<double> history{ev.objective};
    std::vector<RVec> S, Y;
    int it = 0;
    while (ev.fidelity < cfg.fidelity_goal && it < cfg.max_iter) {
        const auto n = u.size();
        Eigen::Map<const RVec> g(ev.gradient.data(), n);
        if (g.norm() < 1e-12) break;

        // two-loop recursion on (s, y = g_old - g_new) pairs
        RVec q = g;
        const int m = static_cast<int>(S.size());
        std::vector<double> alpha(static_cast<std::size_t>(m));
        for (int i = m - 1; i >= 0; --i) {
            const double rho = 1.0 / Y[static_cast<std::size_t>(i)].dot(S[static_cast<std::size_t>(i)]);
            alpha[static_cast<std::size_t>(i)] = rho * S[static_cast<std::size_t>(i)].dot(q);
            q -= alpha[static_cast<std::size_t>(i)] * Y[static_cast<std::size_t>(i)];
        }
        if (m > 0) {
            const auto& sl = S[static_cast<std::size_t>(m - 1)];
            const auto& yl = Y[static_cast<std::size_t>(m - 1)];
            q *= sl.dot(yl) / yl.dot(yl);
        }
        for (int i = 0; i < m; ++i) {
            const double rho = 1.0 / Y[static_cast<std::size_t>(i)].dot(S[static_cast<std::size_t>(i)]);
            const double b = rho * Y[static_cast<std::size_t>(i)].dot(q);
            q += (alpha[static_cast<std::size_t>(i)] - b) * S[static_cast<std::size_t>(i)];
        }
        if (q.dot(g) <= 0) q = g;  // fall back to steepest ascent

        const double gp = q.dot(g);
        double step = 1.0;
        bool accepted = false;
        Evaluation ev2;
        RMat u2;
        for (int ls = 0; ls < 40; ++ls) {
            u2 = u + step * Eigen::Map<const RMat>(q.data(), u.rows(), u.cols());
            ev2 = evaluate(eng, u2, cfg.amplitude_penalty);
            if (ev2.objective >= ev.objective + 1e-4 * step * gp) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        ++it;

        RVec sv = Eigen::Map<const RVec>(u2.data(), n) - Eigen::Map<const RVec>(u.data(), n);
        RVec yv = g - Eigen::Map<const RVec>(ev2.gradient.data(), n);
        if (sv.dot(yv) > 1e-12) {
            S.push_back(std::move(sv));
            Y.push_back(std::move(yv));
            if (static_cast<int>(S.size()) > cfg.lbfgs_memory) {
                S.erase(S.begin());
                Y.erase(Y.begin());
            }
        }
        u = std::move(u2);
        ev = ev2;
        history.push_back(ev.objective);
    }

    SynthesisResult res;
    res.pulse.dt = cfg.t_total / cfg.n_seg;
    res.pulse.values = u;
    res.pulse.eta = 0.0;
    res.fidelity = std::min(1.0, std::max(0.0, ev.fidelity));
    res.iterations = it;
    res.converged = res.fidelity >= cfg.fidelity_goal;
    res.objective_history = std::move(history);
    return res;
}

}  // namespace detail

// |<psi_f| U(T) |psi_i>|^2 with U the ordered product of segment exponentials.
inline double fidelity(const ModelSystem& model, const ControlPulse& pulse, const Vec& psi_i,
                       const Vec& psi_f) {
    if (psi_i.size() != model.dim || psi_f.size() != model.dim)
        throw std::invalid_argument("fidelity: dim mismatch");
    if (std::abs(psi_i.norm() - 1) > 1e-10 || std::abs(psi_f.norm() - 1) > 1e-10)
        throw std::invalid_argument("fidelity: states not normalized");
    Vec chi = psi_i;
    for (int s = 0; s < pulse.n_seg(); ++s) {
        Mat H = model.h0;
        for (int k = 0; k < model.num_controls(); ++k)
            H += pulse.values(s, k) * model.controls[k];
        Eigh e = stable_eigh(H);
        Vec w = e.vectors.adjoint() * chi;
        for (int i = 0; i < model.dim; ++i) w(i) *= std::exp(cx(0, -e.values(i) * pulse.dt));
        chi = e.vectors * w;
    }
    return std::min(1.0, std::norm(psi_f.dot(chi)));
}

// Exact gradient of fidelity with respect to each u_{seg,k}.
inline RMat fidelity_gradient(const ModelSystem& model, const ControlPulse& pulse,
                              const Vec& psi_i, const Vec& psi_f) {
    detail::GrapeEngine eng(model);
    eng.psi_i = psi_i;
    eng.psi_f = psi_f;
    eng.dt = pulse.dt;
    std::vector<detail::SegmentFrame> frames;
    Vec used;
    const cx o = eng.forward(pulse.values, frames, used);
    return eng.grad(pulse.values, frames, o);
}

// Full-state synthesis (target amplitudes and phases both fixed).
inline SynthesisResult synthesize(const ModelSystem& model, const Vec& psi_i, const Vec& psi_f,
                                  const SynthesisConfig& cfg) {
    if (psi_i.size() != model.dim || psi_f.size() != model.dim)
        throw std::invalid_argument("synthesize: dim mismatch");
    if (cfg.n_seg < 1 || cfg.t_total <= 0)
        throw std::invalid_argument("synthesize: invalid segmentation");
    detail::GrapeEngine eng(model);
    eng.psi_i = psi_i;
    eng.psi_f = psi_f;
    eng.dt = cfg.t_total / cfg.n_seg;
    return detail::optimize(eng, cfg);
}

struct FreePhaseResult {
    SynthesisResult synthesis;
    AmplitudePhaseState psi_f;  // target amplitudes with the phases the pulse realizes
};

// Amplitudes-only synthesis: maximizes (sum_n r_fn |c_n(u)|)^2 over pulses,
// then freezes the realized phases into a concrete target state.
inline FreePhaseResult synthesize_free_phase(const ModelSystem& model, const Vec& psi_i,
                                             const RVec& r_f, const SynthesisConfig& cfg) {
    if (r_f.size() != model.dim) throw std::invalid_argument("synthesize_free_phase: dim mismatch");
    detail::GrapeEngine eng(model);
    eng.psi_i = psi_i;
    eng.free_phase = true;
    eng.r_f = r_f;
    eng.dt = cfg.t_total / cfg.n_seg;
    FreePhaseResult out;
    out.synthesis = detail::optimize(eng, cfg);

    // realized phases at the found pulse
    Vec chi = psi_i;
    for (int s = 0; s < out.synthesis.pulse.n_seg(); ++s) {
        Mat H = model.h0;
        for (int k = 0; k < model.num_controls(); ++k)
            H += out.synthesis.pulse.values(s, k) * model.controls[k];
        Eigh e = stable_eigh(H);
        Vec w = e.vectors.adjoint() * chi;
        for (int i = 0; i < model.dim; ++i)
            w(i) *= std::exp(cx(0, -e.values(i) * out.synthesis.pulse.dt));
        chi = e.vectors * w;
    }
    const Vec c = model.eigen_basis.adjoint() * chi;
    const int d = model.dim;
    out.psi_f.r = r_f / r_f.norm();
    out.psi_f.phi = RVec::Zero(d);
    out.psi_f.basis_id = model.basis_id;
    int ref = -1;
    for (int n = 0; n < d; ++n)
        if (out.psi_f.r(n) > amp_gauge_tol) { ref = n; break; }
    const double gauge = (ref >= 0 && std::abs(c(ref)) > 1e-14) ? std::arg(c(ref)) : 0.0;
    for (int n = 0; n < d; ++n)
        out.psi_f.phi(n) = (out.psi_f.r(n) > amp_gauge_tol && std::abs(c(n)) > 1e-14)
                               ? wrap_phase(std::arg(c(n)) - gauge)
                               : 0.0;
    return out;
}

}  // namespace qcb
