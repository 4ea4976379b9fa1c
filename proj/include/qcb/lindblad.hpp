#pragma once

// Time evolution under the control-noise master equation
//   drho/dt = -i[H0 + sum_k u_k X_k, rho] - eta sum_k |u_k| [X_k, [X_k, rho]]
// with piecewise-constant controls, plus a stochastic unitary-kick
// unraveling whose ensemble average reproduces the same flow.

#include "qcb/states.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <optional>
#include <random>

namespace qcb {

struct ControlPulse {
    double dt = 0.0;        // uniform segment width
    RMat values;            // n_seg x K, u_k constant per segment
    double eta = 0.0;       // relative noise strength

    int n_seg() const { return static_cast<int>(values.rows()); }
    int num_controls() const { return static_cast<int>(values.cols()); }
    double t_total() const { return dt * n_seg(); }
};

inline ControlPulse constant_pulse(double t_total, int n_seg, const std::vector<double>& u,
                                   double eta) {
    ControlPulse p;
    p.dt = t_total / n_seg;
    p.values = RMat::Zero(n_seg, static_cast<int>(u.size()));
    for (int s = 0; s < n_seg; ++s)
        for (std::size_t k = 0; k < u.size(); ++k) p.values(s, static_cast<int>(k)) = u[k];
    p.eta = eta;
    return p;
}

struct PulseStatistics {
    double t_total = 0.0;
    std::vector<double> u_bar;  // (1/T) sum_seg |u_k| dt
};

inline PulseStatistics pulse_statistics(const ControlPulse& pulse) {
    if (pulse.dt <= 0 || pulse.n_seg() < 1)
        throw std::invalid_argument("pulse_statistics: invalid pulse");
    PulseStatistics st;
    st.t_total = pulse.t_total();
    st.u_bar.assign(pulse.num_controls(), 0.0);
    for (int k = 0; k < pulse.num_controls(); ++k)
        st.u_bar[static_cast<std::size_t>(k)] =
            pulse.values.col(k).cwiseAbs().sum() * pulse.dt / st.t_total;
    return st;
}

// Mean |u_k| over the prefix [0, t_end] of the pulse (clipped to the grid
// by exact piecewise quadrature).
inline PulseStatistics pulse_statistics_prefix(const ControlPulse& pulse, double t_end) {
    if (t_end <= 0) throw std::invalid_argument("pulse_statistics_prefix: t_end must be > 0");
    t_end = std::min(t_end, pulse.t_total());
    PulseStatistics st;
    st.t_total = t_end;
    st.u_bar.assign(pulse.num_controls(), 0.0);
    for (int k = 0; k < pulse.num_controls(); ++k) {
        double acc = 0.0, t = 0.0;
        for (int s = 0; s < pulse.n_seg() && t < t_end; ++s) {
            const double w = std::min(pulse.dt, t_end - t);
            acc += std::abs(pulse.values(s, k)) * w;
            t += pulse.dt;
        }
        st.u_bar[static_cast<std::size_t>(k)] = acc / t_end;
    }
    return st;
}

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<double> purity_series;
    std::vector<RVec> r_series;          // eigenbasis amplitudes sqrt(rho_nn)
    std::vector<Mat> states;             // optional density-matrix snapshots
    std::vector<double> state_times;
    std::optional<double> first_passage;
    std::uint64_t basis_id = 0;
};

struct PropagateOptions {
    enum class Integrator { Auto, Exact, RK4 };
    Integrator integrator = Integrator::Auto;
    double rk_theta = 0.01;        // substep control: ||L|| h <= rk_theta
    bool keep_states = false;
    int state_stride = 1;          // in segments
    bool record_substeps = false;  // record diagnostics at integrator substeps
    // stop early once ||r(t) - stop_r_ref|| >= stop_distance (0 = disabled)
    double stop_distance = 0.0;
    RVec stop_r_ref;
};

namespace detail {

inline RVec eigenbasis_amplitudes(const Mat& rho, const Mat& V) {
    const int d = static_cast<int>(rho.rows());
    RVec r(d);
    Mat rv = rho * V;
    for (int n = 0; n < d; ++n)
        r(n) = std::sqrt(std::max(0.0, std::real(V.col(n).dot(rv.col(n)))));
    return r;
}

inline Mat liouvillian(const ModelSystem& model, const RVec& u, double eta) {
    const int d = model.dim;
    Mat H = model.h0;
    for (int k = 0; k < model.num_controls(); ++k) H += u(k) * model.controls[k];
    const Mat Id = Mat::Identity(d, d);
    Mat L = cx(0, -1) * (Eigen::kroneckerProduct(Id, H).eval() -
                         Eigen::kroneckerProduct(H.transpose(), Id).eval());
    if (eta > 0)
        for (int k = 0; k < model.num_controls(); ++k) {
            const double a = eta * std::abs(u(k));
            if (a == 0.0) continue;
            const Mat& X = model.controls[k];
            const Mat X2 = X * X;
            L -= a * (Eigen::kroneckerProduct(Id, X2).eval() +
                      Eigen::kroneckerProduct(X2.transpose(), Id).eval() -
                      2.0 * Eigen::kroneckerProduct(X.transpose(), X).eval());
        }
    return L;
}

}  // namespace detail

inline TrajectoryRecord propagate_lindblad(const ModelSystem& model, const ControlPulse& pulse,
                                           const DensityMatrix& rho0,
                                           const PropagateOptions& opts = {}) {
    const int d = model.dim;
    if (rho0.dim() != d) throw std::invalid_argument("propagate_lindblad: dim mismatch");
    if (pulse.num_controls() != model.num_controls())
        throw std::invalid_argument("propagate_lindblad: control count mismatch");
    if (pulse.dt <= 0) throw std::invalid_argument("propagate_lindblad: non-positive dt");

    using Integ = PropagateOptions::Integrator;
    const bool use_exact =
        opts.integrator == Integ::Exact || (opts.integrator == Integ::Auto && d <= 32);

    TrajectoryRecord rec;
    rec.basis_id = model.basis_id;
    Mat rho = rho0.rho;
    const Mat& V = model.eigen_basis;

    double t = 0.0;
    bool stopped = false;
    auto record = [&](double tt, const Mat& rr) {
        rec.times.push_back(tt);
        rec.purity_series.push_back(rr.squaredNorm());
        rec.r_series.push_back(detail::eigenbasis_amplitudes(rr, V));
        if (opts.stop_distance > 0 &&
            (rec.r_series.back() - opts.stop_r_ref).norm() >= opts.stop_distance)
            stopped = true;
    };
    record(0.0, rho);
    if (opts.keep_states) {
        rec.states.push_back(rho);
        rec.state_times.push_back(0.0);
    }

    const double h0norm = model.h0_norm();
    for (int s = 0; s < pulse.n_seg() && !stopped; ++s) {
        const RVec u = pulse.values.row(s).transpose();
        double usum = 0.0, udiss = 0.0, udiss2 = 0.0;
        for (int k = 0; k < model.num_controls(); ++k) {
            usum += std::abs(u(k)) * model.lambda[static_cast<std::size_t>(k)];
            udiss += std::abs(u(k));
            udiss2 += std::abs(u(k)) * model.lambda[static_cast<std::size_t>(k)] *
                      model.lambda[static_cast<std::size_t>(k)];
        }
        const bool dissipative = pulse.eta > 0 && udiss > 0;

        if (!dissipative) {
            // unitary segment: exact d x d exponential
            Mat H = model.h0;
            for (int k = 0; k < model.num_controls(); ++k) H += u(k) * model.controls[k];
            Eigh e = stable_eigh(H);
            const int n_sub =
                opts.record_substeps
                    ? std::max(1, static_cast<int>(std::ceil(pulse.dt * 2 * (h0norm + usum) /
                                                             std::max(1e-12, opts.rk_theta))))
                    : 1;
            const double h = pulse.dt / n_sub;
            Vec ph(d);
            for (int i = 0; i < d; ++i) ph(i) = std::exp(cx(0, -e.values(i) * h));
            Mat U = e.vectors * ph.asDiagonal() * e.vectors.adjoint();
            for (int q = 0; q < n_sub && !stopped; ++q) {
                rho = U * rho * U.adjoint();
                if (opts.record_substeps && q + 1 < n_sub) record(t + (q + 1) * h, rho);
            }
        } else if (use_exact) {
            const Mat L = detail::liouvillian(model, u, pulse.eta);
            int n_sub = opts.record_substeps
                            ? std::max(1, static_cast<int>(std::ceil(
                                              pulse.dt * (2 * (h0norm + usum) + 8 * pulse.eta * udiss2) /
                                              std::max(1e-12, opts.rk_theta))))
                            : 1;
            const double h = pulse.dt / n_sub;
            const Mat E = (L * h).exp();
            for (int q = 0; q < n_sub && !stopped; ++q) {
                Eigen::Map<Vec> v(rho.data(), d * d);
                v = (E * v).eval();
                if (opts.record_substeps && q + 1 < n_sub) record(t + (q + 1) * h, rho);
            }
        } else {
            // RK4 with substeps sized so ||L|| h <= rk_theta
            Mat M = cx(0, 1) * model.h0;
            std::vector<std::pair<double, const Mat*>> kicks;
            for (int k = 0; k < model.num_controls(); ++k) {
                M += cx(0, u(k)) * model.controls[k];
                const double a = pulse.eta * std::abs(u(k));
                if (a > 0) {
                    M += a * (model.controls[k] * model.controls[k]);
                    kicks.emplace_back(2.0 * a, &model.controls[k]);
                }
            }
            auto applyL = [&](const Mat& r) -> Mat {
                Mat out = -(M * r + r * M.adjoint());
                for (const auto& [a, X] : kicks) out += a * ((*X) * r * (*X));
                return out;
            };
            const double lnorm = 2 * (h0norm + usum) + 8 * pulse.eta * udiss2;
            const int n_sub = std::max(
                1, static_cast<int>(std::ceil(pulse.dt * lnorm / std::max(1e-12, opts.rk_theta))));
            const double h = pulse.dt / n_sub;
            for (int q = 0; q < n_sub && !stopped; ++q) {
                const Mat k1 = applyL(rho);
                const Mat k2 = applyL(rho + 0.5 * h * k1);
                const Mat k3 = applyL(rho + 0.5 * h * k2);
                const Mat k4 = applyL(rho + h * k3);
                rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if (opts.record_substeps && q + 1 < n_sub) record(t + (q + 1) * h, rho);
            }
        }

        rho = 0.5 * (rho + rho.adjoint()).eval();  // roundoff hygiene
        t = (s + 1) * pulse.dt;
        if (!stopped) record(t, rho);
        if (opts.keep_states && (s + 1) % opts.state_stride == 0) {
            rec.states.push_back(rho);
            rec.state_times.push_back(t);
        }
    }
    return rec;
}

struct StochasticTrajectory {
    std::vector<double> times;
    std::vector<Vec> psis;  // states at segment boundaries, exactly normalized
};

// Unitary-kick unraveling: per substep h, exact segment unitary followed by
// independent kicks exp(-i dW_k X_k), dW_k ~ Normal(0, 2 eta |u_k| h).
inline StochasticTrajectory propagate_stochastic(const ModelSystem& model,
                                                 const ControlPulse& pulse, const Vec& psi0,
                                                 std::uint64_t seed, double h_max = 0.0) {
    const int d = model.dim;
    if (psi0.size() != d) throw std::invalid_argument("propagate_stochastic: dim mismatch");
    if (std::abs(psi0.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("propagate_stochastic: state not normalized");
    if (h_max > pulse.dt) throw std::invalid_argument("propagate_stochastic: h exceeds dt");

    // control eigendecompositions for the kick unitaries
    std::vector<Eigh> xe;
    xe.reserve(static_cast<std::size_t>(model.num_controls()));
    for (const auto& X : model.controls) xe.push_back(stable_eigh(X));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    StochasticTrajectory out;
    Vec psi = psi0;
    out.times.push_back(0.0);
    out.psis.push_back(psi);

    for (int s = 0; s < pulse.n_seg(); ++s) {
        const RVec u = pulse.values.row(s).transpose();
        Mat H = model.h0;
        double drive = model.h0_norm();
        for (int k = 0; k < model.num_controls(); ++k) {
            H += u(k) * model.controls[k];
            drive += std::abs(u(k)) * model.lambda[static_cast<std::size_t>(k)];
        }
        const double h_auto = 0.25 / std::max(1e-9, drive);
        const double h_tgt = (h_max > 0) ? h_max : std::min(pulse.dt, h_auto);
        const int n_sub = std::max(1, static_cast<int>(std::ceil(pulse.dt / h_tgt)));
        const double h = pulse.dt / n_sub;

        Eigh e = stable_eigh(H);
        Vec ph(d);
        for (int i = 0; i < d; ++i) ph(i) = std::exp(cx(0, -e.values(i) * h));
        const Mat Uh = e.vectors * ph.asDiagonal() * e.vectors.adjoint();

        for (int q = 0; q < n_sub; ++q) {
            psi = Uh * psi;
            for (int k = 0; k < model.num_controls(); ++k) {
                const double var = 2.0 * pulse.eta * std::abs(u(k)) * h;
                if (var <= 0.0) continue;
                const double dw = std::sqrt(var) * gauss(rng);
                Vec w = xe[static_cast<std::size_t>(k)].vectors.adjoint() * psi;
                for (int i = 0; i < d; ++i)
                    w(i) *= std::exp(cx(0, -dw * xe[static_cast<std::size_t>(k)].values(i)));
                psi = xe[static_cast<std::size_t>(k)].vectors * w;
            }
            psi /= psi.norm();
        }
        out.times.push_back((s + 1) * pulse.dt);
        out.psis.push_back(psi);
    }
    return out;
}

// Earliest time with ||r(t) - r_i|| = epsilon, scanning the recorded series
// and linearly interpolating inside the bracketing step.
inline std::optional<double> first_passage_time(const TrajectoryRecord& traj,
                                                const TransformationSpec& spec) {
    if (traj.basis_id != spec.psi_i.basis_id)
        throw std::invalid_argument("first_passage_time: basis mismatch");
    const RVec& r0 = spec.psi_i.r;
    double prev = 0.0;
    for (std::size_t i = 0; i < traj.r_series.size(); ++i) {
        const double dist = (traj.r_series[i] - r0).norm();
        if (dist >= spec.epsilon) {
            if (i == 0) return traj.times[0];
            const double t0 = traj.times[i - 1], t1 = traj.times[i];
            if (dist == prev) return t1;
            return t0 + (spec.epsilon - prev) / (dist - prev) * (t1 - t0);
        }
        prev = dist;
    }
    return std::nullopt;
}

// Purity linearly interpolated at time t from the recorded series.
inline double purity_at(const TrajectoryRecord& traj, double t) {
    if (traj.times.empty()) throw std::invalid_argument("purity_at: empty trajectory");
    if (t <= traj.times.front()) return traj.purity_series.front();
    for (std::size_t i = 1; i < traj.times.size(); ++i)
        if (traj.times[i] >= t) {
            const double t0 = traj.times[i - 1], t1 = traj.times[i];
            const double w = (t1 > t0) ? (t - t0) / (t1 - t0) : 1.0;
            return (1 - w) * traj.purity_series[i - 1] + w * traj.purity_series[i];
        }
    return traj.purity_series.back();
}

}  // namespace qcb
