#pragma once

// Pure states as amplitude/phase vectors in the H0 eigenbasis, density
// matrices, purity / variance / purity-loss-rate, and the auxiliary
// sign operator used by the transformation bounds.

#include "qcb/spinalg.hpp"

#include <cmath>
#include <numbers>
#include <optional>

namespace qcb {

inline constexpr double amp_gauge_tol = 1e-12;

struct AmplitudePhaseState {
    RVec r;    // nonnegative amplitudes, ||r|| = 1
    RVec phi;  // phases in [0, 2pi); first index with r > tol has phi = 0
    std::uint64_t basis_id = 0;

    int dim() const { return static_cast<int>(r.size()); }
};

inline double wrap_phase(double p) {
    const double twopi = 2.0 * std::numbers::pi;
    p = std::fmod(p, twopi);
    if (p < 0) p += twopi;
    if (p >= twopi) p -= twopi;
    return p;
}

// Expand psi in the model eigenbasis; gauge-fix the global phase so the
// first non-negligible amplitude has phase 0.
inline AmplitudePhaseState to_eigenbasis(const Vec& psi, const ModelSystem& model) {
    if (psi.size() != model.dim) throw std::invalid_argument("to_eigenbasis: dim mismatch");
    if (std::abs(psi.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("to_eigenbasis: state not normalized");
    Vec c = model.eigen_basis.adjoint() * psi;
    const int d = model.dim;
    AmplitudePhaseState s;
    s.r = c.cwiseAbs();
    s.phi = RVec::Zero(d);
    s.basis_id = model.basis_id;
    int ref = -1;
    for (int n = 0; n < d; ++n)
        if (s.r(n) > amp_gauge_tol) { ref = n; break; }
    if (ref < 0) throw std::invalid_argument("to_eigenbasis: zero state");
    const cx g = std::conj(c(ref)) / std::abs(c(ref));
    for (int n = 0; n < d; ++n)
        s.phi(n) = (s.r(n) > amp_gauge_tol) ? wrap_phase(std::arg(c(n) * g)) : 0.0;
    return s;
}

// Reassemble the state vector sum_n r_n e^{i phi_n} |n>.
inline Vec state_vector(const AmplitudePhaseState& s, const ModelSystem& model) {
    if (s.basis_id != model.basis_id)
        throw std::invalid_argument("state_vector: basis mismatch");
    Vec c(s.dim());
    for (int n = 0; n < s.dim(); ++n) c(n) = s.r(n) * std::exp(cx(0, s.phi(n)));
    return model.eigen_basis * c;
}

inline AmplitudePhaseState amplitude_state(const RVec& r, const ModelSystem& model) {
    AmplitudePhaseState s;
    s.r = r / r.norm();
    s.phi = RVec::Zero(r.size());
    s.basis_id = model.basis_id;
    return s;
}

struct DensityMatrix {
    Mat rho;

    int dim() const { return static_cast<int>(rho.rows()); }
    double purity() const { return (rho * rho).trace().real(); }
    static DensityMatrix pure(const Vec& psi) { return {psi * psi.adjoint()}; }
    bool valid(double tol = 1e-10) const {
        if (rho.rows() != rho.cols()) return false;
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
        if (std::abs(rho.trace().real() - 1.0) > tol || std::abs(rho.trace().imag()) > tol)
            return false;
        Eigen::SelfAdjointEigenSolver<Mat> es(rho, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff() >= -1e-8;
    }
};

inline double purity(const DensityMatrix& dm) {
    return (dm.rho * dm.rho).trace().real();
}

inline double variance(const Mat& x, const Vec& psi) {
    if (x.rows() != psi.size()) throw std::invalid_argument("variance: dim mismatch");
    const Vec xpsi = x * psi;
    const double ex = std::real(psi.dot(xpsi));
    const double ex2 = std::real(xpsi.dot(xpsi));  // <psi|X^2|psi>, X Hermitian
    return std::max(0.0, ex2 - ex * ex);
}

inline double variance(const Mat& x, const AmplitudePhaseState& s, const ModelSystem& model) {
    return variance(x, state_vector(s, model));
}

// Gamma = 4 eta sum_{k: u_k != 0} |u_k| Var(X_k, psi)   (instantaneous rate)
inline double purity_loss_rate(const ModelSystem& model, const std::vector<double>& u,
                               const Vec& psi, double eta) {
    if (static_cast<int>(u.size()) != model.num_controls())
        throw std::invalid_argument("purity_loss_rate: control count mismatch");
    double g = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k)
        if (u[k] != 0.0) g += std::abs(u[k]) * variance(model.controls[k], psi);
    return 4.0 * eta * g;
}

inline double purity_loss_rate(const ModelSystem& model, const std::vector<double>& u,
                               const AmplitudePhaseState& s, double eta) {
    return purity_loss_rate(model, u, state_vector(s, model), eta);
}

struct TransformationSpec {
    AmplitudePhaseState psi_i;
    AmplitudePhaseState psi_f;
    double epsilon = 0.0;
};

inline double delta_r_norm(const TransformationSpec& spec) {
    if (spec.psi_i.basis_id != spec.psi_f.basis_id)
        throw std::invalid_argument("delta_r_norm: basis mismatch");
    return (spec.psi_f.r - spec.psi_i.r).norm();
}

// A = V diag(sign(Delta r_n)) V^dagger with sign(0) := +1; diagonal in the
// H0 eigenbasis, so [A, H0] = 0 by construction.
inline Mat aux_operator(const TransformationSpec& spec, const ModelSystem& model) {
    if (spec.psi_i.basis_id != model.basis_id || spec.psi_f.basis_id != model.basis_id)
        throw std::invalid_argument("aux_operator: basis mismatch");
    const int d = model.dim;
    RVec s(d);
    for (int n = 0; n < d; ++n)
        s(n) = (spec.psi_f.r(n) - spec.psi_i.r(n) >= 0.0) ? 1.0 : -1.0;
    return model.eigen_basis * s.asDiagonal() * model.eigen_basis.adjoint();
}

// Witness states in the computational (Jz) basis, m = j ... -j.
inline Vec ghz_like_state(int N) {
    const int d = N + 1;
    Vec v = Vec::Zero(d);
    v(0) = v(d - 1) = 1.0 / std::sqrt(2.0);
    return v;
}

// Rotation of |j,j> by exp(-i theta Jy): spin-coherent state at polar angle theta.
inline Vec spin_coherent_state(int N, double theta) {
    const Su2 J = su2_generators(N);
    Eigh e = stable_eigh(J.jy);
    Vec top = Vec::Zero(N + 1);
    top(0) = 1.0;
    Vec w = e.vectors.adjoint() * top;
    for (int i = 0; i <= N; ++i) w(i) *= std::exp(cx(0, -theta * e.values(i)));
    return e.vectors * w;
}

}  // namespace qcb
