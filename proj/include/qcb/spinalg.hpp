#pragma once

// su(2) generators, the double-well model system, and the Lie-algebra
// closure rank used as the controllability check.

#include "qcb/operator.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace qcb {

struct Su2 {
    Mat jx, jy, jz;
};

// Spin j = N/2 angular momentum matrices, dimension d = N+1, basis ordered
// m = j, j-1, ..., -j.
inline Su2 su2_generators(int N) {
    if (N < 1) throw std::invalid_argument("su2_generators: N must be >= 1");
    const int d = N + 1;
    const double j = 0.5 * N;
    Mat jz = Mat::Zero(d, d), jp = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) jz(i, i) = j - i;
    for (int i = 1; i < d; ++i) {
        const double m = j - i;  // J+ |j,m> = sqrt(j(j+1) - m(m+1)) |j,m+1>
        jp(i - 1, i) = std::sqrt(j * (j + 1) - m * (m + 1));
    }
    Mat jm = jp.adjoint();
    Su2 out;
    out.jz = jz;
    out.jx = 0.5 * (jp + jm);
    out.jy = cx(0, -0.5) * (jp - jm);
    return out;
}

struct ModelSystem {
    int dim = 0;         // d = N + 1
    int size_param = 0;  // N
    Mat h0;
    std::vector<Mat> controls;     // X_k
    std::vector<double> lambda;    // max-abs eigenvalue of each X_k
    Mat eigen_basis;               // V, columns = H0 eigenvectors (ascending)
    RVec eigen_values;
    std::uint64_t basis_id = 0;

    int num_controls() const { return static_cast<int>(controls.size()); }
    double h0_norm() const {
        return std::max(std::abs(eigen_values(0)), std::abs(eigen_values(dim - 1)));
    }
};

inline ModelSystem make_model(int N, const Mat& h0, std::vector<Mat> controls) {
    ModelSystem m;
    m.dim = static_cast<int>(h0.rows());
    m.size_param = N;
    m.h0 = h0;
    m.controls = std::move(controls);
    for (const auto& x : m.controls) {
        if (x.rows() != h0.rows()) throw std::invalid_argument("make_model: control dim mismatch");
        m.lambda.push_back(max_abs_eigenvalue(x));
    }
    Eigh e = stable_eigh(h0);
    m.eigen_basis = e.vectors;
    m.eigen_values = e.values;
    m.basis_id = hash_matrix(m.eigen_basis,
                             fnv1a(m.eigen_values.data(),
                                   sizeof(double) * static_cast<std::size_t>(m.eigen_values.size())));
    return m;
}

// h0 = -omega Jx + delta Jz + (U/N) Jz^2, controls {Jx, Jz}.
inline ModelSystem double_well_model(int N, double omega, double delta, double u_int) {
    if (N < 1) throw std::invalid_argument("double_well_model: N must be >= 1");
    Su2 J = su2_generators(N);
    Mat h0 = -omega * J.jx + delta * J.jz + (u_int / N) * (J.jz * J.jz);
    return make_model(N, h0, {J.jx, J.jz});
}

// Dimension of the real Lie algebra generated by the traceless parts of
// {i h0, i X_k} under repeated commutators.  Incremental Gram-Schmidt over
// anti-Hermitian matrices with relative tolerance 1e-9; early exit at the
// traceless cap d^2 - 1.
inline int lie_closure_rank(const ModelSystem& model, double tol = 1e-9) {
    const int d = model.dim;
    const int cap = d * d - 1;
    const cx I1(0, 1);

    auto traceless = [d](const Mat& a) -> Mat {
        return a - (a.trace() / static_cast<double>(d)) * Mat::Identity(d, d);
    };

    std::vector<Mat> basis;  // orthonormal, Frobenius inner product
    auto add = [&](Mat cand) -> bool {
        double n0 = cand.norm();
        if (n0 < 1e-14) return false;
        cand /= n0;
        for (int rep = 0; rep < 2; ++rep)
            for (const auto& b : basis) {
                const cx ip = (b.adjoint() * cand).trace();
                cand -= ip * b;
            }
        const double nr = cand.norm();
        if (nr <= tol) return false;
        basis.push_back(cand / nr);
        return true;
    };

    add(I1 * traceless(model.h0));
    for (const auto& x : model.controls) add(I1 * traceless(x));

    // round-based frontier: pair each new element against everything older
    std::size_t lo = 0;
    while (lo < basis.size() && static_cast<int>(basis.size()) < cap) {
        const std::size_t hi = basis.size();
        for (std::size_t i = lo; i < hi && static_cast<int>(basis.size()) < cap; ++i)
            for (std::size_t j = 0; j < i && static_cast<int>(basis.size()) < cap; ++j)
                add(commutator(basis[i], basis[j]));
        lo = hi;
    }
    return static_cast<int>(basis.size());
}

}  // namespace qcb
