#pragma once

// Dense complex operator utilities: Hermiticity checks, commutators,
// extremal eigenvalues, and a deterministic Hermitian eigendecomposition.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qcb {

using cx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t hash_matrix(const Mat& m, std::uint64_t h = 1469598103934665603ull) {
    return fnv1a(m.data(), sizeof(cx) * static_cast<std::size_t>(m.size()), h);
}

inline bool is_hermitian(const Mat& a, double tol = 1e-12) {
    if (a.rows() != a.cols()) return false;
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline Mat commutator(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
        throw std::invalid_argument("commutator: dimension mismatch");
    return a * b - b * a;
}

inline double max_abs_eigenvalue(const Mat& x) {
    if (!is_hermitian(x, 1e-10))
        throw std::invalid_argument("max_abs_eigenvalue: operator not Hermitian");
    Eigen::SelfAdjointEigenSolver<Mat> es(x, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct Eigh {
    RVec values;   // ascending
    Mat vectors;   // columns are eigenvectors, deterministic basis
};

// Hermitian eigendecomposition with run-to-run stable output: ascending
// eigenvalues; numerically degenerate clusters (gap < 1e-9 * spectral range)
// are re-spanned by Gram-Schmidt seeded from the canonical basis; every
// column's phase is fixed by making its largest-magnitude entry real positive.
inline Eigh stable_eigh(const Mat& h) {
    if (!is_hermitian(h, 1e-10))
        throw std::invalid_argument("stable_eigh: operator not Hermitian");
    const int d = static_cast<int>(h.rows());
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    RVec vals = es.eigenvalues();
    Mat vecs = es.eigenvectors();

    const double range = vals(d - 1) - vals(0);
    if (range <= 0.0) {
        // h is a multiple of the identity; the canonical basis is an eigenbasis.
        return {vals, Mat::Identity(d, d)};
    }
    const double thr = 1e-9 * range;

    int a = 0;
    while (a < d) {
        int b = a + 1;
        while (b < d && vals(b) - vals(b - 1) < thr) ++b;
        const int k = b - a;
        if (k > 1) {
            // deterministic re-span of the degenerate subspace
            Mat sub = vecs.middleCols(a, k);
            Mat proj = sub * sub.adjoint();
            Mat cols(d, k);
            int got = 0;
            for (int j = 0; j < d && got < k; ++j) {
                Vec w = proj.col(j);
                for (int rep = 0; rep < 2; ++rep)
                    for (int c = 0; c < got; ++c) w -= cols.col(c).dot(w) * cols.col(c);
                const double nw = w.norm();
                if (nw > 1e-6) cols.col(got++) = w / nw;
            }
            if (got == k) vecs.middleCols(a, k) = cols;
        }
        a = b;
    }

    for (int c = 0; c < d; ++c) {
        int imax = 0;
        double best = -1.0;
        for (int i = 0; i < d; ++i) {
            const double m = std::abs(vecs(i, c));
            if (m > best) { best = m; imax = i; }
        }
        const cx v = vecs(imax, c);
        if (std::abs(v) > 0.0) vecs.col(c) *= std::conj(v) / std::abs(v);
    }
    return {vals, vecs};
}

inline Mat dagger(const Mat& a) { return a.adjoint(); }

}  // namespace qcb
