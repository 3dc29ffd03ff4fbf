#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "kstap/errors.hpp"
#include "kstap/types.hpp"

namespace kstap {

/// Largest admissible dimension of a Kronecker product result.
inline constexpr Index kMaxKronDim = Index(1) << 16;

/// Kronecker product: out[(i*q + m), (j*n + ...)] = a(i,j) * b(m,n).
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.size() == 0 || b.size() == 0)
        throw ArgumentError("kron: operands must be non-empty");
    if (a.rows() > kMaxKronDim / b.rows() || a.cols() > kMaxKronDim / b.cols())
        throw SizingError("kron: result dimensions exceed kMaxKronDim");
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline ComplexVector kron(const ComplexVector& a, const ComplexVector& b) {
    ComplexVector out(a.size() * b.size());
    for (Index i = 0; i < a.size(); ++i)
        out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
inline EigenPairs hermitian_eig(const HermitianMatrix& m) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(m.mat);
    if (solver.info() != Eigen::Success)
        throw ValidationError("hermitian_eig: eigensolver failed to converge");
    const Index n = m.dim();
    EigenPairs out;
    out.values = solver.eigenvalues().reverse();
    out.vectors.resize(n, n);
    for (Index i = 0; i < n; ++i)
        out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    return out;
}

/// Truncate to the r principal components of largest eigenvalue magnitude.
/// For psd inputs, eigenvalues below kEigClipRatio times the leading
/// magnitude are zeroed first, so the output stays psd.
inline HermitianMatrix eig_truncate(const HermitianMatrix& m, Index r) {
    if (r < 0 || r > m.dim())
        throw ArgumentError("eig_truncate: rank out of range");
    EigenPairs eig = hermitian_eig(m);
    RealVector vals = eig.values;
    const double magmax = vals.size() ? vals.cwiseAbs().maxCoeff() : 0.0;
    if (m.is_psd) {
        for (Index i = 0; i < vals.size(); ++i)
            if (vals(i) < kEigClipRatio * magmax) vals(i) = 0.0;
    }
    std::vector<Index> order(static_cast<size_t>(vals.size()));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return std::abs(vals(a)) > std::abs(vals(b));
    });
    ComplexMatrix out = ComplexMatrix::Zero(m.dim(), m.dim());
    for (Index k = 0; k < r; ++k) {
        const Index i = order[static_cast<size_t>(k)];
        if (vals(i) == 0.0) continue;
        out.selfadjointView<Eigen::Lower>().rankUpdate(eig.vectors.col(i), vals(i));
    }
    out = ComplexMatrix(out.selfadjointView<Eigen::Lower>());
    return HermitianMatrix::trusted(0.5 * (out + out.adjoint()), m.is_psd);
}

/// q x q block at block position (i, j) of a (p*q) x (p*q) matrix,
/// 0-based block indices.
inline ComplexMatrix block(const ComplexMatrix& m, Index i, Index j, Index p, Index q) {
    if (m.rows() != p * q || m.cols() != p * q)
        throw ArgumentError("block: matrix is not (p*q) x (p*q)");
    if (i < 0 || i >= p || j < 0 || j >= p)
        throw ArgumentError("block: block index out of range");
    return m.block(i * q, j * q, q, q);
}

/// Pitsianis-VanLoan rearrangement: maps a (p*q) x (p*q) matrix to the
/// p^2 x q^2 matrix whose row i*p + j is vec(block(i, j))^T (column-major
/// vec). A Kronecker product A (x) B rearranges to the rank-one matrix
/// rowvec(A) vec(B)^T; the map is a bijective entry permutation, hence
/// Frobenius-isometric.
inline ComplexMatrix rearrange(const ComplexMatrix& m, Index p, Index q) {
    if (m.rows() != p * q || m.cols() != p * q)
        throw ArgumentError("rearrange: matrix is not (p*q) x (p*q)");
    ComplexMatrix out(p * p, q * q);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
            for (Index n = 0; n < q; ++n)
                for (Index mm = 0; mm < q; ++mm)
                    out(i * p + j, n * q + mm) = m(i * q + mm, j * q + n);
    return out;
}

/// Inverse of `rearrange`; exact entry permutation round trip.
inline ComplexMatrix rearrange_inv(const ComplexMatrix& m, Index p, Index q) {
    if (m.rows() != p * p || m.cols() != q * q)
        throw ArgumentError("rearrange_inv: matrix is not p^2 x q^2");
    ComplexMatrix out(p * q, p * q);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
            for (Index n = 0; n < q; ++n)
                for (Index mm = 0; mm < q; ++mm)
                    out(i * q + mm, j * q + n) = m(i * p + j, n * q + mm);
    return out;
}

/// Distance between the subspaces spanned by the (orthonormal) columns of
/// U and V: ||U U^H - V V^H||_F. Eigenvector comparisons go through this,
/// never through entries, since eigenbases of degenerate eigenvalues are
/// unique only as subspaces.
inline double projector_distance(const ComplexMatrix& u, const ComplexMatrix& v) {
    return (u * u.adjoint() - v * v.adjoint()).norm();
}

} // namespace kstap
