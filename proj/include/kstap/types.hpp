#pragma once

#include <complex>
#include <utility>

#include <Eigen/Dense>

#include "kstap/errors.hpp"

namespace kstap {

using cxd = std::complex<double>;
using Index = Eigen::Index;

// Dense complex storage is column-major (Eigen default) repo-wide.
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Relative tolerance for accepting a matrix as Hermitian.
inline constexpr double kHermitianDriftTol = 1e-12;

/// Eigenvalues below this fraction of the leading magnitude are treated as
/// zero when truncating a psd matrix (guards psd under floating point).
inline constexpr double kEigClipRatio = 1e-10;

/// Dense Hermitian matrix. Construction checks the Hermitian drift against
/// `kHermitianDriftTol` and stores the symmetrized (M + M^H)/2. `is_psd` is
/// a hint carried by construction sites that guarantee it (sample
/// covariances, psd-preserving updates); it is not re-verified here.
struct HermitianMatrix {
    ComplexMatrix mat;
    bool is_psd = false;

    HermitianMatrix() = default;

    explicit HermitianMatrix(const ComplexMatrix& m, bool psd_hint = false,
                             double tol = kHermitianDriftTol)
        : is_psd(psd_hint) {
        if (m.rows() != m.cols())
            throw ArgumentError("HermitianMatrix: matrix must be square");
        const double drift = (m - m.adjoint()).norm();
        const double scale = m.norm();
        if (drift > tol * std::max(scale, 1e-300))
            throw ValidationError("HermitianMatrix: input exceeds Hermitian tolerance");
        mat = 0.5 * (m + m.adjoint());
    }

    /// Wrap a matrix that is Hermitian by construction (no drift check).
    static HermitianMatrix trusted(ComplexMatrix m, bool psd_hint = false) {
        HermitianMatrix h;
        h.mat = std::move(m);
        h.is_psd = psd_hint;
        return h;
    }

    Index dim() const { return mat.rows(); }
};

/// Eigendecomposition of a Hermitian matrix: real eigenvalues sorted
/// descending, matching orthonormal eigenvector columns.
struct EigenPairs {
    RealVector values;
    ComplexMatrix vectors;
};

} // namespace kstap
