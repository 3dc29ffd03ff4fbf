#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kstap/errors.hpp"
#include "kstap/linalg.hpp"
#include "kstap/types.hpp"

namespace kstap {

/// Training data: n vectorized range bins of length p*q. Vectorization is
/// antenna-major: entry i*q + k of a sample is antenna i, pulse k, so the
/// spatio-temporal covariance factors as A (x) B with A the p x p spatial
/// factor and B the q x q temporal factor.
struct SampleSet {
    Index p = 0;
    Index q = 0;
    std::vector<ComplexVector> samples;

    Index dim() const { return p * q; }
    Index count() const { return static_cast<Index>(samples.size()); }
};

/// Result of the low-rank Kronecker covariance fit. The estimate of the
/// clutter covariance is a_factor (x) b_factor with ||a_factor||_F = 1 and
/// the scale carried by b_factor; both factors are psd Hermitian with
/// rank(a_factor) <= r_a, rank(b_factor) <= r_b.
struct KronCovModel {
    HermitianMatrix a_factor; // p x p spatial factor, unit Frobenius norm
    HermitianMatrix b_factor; // q x q temporal factor, carries the scale
    Index r_a = 0;
    Index r_b = 0;
    std::vector<double> objective_trace; // ||S - A_k (x) B_k||_F^2, non-increasing
    bool converged = false;
    Index iterations = 0;
    Index effective_rank_a = 0; // numerical ranks of the returned factors
    Index effective_rank_b = 0;

    Index p() const { return a_factor.dim(); }
    Index q() const { return b_factor.dim(); }
    ComplexMatrix dense() const { return kron(a_factor.mat, b_factor.mat); }
};

/// Sample covariance matrix S = (1/n) sum x_m x_m^H.
inline HermitianMatrix sample_covariance(const SampleSet& data) {
    if (data.samples.empty())
        throw ArgumentError("sample_covariance: empty sample set");
    const Index d = data.dim();
    ComplexMatrix s = ComplexMatrix::Zero(d, d);
    const double w = 1.0 / static_cast<double>(data.count());
    for (const auto& x : data.samples) {
        if (x.size() != d)
            throw ArgumentError("sample_covariance: sample length mismatch");
        s.selfadjointView<Eigen::Lower>().rankUpdate(x, w);
    }
    s = ComplexMatrix(s.selfadjointView<Eigen::Lower>());
    return HermitianMatrix::trusted(0.5 * (s + s.adjoint()), /*psd_hint=*/true);
}

namespace detail {

// Remove the global phase that makes `raw` fail to be Hermitian. For a
// Hermitian input to the rearranged fit the leading singular pair satisfies
// raw = e^{i psi} H with H Hermitian; psi is recovered from
// trace(raw * raw) = e^{2 i psi} ||H||_F^2.
inline ComplexMatrix phase_align_hermitian(const ComplexMatrix& raw) {
    const cxd t = (raw * raw).trace();
    cxd rot(1.0, 0.0);
    if (std::abs(t) > 0.0) rot = std::exp(cxd(0.0, -0.5 * std::arg(t)));
    ComplexMatrix h = rot * raw;
    return 0.5 * (h + h.adjoint());
}

} // namespace detail

/// Closed-form unconstrained Kronecker fit: the leading singular component
/// sigma_1 u_1 v_1^H of rearrange(S) de-rearranges to the nearest (in
/// Frobenius norm) Kronecker product A (x) B. Returned with ||A||_F = 1,
/// both factors Hermitian (phase-aligned; possible because S is Hermitian).
inline std::pair<HermitianMatrix, HermitianMatrix>
kron_fit_unconstrained(const HermitianMatrix& s, Index p, Index q) {
    const ComplexMatrix r = rearrange(s.mat, p, q);
    const double rnorm = r.norm();
    if (rnorm == 0.0)
        throw DegenerateInputError("kron_fit_unconstrained: rearranged matrix is zero");

    // Leading singular pair via the small p^2 x p^2 Gram matrix.
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> gram(r * r.adjoint());
    const Index top = p * p - 1;
    const ComplexVector u = gram.eigenvectors().col(top);
    const ComplexVector vb = (r.adjoint() * u).conjugate(); // sigma_1 * conj(v_1)

    ComplexMatrix a_raw(p, p);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
            a_raw(i, j) = u(i * p + j);
    ComplexMatrix b_raw(q, q);
    for (Index n = 0; n < q; ++n)
        for (Index m = 0; m < q; ++m)
            b_raw(m, n) = vb(n * q + m);

    // kron(a_raw, b_raw) equals rearrange_inv(u * vb^T), the de-rearranged
    // leading singular component. Phase alignment resolves each factor's
    // global phase only up to +-1; pick the sign of b that restores the
    // product, then orient a psd-leaning.
    ComplexMatrix a = detail::phase_align_hermitian(a_raw);
    ComplexMatrix b = detail::phase_align_hermitian(b_raw);
    const ComplexMatrix target = rearrange_inv(ComplexMatrix(u * vb.transpose()), p, q);
    const ComplexMatrix prod = kron(a, b);
    if ((prod - target).norm() > (prod + target).norm()) b = -b;
    if (a.trace().real() < 0.0) { a = -a; b = -b; }

    const double ca = a.norm();
    if (ca == 0.0)
        throw DegenerateInputError("kron_fit_unconstrained: degenerate leading component");
    a /= ca;
    b *= ca; // b_raw already carries sigma_1
    const bool psd = s.is_psd;
    return {HermitianMatrix::trusted(std::move(a), psd),
            HermitianMatrix::trusted(std::move(b), psd)};
}

/// Least-squares temporal factor given the spatial factor:
/// R_B = sum_{ij} conj(a_ij) block(S, i, j) / ||A||_F^2, the minimizer of
/// ||S - A (x) B||_F over unconstrained B.
inline HermitianMatrix contract_for_b(const HermitianMatrix& s, const HermitianMatrix& a) {
    const Index p = a.dim();
    const double a2 = a.mat.squaredNorm();
    if (a2 == 0.0)
        throw DegenerateInputError("contract_for_b: zero spatial factor");
    if (s.dim() % p != 0)
        throw ArgumentError("contract_for_b: dimension mismatch");
    const Index q = s.dim() / p;
    ComplexMatrix rb = ComplexMatrix::Zero(q, q);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) {
            const cxd w = std::conj(a.mat(i, j));
            if (w != cxd(0.0, 0.0))
                rb.noalias() += w * s.mat.block(i * q, j * q, q, q);
        }
    rb /= a2;
    return HermitianMatrix::trusted(0.5 * (rb + rb.adjoint()), s.is_psd && a.is_psd);
}

/// Least-squares spatial factor given the temporal factor:
/// R_A[i,j] = <B, block(S, i, j)>_F / ||B||_F^2.
inline HermitianMatrix contract_for_a(const HermitianMatrix& s, const HermitianMatrix& b) {
    const Index q = b.dim();
    const double b2 = b.mat.squaredNorm();
    if (b2 == 0.0)
        throw DegenerateInputError("contract_for_a: zero temporal factor");
    if (s.dim() % q != 0)
        throw ArgumentError("contract_for_a: dimension mismatch");
    const Index p = s.dim() / q;
    ComplexMatrix ra(p, p);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
            ra(i, j) = (b.mat.conjugate().cwiseProduct(s.mat.block(i * q, j * q, q, q))).sum() / b2;
    return HermitianMatrix::trusted(0.5 * (ra + ra.adjoint()), s.is_psd && b.is_psd);
}

/// Options and defaults for `lr_kron`.
struct LrKronOptions {
    double tol = 1e-8;    // relative objective-decrease stopping threshold
    Index max_iter = 200;
};

namespace detail {

inline void check_psd(const HermitianMatrix& s, const char* who) {
    if (s.is_psd) return; // construction site guarantees it
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(s.mat, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo < -1e-10 * std::max(hi, 0.0))
        throw ValidationError(std::string(who) + ": input is not psd within tolerance");
}

} // namespace detail

/// Low-rank Kronecker covariance estimation: alternating minimization of
/// ||S - A (x) B||_F^2 subject to rank(A) <= r_a, rank(B) <= r_b, both psd.
/// Initialized from the rank-truncated closed-form fit, then alternates
///   B <- EIG_rb(contract_for_b(S, A)),  A <- EIG_ra(contract_for_a(S, B)),
/// renormalizing ||A||_F = 1 each pass. Each half step is the exact
/// coordinate minimizer, so the objective trace is non-increasing;
/// objective_trace[0] is the truncated closed-form baseline.
inline KronCovModel lr_kron(const HermitianMatrix& s, Index p, Index q,
                            Index r_a, Index r_b,
                            double tol = 1e-8, Index max_iter = 200) {
    if (s.dim() != p * q)
        throw ArgumentError("lr_kron: covariance is not (p*q) x (p*q)");
    if (r_a < 1 || r_a > p || r_b < 1 || r_b > q)
        throw ArgumentError("lr_kron: ranks out of range");
    if (tol <= 0.0 || max_iter < 1)
        throw ArgumentError("lr_kron: tol must be positive, max_iter >= 1");
    if (s.mat.norm() == 0.0)
        throw DegenerateInputError("lr_kron: all-zero covariance");
    detail::check_psd(s, "lr_kron");

    auto [a_unc, b_unc] = kron_fit_unconstrained(s, p, q);
    HermitianMatrix a = eig_truncate(a_unc, r_a);
    HermitianMatrix b = eig_truncate(b_unc, r_b);
    {
        const double ca = a.mat.norm();
        if (ca > 0.0) { a.mat /= ca; b.mat *= ca; }
    }

    KronCovModel model;
    model.r_a = r_a;
    model.r_b = r_b;
    auto objective = [&](const HermitianMatrix& af, const HermitianMatrix& bf) {
        return (s.mat - kron(af.mat, bf.mat)).squaredNorm();
    };
    model.objective_trace.push_back(objective(a, b));

    // Convergence is judged on the relative objective decrease; the floor
    // keeps the ratio meaningful when the fit is exact from the start.
    const double denom = std::max(model.objective_trace.front(),
                                  std::numeric_limits<double>::epsilon() * s.mat.squaredNorm());
    for (Index k = 1; k <= max_iter; ++k) {
        HermitianMatrix b_next = eig_truncate(contract_for_b(s, a), r_b);
        if (b_next.mat.norm() == 0.0) break; // degenerate corner; keep last iterate
        HermitianMatrix a_next = eig_truncate(contract_for_a(s, b_next), r_a);
        const double ca = a_next.mat.norm();
        if (ca == 0.0) break;
        a_next.mat /= ca;
        b_next.mat *= ca;
        a = std::move(a_next);
        b = std::move(b_next);
        model.objective_trace.push_back(objective(a, b));
        model.iterations = k;
        const double prev = model.objective_trace[static_cast<size_t>(k) - 1];
        const double cur = model.objective_trace.back();
        if (std::abs(prev - cur) / denom < tol) {
            model.converged = true;
            break;
        }
    }

    auto effective_rank = [](const HermitianMatrix& m) {
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(m.mat, Eigen::EigenvaluesOnly);
        const double lead = eig.eigenvalues().cwiseAbs().maxCoeff();
        Index r = 0;
        for (Index i = 0; i < m.dim(); ++i)
            if (std::abs(eig.eigenvalues()(i)) > 1e-9 * lead) ++r;
        return r;
    };
    model.a_factor = std::move(a);
    model.b_factor = std::move(b);
    model.effective_rank_a = effective_rank(model.a_factor);
    model.effective_rank_b = effective_rank(model.b_factor);
    return model;
}

} // namespace kstap
