#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "kstap/covariance.hpp"
#include "kstap/errors.hpp"
#include "kstap/filters.hpp"
#include "kstap/types.hpp"

namespace kstap {

/// Output signal-to-interference-plus-noise ratio of filter vector w for a
/// target alpha * d against total covariance Sigma:
/// |alpha|^2 |w^H d|^2 / (w^H Sigma w).
inline double sinr(const ComplexVector& w, const SteeringVector& d, cxd alpha,
                   const HermitianMatrix& sigma_total) {
    if (w.size() != sigma_total.dim())
        throw ArgumentError("sinr: dimension mismatch");
    if (w.norm() == 0.0) throw ArgumentError("sinr: w must be non-zero");
    const double denom = (w.adjoint() * sigma_total.mat * w).real()(0, 0);
    if (denom <= 0.0)
        throw ValidationError("sinr: w^H Sigma w <= 0 (Sigma must be positive definite)");
    const double num = std::norm(alpha) * std::norm((w.adjoint() * d.full())(0, 0));
    return num / denom;
}

struct SinrLossDiag {
    bool target_cancelled = false;
};

/// Caches the factorization of a fixed positive definite Sigma so SINR-loss
/// evaluations across many trials stay cheap.
class SinrLossEvaluator {
public:
    explicit SinrLossEvaluator(const HermitianMatrix& sigma_total)
        : sigma_(sigma_total), llt_(sigma_total.mat) {
        if (llt_.info() != Eigen::Success)
            throw ValidationError("SinrLossEvaluator: Sigma is not positive definite");
    }

    /// rho = SINR_out / SINR_max in (0, 1]; SINR_max is attained by
    /// w_opt = Sigma^{-1} d. Returns 0 (with diagnostic) if F d vanishes.
    double operator()(const StapFilter& f, const SteeringVector& d,
                      SinrLossDiag* diag = nullptr) const {
        const ComplexVector dv = d.full();
        const ComplexVector w = apply_filter(f, dv);
        const double sinr_max = (dv.adjoint() * llt_.solve(dv)).real()(0, 0);
        const double wd2 = std::norm((w.adjoint() * dv)(0, 0));
        if (w.norm() == 0.0 || wd2 == 0.0) {
            if (diag) diag->target_cancelled = true;
            return 0.0;
        }
        const double denom = (w.adjoint() * sigma_.mat * w).real()(0, 0);
        double rho = wd2 / denom / sinr_max;
        if (rho > 1.0 && rho < 1.0 + 1e-9) rho = 1.0; // round-off guard
        return rho;
    }

    const HermitianMatrix& sigma() const { return sigma_; }

private:
    HermitianMatrix sigma_;
    Eigen::LLT<ComplexMatrix> llt_;
};

inline double sinr_loss(const StapFilter& f, const SteeringVector& d,
                        const HermitianMatrix& sigma_total, SinrLossDiag* diag = nullptr) {
    return SinrLossEvaluator(sigma_total)(f, d, diag);
}

enum class TheoryMethod { LowRank, KronSpatial, KronTemporalGivenH };

struct TheoryParams {
    double r = 0.0;     // LowRank: principal components used
    double n = 0.0;     // training sample count
    double r_b = 0.0;   // KronTemporalGivenH: temporal rank
    double kappa = 0.0; // KronTemporalGivenH: spatial-mismatch ratio
};

/// Closed-form large-n, small-noise SINR-loss asymptotics:
///   LowRank            1 - r/n
///   KronSpatial        1 - 1/n
///   KronTemporalGivenH 1 - kappa * r_b / n
inline double theory_sinr_loss(TheoryMethod method, const TheoryParams& p) {
    if (p.n <= 0.0) throw ArgumentError("theory_sinr_loss: n must be > 0");
    switch (method) {
        case TheoryMethod::LowRank: return 1.0 - p.r / p.n;
        case TheoryMethod::KronSpatial: return 1.0 - 1.0 / p.n;
        case TheoryMethod::KronTemporalGivenH: return 1.0 - p.kappa * p.r_b / p.n;
    }
    throw ArgumentError("theory_sinr_loss: unknown method");
}

/// Spatial-mismatch ratio kappa = d~^H A d~ / (h~^H A h~) with
/// d~ = (I - h~ h~^H) d_A normalized: the clutter energy left after the
/// rank-one spatial stage, relative to the energy it cancels.
inline double kappa(const HermitianMatrix& a_true, const ComplexVector& h_tilde,
                    const ComplexVector& d_a) {
    if (h_tilde.size() != a_true.dim() || d_a.size() != a_true.dim())
        throw ArgumentError("kappa: dimension mismatch");
    const ComplexVector h = h_tilde / h_tilde.norm();
    ComplexVector dt = d_a - h * (h.adjoint() * d_a);
    const double nd = dt.norm();
    if (nd < 1e-14 * d_a.norm())
        throw DegenerateInputError("kappa: steering parallel to spatial subspace");
    dt /= nd;
    const double num = (dt.adjoint() * a_true.mat * dt).real()(0, 0);
    const double den = (h.adjoint() * a_true.mat * h).real()(0, 0);
    if (den <= 0.0) throw ValidationError("kappa: h~^H A h~ must be positive");
    return std::max(num / den, 0.0);
}

struct NaiveSpatialEstimate {
    double psi = 0.0;
    ComplexVector h_hat;
    bool degenerate = false; // leading eigenvalue not separated
};

/// Rank-one spatial estimate from the pulse-averaged spatial covariance
/// T[i,j] = (1/q) sum_k S[(i*q + k), (j*q + k)]: returns the leading
/// eigenpair (psi, h) of T.
inline NaiveSpatialEstimate naive_spatial_estimate(const HermitianMatrix& s, Index p, Index q) {
    if (s.dim() != p * q)
        throw ArgumentError("naive_spatial_estimate: covariance is not (p*q) x (p*q)");
    ComplexMatrix t(p, p);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) {
            cxd acc(0.0, 0.0);
            for (Index k = 0; k < q; ++k) acc += s.mat(i * q + k, j * q + k);
            t(i, j) = acc / static_cast<double>(q);
        }
    const EigenPairs eig = hermitian_eig(HermitianMatrix::trusted(0.5 * (t + t.adjoint()), s.is_psd));
    NaiveSpatialEstimate out;
    out.psi = eig.values(0);
    out.h_hat = eig.vectors.col(0);
    if (p > 1) {
        const double gap = eig.values(0) - eig.values(1);
        out.degenerate = gap <= 1e-9 * std::max(std::abs(eig.values(0)), 1e-300);
    }
    return out;
}

/// Mean squared residual (1/M) sum ||F x_m||^2 over a test set.
inline double ms_residual(const StapFilter& f, const SampleSet& test) {
    if (test.samples.empty())
        throw ArgumentError("ms_residual: empty test set");
    double acc = 0.0;
    for (const auto& x : test.samples) acc += apply_filter(f, x).squaredNorm();
    return acc / static_cast<double>(test.count());
}

/// Mann-Whitney AUC estimate: fraction of (h1, h0) pairs with h1 > h0,
/// ties counted one half.
inline double roc_auc(const std::vector<double>& h0_scores, const std::vector<double>& h1_scores) {
    if (h0_scores.empty() || h1_scores.empty())
        throw ArgumentError("roc_auc: both score lists must be non-empty");
    std::vector<double> h0 = h0_scores;
    std::sort(h0.begin(), h0.end());
    double wins = 0.0;
    for (double s : h1_scores) {
        const auto lo = std::lower_bound(h0.begin(), h0.end(), s);
        const auto hi = std::upper_bound(h0.begin(), h0.end(), s);
        wins += static_cast<double>(lo - h0.begin()) + 0.5 * static_cast<double>(hi - lo);
    }
    return wins / (static_cast<double>(h0.size()) * static_cast<double>(h1_scores.size()));
}

/// RMS of the k brightest target-pixel statistics over the RMS of the
/// background (non-target) statistics.
inline double contrast_ratio(const std::vector<double>& stats,
                             const std::vector<Index>& target_pixels, Index k = 10) {
    if (target_pixels.empty())
        throw ArgumentError("contrast_ratio: empty target set");
    if (k < 1 || k > static_cast<Index>(target_pixels.size()))
        throw ArgumentError("contrast_ratio: k out of range");
    std::vector<char> is_target(stats.size(), 0);
    std::vector<double> target_vals;
    target_vals.reserve(target_pixels.size());
    for (Index i : target_pixels) {
        if (i < 0 || i >= static_cast<Index>(stats.size()))
            throw ArgumentError("contrast_ratio: target index out of range");
        is_target[static_cast<size_t>(i)] = 1;
        target_vals.push_back(stats[static_cast<size_t>(i)]);
    }
    std::partial_sort(target_vals.begin(), target_vals.begin() + k, target_vals.end(),
                      std::greater<>());
    double top = 0.0;
    for (Index i = 0; i < k; ++i) top += target_vals[static_cast<size_t>(i)] * target_vals[static_cast<size_t>(i)];
    top = std::sqrt(top / static_cast<double>(k));
    double bg = 0.0;
    Index nbg = 0;
    for (size_t i = 0; i < stats.size(); ++i)
        if (!is_target[i]) {
            bg += stats[i] * stats[i];
            ++nbg;
        }
    if (nbg == 0) throw ArgumentError("contrast_ratio: empty background");
    bg = std::sqrt(bg / static_cast<double>(nbg));
    if (bg == 0.0) return top == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return top / bg;
}

} // namespace kstap
