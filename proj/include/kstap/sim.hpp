#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kstap/covariance.hpp"
#include "kstap/errors.hpp"
#include "kstap/filters.hpp"
#include "kstap/linalg.hpp"
#include "kstap/rng.hpp"
#include "kstap/types.hpp"

namespace kstap {

/// Optional second spatial clutter component modeling spatially varying
/// calibration error. The direction is orthonormalized against h, so the
/// spatial factor's eigenvalues are exactly {||h||^2, eigenvalue}.
struct SpatialSecondary {
    double eigenvalue = 0.0;
    ComplexVector direction;
};

/// Generative clutter-plus-noise model: SIRV clutter with covariance
/// (h h^H) (x) B scaled by a unit-mean chi-square texture, plus white
/// Gaussian noise at sigma2. Samples are deterministic under rng_seed.
struct ClutterScenario {
    Index p = 0;
    Index q = 0;
    ComplexVector h;                                // per-antenna calibration
    std::optional<SpatialSecondary> spatial_secondary;
    HermitianMatrix b_true;                         // q x q psd temporal factor
    double sigma2 = 0.0;                            // noise floor
    double texture_dof = 4.0;                       // nu: tau^2 ~ chi2_nu / nu
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (p < 1 || q < 1) throw ArgumentError("ClutterScenario: p, q must be >= 1");
        if (h.size() != p || h.norm() == 0.0)
            throw ArgumentError("ClutterScenario: h must be a non-zero length-p vector");
        if (b_true.dim() != q) throw ArgumentError("ClutterScenario: b_true must be q x q");
        if (!b_true.is_psd) throw ValidationError("ClutterScenario: b_true must be psd");
        if (sigma2 < 0.0) throw ArgumentError("ClutterScenario: sigma2 must be >= 0");
        if (texture_dof <= 0.0) throw ArgumentError("ClutterScenario: texture_dof must be > 0");
        if (spatial_secondary) {
            const double ev = spatial_secondary->eigenvalue;
            if (!(ev > 0.0 && ev < h.squaredNorm()))
                throw ArgumentError("ClutterScenario: secondary eigenvalue must lie in (0, ||h||^2)");
            if (spatial_secondary->direction.size() != p)
                throw ArgumentError("ClutterScenario: secondary direction must have length p");
        }
    }
};

/// One injected moving target: x = alpha * a(f) (x) b(f).
struct TargetSpec {
    double doppler = 0.0;
    cxd amplitude{0.0, 0.0};
    double spatial_gain = 1.0;
};

/// Spatial clutter factor A = h h^H (+ secondary component).
inline HermitianMatrix spatial_factor(const ClutterScenario& sc) {
    sc.validate();
    ComplexMatrix a = sc.h * sc.h.adjoint();
    if (sc.spatial_secondary) {
        const ComplexVector hh = sc.h / sc.h.norm();
        ComplexVector u2 = sc.spatial_secondary->direction;
        u2 -= hh * (hh.adjoint() * u2);
        const double n2 = u2.norm();
        if (n2 == 0.0)
            throw ArgumentError("spatial_factor: secondary direction parallel to h");
        u2 /= n2;
        a += sc.spatial_secondary->eigenvalue * u2 * u2.adjoint();
    }
    return HermitianMatrix::trusted(0.5 * (a + a.adjoint()), /*psd_hint=*/true);
}

/// Population covariances: clutter = A (x) B, total = clutter + sigma2 I
/// (the texture is normalized to unit mean square, so it drops out here).
inline std::pair<HermitianMatrix, HermitianMatrix>
scenario_covariance(const ClutterScenario& sc) {
    const HermitianMatrix a = spatial_factor(sc);
    ComplexMatrix clutter = kron(a.mat, sc.b_true.mat);
    ComplexMatrix total = clutter + sc.sigma2 * ComplexMatrix::Identity(clutter.rows(), clutter.cols());
    return {HermitianMatrix::trusted(std::move(clutter), true),
            HermitianMatrix::trusted(std::move(total), true)};
}

/// Draw n SIRV range bins x_m = tau_m c_m + w_m with tau_m^2 ~ chi2_nu/nu,
/// c_m circular Gaussian with covariance A (x) B (drawn through the factor
/// eigen square roots), w_m circular Gaussian sigma2 I.
inline SampleSet sample_clutter(const ClutterScenario& sc, Index n, std::uint64_t seed) {
    sc.validate();
    if (n < 1) throw ArgumentError("sample_clutter: n must be >= 1");

    const EigenPairs ea = hermitian_eig(spatial_factor(sc));
    const EigenPairs eb = hermitian_eig(sc.b_true);
    // Keep only numerically non-zero factor components; low-rank clutter
    // covariances are exactly singular, so a Cholesky route would fail.
    std::vector<std::pair<double, Index>> sa, sb;
    for (Index i = 0; i < ea.values.size(); ++i)
        if (ea.values(i) > 1e-12 * ea.values(0)) sa.push_back({ea.values(i), i});
    for (Index i = 0; i < eb.values.size(); ++i)
        if (eb.values(i) > 1e-12 * std::max(eb.values(0), 0.0)) sb.push_back({eb.values(i), i});

    Rng rng(seed);
    SampleSet out;
    out.p = sc.p;
    out.q = sc.q;
    out.samples.reserve(static_cast<size_t>(n));
    const double sigma = std::sqrt(sc.sigma2);
    for (Index m = 0; m < n; ++m) {
        const double tau = std::sqrt(rng.chi2(sc.texture_dof) / sc.texture_dof);
        ComplexVector x = ComplexVector::Zero(sc.p * sc.q);
        Eigen::Map<Eigen::MatrixXcd> xr(x.data(), sc.q, sc.p);
        for (const auto& [va, ia] : sa)
            for (const auto& [vb, ib] : sb) {
                const cxd g = rng.cnormal() * (tau * std::sqrt(va * vb));
                // coefficient g on the clutter mode u_ia (x) w_ib
                xr.noalias() += g * eb.vectors.col(ib) * ea.vectors.col(ia).transpose();
            }
        if (sigma > 0.0)
            for (Index i = 0; i < x.size(); ++i) x(i) += sigma * rng.cnormal();
        out.samples.push_back(std::move(x));
    }
    return out;
}

inline SampleSet sample_clutter(const ClutterScenario& sc, Index n) {
    return sample_clutter(sc, n, sc.rng_seed);
}

/// alpha * a(f) (x) b(f) with the steering conventions of make_steering.
inline ComplexVector target_return(const TargetSpec& spec, Index p, Index q) {
    const SteeringVector d = make_steering(p, q, spec.doppler, spec.spatial_gain);
    return spec.amplitude * d.full();
}

/// Return a copy of `data` in which ceil(fraction * n) bins, chosen
/// uniformly at random, receive an added moving-target return with Doppler
/// uniform over (-1/2, 1/2), |alpha| uniform in amp_range and uniform phase.
inline SampleSet corrupt_training(const SampleSet& data, double fraction,
                                  std::pair<double, double> amp_range,
                                  std::uint64_t rng_seed, double spatial_gain = 1.0) {
    if (fraction < 0.0 || fraction > 1.0)
        throw ArgumentError("corrupt_training: fraction must lie in [0, 1]");
    SampleSet out = data;
    const Index n = data.count();
    const Index w = static_cast<Index>(std::ceil(fraction * static_cast<double>(n)));
    if (w == 0) return out;

    Rng rng(rng_seed);
    // Partial Fisher-Yates for w distinct indices.
    std::vector<Index> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), Index(0));
    for (Index i = 0; i < w; ++i) {
        const Index j = i + static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(n - i));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    for (Index i = 0; i < w; ++i) {
        TargetSpec t;
        t.doppler = rng.uniform(-0.5, 0.5);
        const double amp = rng.uniform(amp_range.first, amp_range.second);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        t.amplitude = amp * cxd(std::cos(phase), std::sin(phase));
        t.spatial_gain = spatial_gain;
        out.samples[static_cast<size_t>(idx[static_cast<size_t>(i)])] +=
            target_return(t, data.p, data.q);
    }
    return out;
}

/// Random psd temporal factor with exactly `rank` non-zero eigenvalues
/// drawn log-uniformly over `decades` decades (sorted descending, leading
/// eigenvalue 1), eigenvectors Haar-random.
inline HermitianMatrix make_b_random(Index q, Index rank, double decades, std::uint64_t seed) {
    if (rank < 1 || rank > q) throw ArgumentError("make_b_random: rank out of range");
    Rng rng(seed);
    ComplexMatrix g(q, rank);
    for (Index j = 0; j < rank; ++j)
        for (Index i = 0; i < q; ++i) g(i, j) = rng.cnormal();
    const Eigen::HouseholderQR<ComplexMatrix> qr(g);
    const ComplexMatrix basis = qr.householderQ() * ComplexMatrix::Identity(q, rank);
    std::vector<double> eigs(static_cast<size_t>(rank));
    for (auto& e : eigs) e = std::pow(10.0, rng.uniform(-decades, 0.0));
    std::sort(eigs.begin(), eigs.end(), std::greater<>());
    const double lead = eigs[0];
    ComplexMatrix b = ComplexMatrix::Zero(q, q);
    for (Index j = 0; j < rank; ++j)
        b.selfadjointView<Eigen::Lower>().rankUpdate(basis.col(j), eigs[static_cast<size_t>(j)] / lead);
    b = ComplexMatrix(b.selfadjointView<Eigen::Lower>());
    return HermitianMatrix::trusted(0.5 * (b + b.adjoint()), true);
}

/// Temporal factor whose eigenvectors are the DFT steering vectors at
/// integer bins 0, 1, ..., len(eigs)-1; eigs[i] is the eigenvalue at bin i.
/// Useful when experiments need exact orthogonality between a target's
/// temporal steering and the clutter temporal subspace.
inline HermitianMatrix make_b_dft(Index q, const std::vector<double>& eigs) {
    if (eigs.empty() || static_cast<Index>(eigs.size()) > q)
        throw ArgumentError("make_b_dft: need 1..q eigenvalues");
    ComplexMatrix b = ComplexMatrix::Zero(q, q);
    for (size_t i = 0; i < eigs.size(); ++i) {
        if (eigs[i] < 0.0) throw ArgumentError("make_b_dft: eigenvalues must be >= 0");
        const ComplexVector v =
            make_steering(1, q, static_cast<double>(i) / static_cast<double>(q), 0.0).temporal;
        b.selfadjointView<Eigen::Lower>().rankUpdate(v, eigs[i]);
    }
    b = ComplexMatrix(b.selfadjointView<Eigen::Lower>());
    return HermitianMatrix::trusted(0.5 * (b + b.adjoint()), true);
}

/// Ideal calibration vector: 1_p / sqrt(p).
inline ComplexVector ideal_h(Index p) {
    return ComplexVector::Constant(p, cxd(1.0 / std::sqrt(static_cast<double>(p)), 0.0));
}

/// Calibration vector with random per-antenna gain (uniform in [0.7, 1.3])
/// and phase, normalized to unit norm.
inline ComplexVector random_h(Index p, std::uint64_t seed) {
    Rng rng(seed);
    ComplexVector h(p);
    for (Index i = 0; i < p; ++i) {
        const double gain = rng.uniform(0.7, 1.3);
        const double ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
        h(i) = gain * cxd(std::cos(ph), std::sin(ph));
    }
    h /= h.norm();
    return h;
}

} // namespace kstap
