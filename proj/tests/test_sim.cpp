#include <catch2/catch_amalgamated.hpp>

#include "kstap/covariance.hpp"
#include "kstap/filters.hpp"
#include "kstap/linalg.hpp"
#include "kstap/metrics.hpp"
#include "kstap/rng.hpp"
#include "kstap/sim.hpp"
#include "oracles.hpp"

using namespace kstap;

namespace {

ClutterScenario basic_scenario(Index p, Index q, Index rank, double sigma2, std::uint64_t seed) {
    ClutterScenario sc;
    sc.p = p;
    sc.q = q;
    sc.h = ideal_h(p);
    sc.b_true = make_b_random(q, rank, 2.0, seed + 1);
    sc.sigma2 = sigma2;
    sc.texture_dof = 4.0;
    sc.rng_seed = seed;
    return sc;
}

} // namespace

TEST_CASE("scenario_covariance: ideal case is ones (x) B") {
    ClutterScenario sc;
    sc.p = 3;
    sc.q = 4;
    sc.h = ComplexVector::Ones(3);
    sc.b_true = HermitianMatrix(ComplexMatrix::Identity(4, 4), true);
    sc.sigma2 = 0.0;
    sc.rng_seed = 0;
    const auto [clutter, total] = scenario_covariance(sc);
    const ComplexMatrix want = kron(ComplexMatrix(ComplexMatrix::Ones(3, 3)),
                                    ComplexMatrix(ComplexMatrix::Identity(4, 4)));
    REQUIRE((clutter.mat - want).norm() == 0.0);
    REQUIRE((total.mat - clutter.mat).norm() == 0.0);
}

TEST_CASE("scenario_covariance: rank-2 spatial factor has the configured eigenvalues") {
    ClutterScenario sc = basic_scenario(3, 8, 3, 1e-4, 7);
    SpatialSecondary sec;
    sec.eigenvalue = 1.0 / 900.0;
    sec.direction = make_steering(3, 8, 0.3, 1.5).spatial;
    sc.spatial_secondary = sec;
    const EigenPairs ea = hermitian_eig(spatial_factor(sc));
    REQUIRE(std::abs(ea.values(0) - 1.0) < 1e-12);
    REQUIRE(std::abs(ea.values(1) - 1.0 / 900.0) < 1e-12);
    REQUIRE(std::abs(ea.values(2)) < 1e-12);
}

TEST_CASE("scenario_covariance: clutter spectrum is the outer product of factor spectra") {
    ClutterScenario sc = basic_scenario(2, 5, 3, 1e-3, 11);
    const auto [clutter, total] = scenario_covariance(sc);
    const EigenPairs ec = hermitian_eig(clutter);
    const EigenPairs ea = hermitian_eig(spatial_factor(sc));
    const EigenPairs eb = hermitian_eig(sc.b_true);
    std::vector<double> prods;
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 5; ++j) prods.push_back(ea.values(i) * eb.values(j));
    std::sort(prods.begin(), prods.end(), std::greater<>());
    for (Index k = 0; k < 10; ++k)
        REQUIRE(std::abs(ec.values(k) - prods[static_cast<size_t>(k)]) <
                1e-10 * std::max(1.0, prods[0]));
}

TEST_CASE("sample_clutter: near-Gaussian at huge texture dof") {
    ClutterScenario sc = basic_scenario(2, 2, 2, 0.1, 13);
    sc.texture_dof = 1e6;
    const SampleSet data = sample_clutter(sc, 25000); // 1e5 real coordinates
    std::vector<double> vals;
    vals.reserve(200000);
    for (const auto& x : data.samples)
        for (Index i = 0; i < x.size(); ++i) {
            vals.push_back(x(i).real());
            vals.push_back(x(i).imag());
        }
    double m2 = 0.0, m4 = 0.0;
    for (double v : vals) {
        m2 += v * v;
        m4 += v * v * v * v;
    }
    m2 /= static_cast<double>(vals.size());
    m4 /= static_cast<double>(vals.size());
    const double kurt = m4 / (m2 * m2);
    REQUIRE(std::abs(kurt - 3.0) < 0.06); // within 2% of the Gaussian value
}

TEST_CASE("sample_clutter: empirical covariance approaches the scenario covariance") {
    ClutterScenario sc = basic_scenario(2, 4, 2, 0.05, 17);
    const auto [clutter, total] = scenario_covariance(sc);
    const SampleSet data = sample_clutter(sc, 100000);
    const HermitianMatrix s = sample_covariance(data);
    REQUIRE((s.mat - total.mat).norm() < 0.05 * total.mat.norm());
}

TEST_CASE("sample_clutter: noiseless draws stay inside the clutter subspace") {
    ClutterScenario sc = basic_scenario(3, 8, 3, 0.0, 19);
    const auto [clutter, total] = scenario_covariance(sc);
    const ComplexMatrix basis = hermitian_eig(clutter).vectors.leftCols(3); // rank 1*3
    const SampleSet data = sample_clutter(sc, 50);
    for (const auto& x : data.samples) {
        const ComplexVector resid = x - basis * (basis.adjoint() * x);
        REQUIRE(resid.norm() < 1e-8 * std::max(x.norm(), 1e-30));
    }
}

TEST_CASE("sample_clutter: texture power normalization") {
    Rng rng(23);
    double acc = 0.0;
    const Index n = 100000;
    for (Index i = 0; i < n; ++i) acc += rng.chi2(4.0) / 4.0;
    acc /= static_cast<double>(n);
    REQUIRE(acc > 0.99);
    REQUIRE(acc < 1.01);
}

TEST_CASE("sample_clutter: bit-identical under scenario seed") {
    const ClutterScenario sc = basic_scenario(3, 8, 3, 1e-3, 29);
    const SampleSet a = sample_clutter(sc, 10);
    const SampleSet b = sample_clutter(sc, 10);
    REQUIRE(a.samples.size() == b.samples.size());
    for (size_t m = 0; m < a.samples.size(); ++m)
        for (Index i = 0; i < a.samples[m].size(); ++i)
            REQUIRE(a.samples[m](i) == b.samples[m](i));
}

TEST_CASE("sample_clutter: noiseless per-pulse spatial snapshots are proportional to h") {
    ClutterScenario sc = basic_scenario(3, 8, 3, 0.0, 31);
    const SampleSet data = sample_clutter(sc, 20);
    const ComplexVector h = sc.h / sc.h.norm();
    for (const auto& x : data.samples) {
        Eigen::Map<const Eigen::MatrixXcd> xr(x.data(), sc.q, sc.p);
        for (Index k = 0; k < sc.q; ++k) {
            const ComplexVector snap = xr.row(k).transpose(); // spatial snapshot at pulse k
            const ComplexVector resid = snap - h * (h.adjoint() * snap);
            REQUIRE(resid.norm() < 1e-8 * std::max(snap.norm(), 1e-30));
        }
    }
}

TEST_CASE("target_return: norm, zero amplitude, spatial-null transparency") {
    TargetSpec t;
    t.doppler = 0.25;
    t.amplitude = cxd(0.3, 0.4);
    t.spatial_gain = 4.0 / 3.0; // gain * doppler = 1/3: orthogonal to the ideal h
    const ComplexVector x = target_return(t, 3, 8);
    REQUIRE(std::abs(x.norm() - 0.5) < 1e-12);

    TargetSpec z = t;
    z.amplitude = cxd(0.0, 0.0);
    REQUIRE(target_return(z, 3, 8).norm() == 0.0);

    // a(f) orthogonal to h: the spatial-only filter passes the target whole
    const ComplexVector h = ideal_h(3);
    const SteeringVector d = make_steering(3, 8, t.doppler, t.spatial_gain);
    REQUIRE(std::abs((d.spatial.adjoint() * h)(0, 0)) < 1e-12);
    const StapFilter f = spatial_only_filter(h, 8);
    REQUIRE(std::abs(apply_filter(f, x).norm() - x.norm()) < 1e-10);
}

TEST_CASE("corrupt_training: fraction 0 is the identity") {
    const ClutterScenario sc = basic_scenario(3, 8, 3, 1e-3, 37);
    const SampleSet data = sample_clutter(sc, 20);
    const SampleSet same = corrupt_training(data, 0.0, {1.0, 2.0}, 1);
    for (size_t m = 0; m < data.samples.size(); ++m)
        REQUIRE((data.samples[m] - same.samples[m]).norm() == 0.0);
}

TEST_CASE("corrupt_training: corrupts exactly ceil(fraction*n) bins, leaves input untouched") {
    const ClutterScenario sc = basic_scenario(3, 8, 3, 1e-3, 41);
    const SampleSet data = sample_clutter(sc, 200);
    const SampleSet out = corrupt_training(data, 0.05, {0.5, 1.0}, 99, 1.5);
    Index changed = 0;
    for (size_t m = 0; m < data.samples.size(); ++m)
        if ((data.samples[m] - out.samples[m]).norm() > 0.0) ++changed;
    REQUIRE(changed == 10);
}

TEST_CASE("corrupt_training: saturating amplitudes dominate the leading eigenvector") {
    const ClutterScenario sc = basic_scenario(3, 8, 2, 1e-3, 43);
    const SampleSet data = sample_clutter(sc, 40);
    const SampleSet out = corrupt_training(data, 1.0, {500.0, 1000.0}, 7, 1.5);
    const ComplexMatrix u_clean =
        hermitian_eig(sample_covariance(data)).vectors.leftCols(1);
    const ComplexMatrix u_corr = hermitian_eig(sample_covariance(out)).vectors.leftCols(1);
    REQUIRE(projector_distance(u_clean, u_corr) > 0.5);
}

TEST_CASE("scenario validation errors") {
    ClutterScenario sc = basic_scenario(3, 8, 3, 1e-3, 47);
    sc.h = ComplexVector::Zero(3);
    REQUIRE_THROWS_AS(sc.validate(), ArgumentError);
    sc = basic_scenario(3, 8, 3, -1.0, 47);
    REQUIRE_THROWS_AS(sc.validate(), ArgumentError);
    sc = basic_scenario(3, 8, 3, 1e-3, 47);
    SpatialSecondary sec;
    sec.eigenvalue = 2.0; // >= ||h||^2
    sec.direction = ComplexVector::Ones(3);
    sc.spatial_secondary = sec;
    REQUIRE_THROWS_AS(sc.validate(), ArgumentError);
    REQUIRE_THROWS_AS(corrupt_training(SampleSet{}, 1.5, {0.0, 1.0}, 0), ArgumentError);
}
