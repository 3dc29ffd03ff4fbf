#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kstap/covariance.hpp"
#include "kstap/errors.hpp"
#include "kstap/linalg.hpp"
#include "kstap/types.hpp"

namespace kstap {

/// Spatio-temporal matched-filter template for a hypothesized target at
/// normalized Doppler f (cycles per pulse). The full steering vector is
/// spatial (x) temporal, unit norm by construction.
struct SteeringVector {
    ComplexVector spatial;  // a(f), length p, unit norm
    ComplexVector temporal; // b(f), length q, unit norm
    double doppler = 0.0;

    ComplexVector full() const { return kron(spatial, temporal); }
};

/// b(f)_k = e^{j 2 pi f k} / sqrt(q);  a(f)_i = e^{j 2 pi i g f} / sqrt(p)
/// with g the spatial gain (phase slope across the array per unit Doppler).
inline SteeringVector make_steering(Index p, Index q, double f, double spatial_gain) {
    SteeringVector d;
    d.doppler = f;
    d.spatial.resize(p);
    const double sp = 1.0 / std::sqrt(static_cast<double>(p));
    for (Index i = 0; i < p; ++i) {
        const double ph = 2.0 * std::numbers::pi * static_cast<double>(i) * spatial_gain * f;
        d.spatial(i) = sp * cxd(std::cos(ph), std::sin(ph));
    }
    d.temporal.resize(q);
    const double sq = 1.0 / std::sqrt(static_cast<double>(q));
    for (Index k = 0; k < q; ++k) {
        const double ph = 2.0 * std::numbers::pi * f * static_cast<double>(k);
        d.temporal(k) = sq * cxd(std::cos(ph), std::sin(ph));
    }
    return d;
}

inline std::vector<SteeringVector> steering_bank(Index p, Index q,
                                                 const std::vector<double>& dopplers,
                                                 double spatial_gain) {
    if (dopplers.empty())
        throw ArgumentError("steering_bank: empty Doppler list");
    std::vector<SteeringVector> bank;
    bank.reserve(dopplers.size());
    for (double f : dopplers) bank.push_back(make_steering(p, q, f, spatial_gain));
    return bank;
}

/// `count` equispaced normalized Dopplers covering (-1/2, 1/2), endpoints
/// and exact DC excluded.
inline std::vector<double> doppler_grid(Index count) {
    std::vector<double> f(static_cast<size_t>(count));
    for (Index i = 0; i < count; ++i)
        f[static_cast<size_t>(i)] = -0.5 + (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    return f;
}

enum class FilterKind { LowRank, KronClassical, KronStap, SpatialOnly };

inline const char* filter_kind_name(FilterKind k) {
    switch (k) {
        case FilterKind::LowRank: return "lr-stap";
        case FilterKind::KronClassical: return "kron-classical";
        case FilterKind::KronStap: return "kron-stap";
        case FilterKind::SpatialOnly: return "kron-spatial";
    }
    return "unknown";
}

/// Clutter cancelation filter in factorized subspace form. All four kinds
/// are orthogonal projectors:
///   LowRank:        F = I - U U^H                      (joint_basis)
///   KronClassical:  F = I - (U_A U_A^H) (x) (U_B U_B^H)
///   KronStap:       F = (I - U_A U_A^H) (x) (I - U_B U_B^H)
///   SpatialOnly:    F = (I - U_A U_A^H) (x) I
struct StapFilter {
    FilterKind kind = FilterKind::LowRank;
    Index p = 0;
    Index q = 0;
    ComplexMatrix spatial_basis;  // U_A, p x r_a
    ComplexMatrix temporal_basis; // U_B, q x r_b
    ComplexMatrix joint_basis;    // U, pq x r (LowRank only)
    std::vector<std::string> warnings;

    Index dim() const { return p * q; }

    /// Dense pq x pq realization; intended for verification at desk scale.
    ComplexMatrix dense() const {
        const Index d = dim();
        const ComplexMatrix ip = ComplexMatrix::Identity(p, p);
        const ComplexMatrix iq = ComplexMatrix::Identity(q, q);
        switch (kind) {
            case FilterKind::LowRank:
                return ComplexMatrix::Identity(d, d) - joint_basis * joint_basis.adjoint();
            case FilterKind::KronClassical:
                return ComplexMatrix::Identity(d, d) -
                       kron(ComplexMatrix(spatial_basis * spatial_basis.adjoint()),
                            ComplexMatrix(temporal_basis * temporal_basis.adjoint()));
            case FilterKind::KronStap:
                return kron(ComplexMatrix(ip - spatial_basis * spatial_basis.adjoint()),
                            ComplexMatrix(iq - temporal_basis * temporal_basis.adjoint()));
            case FilterKind::SpatialOnly:
                return kron(ComplexMatrix(ip - spatial_basis * spatial_basis.adjoint()), iq);
        }
        return ComplexMatrix();
    }
};

namespace detail {

inline ComplexMatrix factor_basis(const HermitianMatrix& factor, Index r) {
    return hermitian_eig(factor).vectors.leftCols(r);
}

inline void model_warnings(const KronCovModel& model, StapFilter& f) {
    if (model.r_a == model.p())
        f.warnings.push_back("spatial rank equals p: spatial stage cancels everything");
    if (model.r_b == model.q())
        f.warnings.push_back("temporal rank equals q: temporal stage cancels everything");
    else if (static_cast<double>(model.r_b) > 0.9 * static_cast<double>(model.q()))
        f.warnings.push_back("temporal rank exceeds 0.9*q; consider truncating r_b");
}

} // namespace detail

/// Classical low-rank STAP: project away the span of the top r
/// eigenvectors of the (sample) covariance.
inline StapFilter lr_stap_filter(const HermitianMatrix& s, Index p, Index q, Index r) {
    if (s.dim() != p * q)
        throw ArgumentError("lr_stap_filter: covariance is not (p*q) x (p*q)");
    if (r < 0 || r > p * q)
        throw ArgumentError("lr_stap_filter: rank out of range");
    StapFilter f;
    f.kind = FilterKind::LowRank;
    f.p = p;
    f.q = q;
    f.joint_basis = hermitian_eig(s).vectors.leftCols(r);
    return f;
}

/// Kronecker equivalent of the classical projector: removes the joint
/// spatio-temporal clutter subspace span(U_A) (x) span(U_B).
inline StapFilter kron_classical_filter(const KronCovModel& model) {
    StapFilter f;
    f.kind = FilterKind::KronClassical;
    f.p = model.p();
    f.q = model.q();
    f.spatial_basis = detail::factor_basis(model.a_factor, model.r_a);
    f.temporal_basis = detail::factor_basis(model.b_factor, model.r_b);
    detail::model_warnings(model, f);
    return f;
}

/// Kron STAP: projects away both the spatial and the temporal clutter
/// subspaces; range dimension (p - r_a)(q - r_b).
inline StapFilter kron_stap_filter(const KronCovModel& model) {
    StapFilter f;
    f.kind = FilterKind::KronStap;
    f.p = model.p();
    f.q = model.q();
    f.spatial_basis = detail::factor_basis(model.a_factor, model.r_a);
    f.temporal_basis = detail::factor_basis(model.b_factor, model.r_b);
    detail::model_warnings(model, f);
    return f;
}

/// Spatial stage only: F = (I - U_A U_A^H) (x) I.
inline StapFilter spatial_only_filter(const KronCovModel& model) {
    StapFilter f;
    f.kind = FilterKind::SpatialOnly;
    f.p = model.p();
    f.q = model.q();
    f.spatial_basis = detail::factor_basis(model.a_factor, model.r_a);
    detail::model_warnings(model, f);
    return f;
}

/// Spatial-only filter from an explicit unit spatial direction.
inline StapFilter spatial_only_filter(const ComplexVector& h, Index q) {
    StapFilter f;
    f.kind = FilterKind::SpatialOnly;
    f.p = h.size();
    f.q = q;
    f.spatial_basis = h / h.norm();
    return f;
}

/// Apply F to one vectorized range bin. Kronecker kinds act factorwise on
/// the q x p reshaping (column i = antenna i's pulse train), so the dense
/// pq x pq matrix is never materialized: y = vec(F_B X F_A^T).
inline ComplexVector apply_filter(const StapFilter& f, const ComplexVector& x) {
    if (x.size() != f.dim())
        throw ArgumentError("apply_filter: length mismatch");
    using MapQxP = Eigen::Map<const Eigen::MatrixXcd>;
    switch (f.kind) {
        case FilterKind::LowRank: {
            if (f.joint_basis.cols() == 0) return x;
            return x - f.joint_basis * (f.joint_basis.adjoint() * x);
        }
        case FilterKind::KronClassical: {
            MapQxP xr(x.data(), f.q, f.p);
            // (P_A (x) P_B) x = vec(U_B (U_B^H X conj(U_A)) U_A^T)
            const ComplexMatrix t = f.temporal_basis.adjoint() * xr * f.spatial_basis.conjugate();
            ComplexMatrix yr = f.temporal_basis * t * f.spatial_basis.transpose();
            ComplexVector y = x;
            Eigen::Map<Eigen::MatrixXcd>(y.data(), f.q, f.p) -= yr;
            return y;
        }
        case FilterKind::KronStap: {
            MapQxP xr(x.data(), f.q, f.p);
            ComplexMatrix t = xr - f.temporal_basis * (f.temporal_basis.adjoint() * xr);
            t -= (t * f.spatial_basis.conjugate()) * f.spatial_basis.transpose();
            return ComplexVector(Eigen::Map<const ComplexVector>(t.data(), t.size()));
        }
        case FilterKind::SpatialOnly: {
            MapQxP xr(x.data(), f.q, f.p);
            ComplexMatrix t = xr - (xr * f.spatial_basis.conjugate()) * f.spatial_basis.transpose();
            return ComplexVector(Eigen::Map<const ComplexVector>(t.data(), t.size()));
        }
    }
    return x;
}

/// Per-Doppler detection statistic: for each bank entry with temporal
/// steering b, the maximum over unit-norm spatial vectors h of
/// |(h (x) b)^H F x|. The maximum is attained in closed form as the
/// Euclidean norm of z, z_k = (e_k (x) b)^H F x.
inline std::vector<double> detection_statistic(const StapFilter& f, const ComplexVector& x,
                                               const std::vector<SteeringVector>& bank) {
    if (x.size() != f.dim())
        throw ArgumentError("detection_statistic: length mismatch");
    const ComplexVector w = apply_filter(f, x);
    Eigen::Map<const Eigen::MatrixXcd> wr(w.data(), f.q, f.p);
    std::vector<double> stats;
    stats.reserve(bank.size());
    for (const auto& d : bank) {
        if (d.temporal.size() != f.q || d.spatial.size() != f.p)
            throw ArgumentError("detection_statistic: steering dimension mismatch");
        stats.push_back((d.temporal.adjoint() * wr).norm());
    }
    return stats;
}

} // namespace kstap
