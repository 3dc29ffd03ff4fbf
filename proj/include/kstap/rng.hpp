#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace kstap {

/// Mix a base seed with a stream index so derived generators are independent
/// of each other and of worker scheduling (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seeded random stream. All transforms (Box-Muller, Marsaglia-Tsang) are
/// spelled out here rather than taken from <random> distributions so the
/// draw sequence is identical across standard library implementations;
/// byte-reproducible output files depend on it.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard real normal N(0, 1).
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Circular complex normal CN(0, 1): E|z|^2 = 1, real and imaginary
    /// parts each N(0, 1/2).
    std::complex<double> cnormal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-std::log(u1));
        return {r * std::cos(2.0 * std::numbers::pi * u2),
                r * std::sin(2.0 * std::numbers::pi * u2)};
    }

    /// Gamma(alpha, 1) via Marsaglia-Tsang squeeze; alpha > 0.
    double gamma(double alpha) {
        if (alpha < 1.0) {
            const double u = 1.0 - uniform(); // (0, 1]
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / (3.0 * std::sqrt(d));
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = 1.0 - uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Chi-square with nu degrees of freedom (nu > 0, not necessarily integer).
    double chi2(double nu) { return 2.0 * gamma(0.5 * nu); }

private:
    std::mt19937_64 gen_;
};

} // namespace kstap
