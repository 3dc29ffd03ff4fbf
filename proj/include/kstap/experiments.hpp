#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "kstap/covariance.hpp"
#include "kstap/errors.hpp"
#include "kstap/filters.hpp"
#include "kstap/metrics.hpp"
#include "kstap/rng.hpp"
#include "kstap/sim.hpp"
#include "kstap/types.hpp"

namespace kstap {

/// Full description of one Monte Carlo experiment run. Populated from the
/// flat key-value config grammar (see io.hpp) or programmatically.
struct ExperimentConfig {
    std::string experiment; // ms-residual-vs-n | sinr-loss-vs-n | auc-vs-n |
                            // auc-vs-n-corrupted | lrkron-convergence
    std::uint64_t seed = 1;
    Index trials = 100;
    std::vector<Index> axis; // training sample counts n
    std::string output;      // report CSV path (CLI may override)
    Index threads = 0;       // 0 = hardware concurrency

    // scenario
    Index p = 3;
    Index q = 32;
    std::string h_mode = "ideal";    // ideal | random
    double secondary_eig = 0.0;      // 0 = no secondary spatial component
    double secondary_doppler = 0.2;  // steering direction of the secondary
    std::string b_modes = "random";  // random | dft
    Index b_rank = 5;
    double b_decades = 2.0;
    std::vector<double> b_eigs;      // explicit spectrum (dft mode or override)
    double sigma2_rel = 1e-4;        // sigma^2 relative to mean clutter power/channel
    double sigma2_abs = -1.0;        // absolute sigma^2 (takes precedence if >= 0)
    double texture_dof = 4.0;
    double spatial_gain = 1.5;

    // estimator
    Index r_a = 1;
    Index r_b = 5;
    double tol = 1e-8;
    Index max_iter = 200;
    Index lr_rank = 0; // 0 -> r_a * r_b

    // evaluation
    Index test_bins = 100;
    Index doppler_bins = 64;
    double target_amp = 1.0;
    double target_doppler = 0.125; // sinr-loss experiment: fixed target Doppler
    double guard = 0.05;           // excluded band around DC for test targets

    // corruption (auc-vs-n-corrupted)
    double corrupt_fraction = 0.05;
    double corrupt_amp_lo = 1.0;
    double corrupt_amp_hi = 2.0;

    // lrkron-convergence
    Index conv_n = 50;
    Index conv_iters = 12;
    double conv_noise_factor = 10.0; // second series: noise std scaled by this

    Index effective_lr_rank() const { return lr_rank > 0 ? lr_rank : r_a * r_b; }
};

struct Series {
    std::string method;
    std::vector<double> mean;
    std::vector<double> stderr_;
};

struct ExperimentReport {
    std::string experiment;
    std::vector<double> axis;
    std::vector<Series> series;
    Index trial_count = 0;
    std::uint64_t seed = 0;
    double runtime_sec = 0.0;
};

/// Locale-independent %.12g formatting for the CSV contract.
inline std::string format_g12(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

/// CSV layout: header `axis,method,mean,stderr`, one row per (axis, series)
/// pair, '.' decimal, ',' separator, LF line endings. Runtime metadata is
/// deliberately not written so output bytes are deterministic under seed.
inline void write_report_csv(const ExperimentReport& rep, std::ostream& os) {
    os << "axis,method,mean,stderr\n";
    for (size_t a = 0; a < rep.axis.size(); ++a)
        for (const auto& s : rep.series)
            os << format_g12(rep.axis[a]) << ',' << s.method << ','
               << format_g12(s.mean[a]) << ',' << format_g12(s.stderr_[a]) << '\n';
}

namespace detail {

inline ClutterScenario build_scenario(const ExperimentConfig& cfg) {
    ClutterScenario sc;
    sc.p = cfg.p;
    sc.q = cfg.q;
    sc.rng_seed = derive_seed(cfg.seed, 0xC0FFEE);
    if (cfg.h_mode == "ideal") sc.h = ideal_h(cfg.p);
    else if (cfg.h_mode == "random") sc.h = random_h(cfg.p, derive_seed(cfg.seed, 0xCA11));
    else throw ConfigError("scenario.h must be 'ideal' or 'random'");

    if (cfg.b_modes == "dft") {
        if (cfg.b_eigs.empty())
            throw ConfigError("scenario.b_modes = dft requires scenario.b_eigs");
        sc.b_true = make_b_dft(cfg.q, cfg.b_eigs);
    } else if (cfg.b_modes == "random") {
        if (!cfg.b_eigs.empty()) {
            // explicit spectrum on random (Haar) eigenvectors
            HermitianMatrix base = make_b_random(cfg.q, static_cast<Index>(cfg.b_eigs.size()),
                                                 1.0, derive_seed(cfg.seed, 0xB0B));
            const EigenPairs eig = hermitian_eig(base);
            std::vector<double> eigs = cfg.b_eigs;
            std::sort(eigs.begin(), eigs.end(), std::greater<>());
            ComplexMatrix b = ComplexMatrix::Zero(cfg.q, cfg.q);
            for (size_t i = 0; i < eigs.size(); ++i)
                b.selfadjointView<Eigen::Lower>().rankUpdate(eig.vectors.col(static_cast<Index>(i)), eigs[i]);
            b = ComplexMatrix(b.selfadjointView<Eigen::Lower>());
            sc.b_true = HermitianMatrix::trusted(0.5 * (b + b.adjoint()), true);
        } else {
            sc.b_true = make_b_random(cfg.q, cfg.b_rank, cfg.b_decades, derive_seed(cfg.seed, 0xB0B));
        }
    } else {
        throw ConfigError("scenario.b_modes must be 'random' or 'dft'");
    }

    if (cfg.secondary_eig > 0.0) {
        SpatialSecondary sec;
        sec.eigenvalue = cfg.secondary_eig;
        sec.direction = make_steering(cfg.p, cfg.q, cfg.secondary_doppler, cfg.spatial_gain).spatial;
        sc.spatial_secondary = sec;
    }

    if (cfg.sigma2_abs >= 0.0) {
        sc.sigma2 = cfg.sigma2_abs;
    } else {
        const HermitianMatrix a = spatial_factor(sc);
        const double clutter_power =
            a.mat.trace().real() * sc.b_true.mat.trace().real() / static_cast<double>(cfg.p * cfg.q);
        sc.sigma2 = cfg.sigma2_rel * clutter_power;
    }
    sc.texture_dof = cfg.texture_dof;
    sc.validate();
    return sc;
}

/// Deterministic per-(axis, trial, purpose) seed, independent of worker
/// count and schedule.
inline std::uint64_t trial_seed(const ExperimentConfig& cfg, Index axis_i, Index trial,
                                Index purpose) {
    const std::uint64_t stream =
        (static_cast<std::uint64_t>(axis_i) << 40) |
        (static_cast<std::uint64_t>(trial) << 8) |
        static_cast<std::uint64_t>(purpose);
    return derive_seed(cfg.seed, stream);
}

template <typename Fn>
void parallel_trials(Index trials, Index threads, Fn&& fn) {
    Index workers = threads > 0 ? threads
                                : static_cast<Index>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = std::min(workers, trials);
    if (workers <= 1) {
        for (Index t = 0; t < trials; ++t) fn(t);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (Index w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (Index t = w; t < trials; t += workers) fn(t);
        });
    for (auto& th : pool) th.join();
}

/// trials x axis x methods result cube with mean/stderr reduction.
class ResultCube {
public:
    ResultCube(Index axes, std::vector<std::string> methods, Index trials)
        : methods_(std::move(methods)), trials_(trials),
          vals_(static_cast<size_t>(axes) * methods_.size() * static_cast<size_t>(trials),
                std::numeric_limits<double>::quiet_NaN()),
          axes_(axes) {}

    void set(Index axis_i, size_t method_i, Index trial, double v) {
        vals_[idx(axis_i, method_i, trial)] = v;
    }

    std::vector<Series> reduce() const {
        std::vector<Series> out;
        for (size_t m = 0; m < methods_.size(); ++m) {
            Series s;
            s.method = methods_[m];
            for (Index a = 0; a < axes_; ++a) {
                double mean = 0.0;
                for (Index t = 0; t < trials_; ++t) mean += vals_[idx(a, m, t)];
                mean /= static_cast<double>(trials_);
                double var = 0.0;
                for (Index t = 0; t < trials_; ++t) {
                    const double d = vals_[idx(a, m, t)] - mean;
                    var += d * d;
                }
                var = trials_ > 1 ? var / static_cast<double>(trials_ - 1) : 0.0;
                s.mean.push_back(mean);
                s.stderr_.push_back(std::sqrt(var / static_cast<double>(trials_)));
            }
            out.push_back(std::move(s));
        }
        return out;
    }

    const std::vector<std::string>& methods() const { return methods_; }

private:
    size_t idx(Index axis_i, size_t method_i, Index trial) const {
        return (static_cast<size_t>(axis_i) * methods_.size() + method_i) *
                   static_cast<size_t>(trials_) +
               static_cast<size_t>(trial);
    }
    std::vector<std::string> methods_;
    Index trials_;
    std::vector<double> vals_;
    Index axes_;
};

/// Fit the model and build the four comparison filters from one training set.
struct TrialFilters {
    StapFilter kron_stap;
    StapFilter kron_spatial; // model-based spatial stage only
    StapFilter kron_classical;
    StapFilter lr_stap;
};

inline TrialFilters build_filters(const ExperimentConfig& cfg, const SampleSet& train) {
    const HermitianMatrix scm = sample_covariance(train);
    const KronCovModel model = lr_kron(scm, cfg.p, cfg.q, cfg.r_a, cfg.r_b, cfg.tol, cfg.max_iter);
    TrialFilters f;
    f.kron_stap = kron_stap_filter(model);
    f.kron_spatial = spatial_only_filter(model);
    f.kron_classical = kron_classical_filter(model);
    f.lr_stap = lr_stap_filter(scm, cfg.p, cfg.q, cfg.effective_lr_rank());
    return f;
}

/// Detection score of one range bin: the statistic maximized over the bank.
inline double max_detection_stat(const StapFilter& f, const ComplexVector& x,
                                 const std::vector<SteeringVector>& bank) {
    const std::vector<double> stats = detection_statistic(f, x, bank);
    return *std::max_element(stats.begin(), stats.end());
}

/// Target Doppler uniform over the band excluding (-guard, guard).
inline double draw_target_doppler(Rng& rng, double guard) {
    const double f = rng.uniform(guard, 0.5);
    return rng.uniform() < 0.5 ? -f : f;
}

inline ExperimentReport run_ms_residual(const ExperimentConfig& cfg) {
    const ClutterScenario sc = build_scenario(cfg);
    const Index axes = static_cast<Index>(cfg.axis.size());
    ResultCube cube(axes, {"kron-stap", "kron-spatial", "kron-classical", "lr-stap"}, cfg.trials);
    parallel_trials(cfg.trials, cfg.threads, [&](Index t) {
        for (Index a = 0; a < axes; ++a) {
            const Index n = cfg.axis[static_cast<size_t>(a)];
            const SampleSet train = sample_clutter(sc, n, trial_seed(cfg, a, t, 0));
            const SampleSet test = sample_clutter(sc, cfg.test_bins, trial_seed(cfg, a, t, 1));
            const TrialFilters f = build_filters(cfg, train);
            cube.set(a, 0, t, ms_residual(f.kron_stap, test));
            cube.set(a, 1, t, ms_residual(f.kron_spatial, test));
            cube.set(a, 2, t, ms_residual(f.kron_classical, test));
            cube.set(a, 3, t, ms_residual(f.lr_stap, test));
        }
    });
    ExperimentReport rep;
    rep.series = cube.reduce();
    return rep;
}

inline ExperimentReport run_sinr_loss(const ExperimentConfig& cfg) {
    const ClutterScenario sc = build_scenario(cfg);
    const auto [clutter, total] = scenario_covariance(sc);
    const SinrLossEvaluator rho(total);
    const SteeringVector d = make_steering(cfg.p, cfg.q, cfg.target_doppler, cfg.spatial_gain);
    const Index axes = static_cast<Index>(cfg.axis.size());
    // kron-spatial here uses the pulse-averaged rank-one spatial estimate,
    // the estimator the closed-form 1 - 1/n curve describes.
    ResultCube cube(axes, {"lr-stap", "kron-spatial", "kron-stap", "kron-classical"}, cfg.trials);
    parallel_trials(cfg.trials, cfg.threads, [&](Index t) {
        for (Index a = 0; a < axes; ++a) {
            const Index n = cfg.axis[static_cast<size_t>(a)];
            const SampleSet train = sample_clutter(sc, n, trial_seed(cfg, a, t, 0));
            const HermitianMatrix scm = sample_covariance(train);
            const StapFilter lr = lr_stap_filter(scm, cfg.p, cfg.q, cfg.effective_lr_rank());
            cube.set(a, 0, t, rho(lr, d));
            const NaiveSpatialEstimate naive = naive_spatial_estimate(scm, cfg.p, cfg.q);
            cube.set(a, 1, t, rho(spatial_only_filter(naive.h_hat, cfg.q), d));
            const KronCovModel model =
                lr_kron(scm, cfg.p, cfg.q, cfg.r_a, cfg.r_b, cfg.tol, cfg.max_iter);
            cube.set(a, 2, t, rho(kron_stap_filter(model), d));
            cube.set(a, 3, t, rho(kron_classical_filter(model), d));
        }
    });
    ExperimentReport rep;
    rep.series = cube.reduce();
    Series th_lr{"theory-lr-stap", {}, {}};
    Series th_sp{"theory-kron-spatial", {}, {}};
    for (Index n : cfg.axis) {
        TheoryParams tp;
        tp.n = static_cast<double>(n);
        tp.r = static_cast<double>(cfg.effective_lr_rank());
        th_lr.mean.push_back(theory_sinr_loss(TheoryMethod::LowRank, tp));
        th_lr.stderr_.push_back(0.0);
        th_sp.mean.push_back(theory_sinr_loss(TheoryMethod::KronSpatial, tp));
        th_sp.stderr_.push_back(0.0);
    }
    rep.series.push_back(std::move(th_lr));
    rep.series.push_back(std::move(th_sp));
    return rep;
}

inline ExperimentReport run_auc(const ExperimentConfig& cfg, bool with_corruption) {
    const ClutterScenario sc = build_scenario(cfg);
    const std::vector<SteeringVector> bank =
        steering_bank(cfg.p, cfg.q, doppler_grid(cfg.doppler_bins), cfg.spatial_gain);
    const Index axes = static_cast<Index>(cfg.axis.size());
    std::vector<std::string> methods = {"kron-stap", "kron-spatial", "kron-classical", "lr-stap"};
    if (with_corruption) {
        for (const char* m : {"kron-stap", "kron-spatial", "kron-classical", "lr-stap"})
            methods.push_back(std::string(m) + "-corrupt");
        // paired per-trial AUC drops (clean minus corrupted, same test data)
        for (const char* m : {"kron-stap", "kron-spatial", "kron-classical", "lr-stap"})
            methods.push_back(std::string(m) + "-drop");
    }
    ResultCube cube(axes, methods, cfg.trials);

    parallel_trials(cfg.trials, cfg.threads, [&](Index t) {
        for (Index a = 0; a < axes; ++a) {
            const Index n = cfg.axis[static_cast<size_t>(a)];
            const SampleSet train = sample_clutter(sc, n, trial_seed(cfg, a, t, 0));
            const SampleSet h0 = sample_clutter(sc, cfg.test_bins, trial_seed(cfg, a, t, 1));
            SampleSet h1 = sample_clutter(sc, cfg.test_bins, trial_seed(cfg, a, t, 2));
            Rng trng(trial_seed(cfg, a, t, 3));
            for (auto& x : h1.samples) {
                TargetSpec ts;
                ts.doppler = draw_target_doppler(trng, cfg.guard);
                const double phase = trng.uniform(0.0, 2.0 * std::numbers::pi);
                ts.amplitude = cfg.target_amp * cxd(std::cos(phase), std::sin(phase));
                ts.spatial_gain = cfg.spatial_gain;
                x += target_return(ts, cfg.p, cfg.q);
            }
            auto eval = [&](const TrialFilters& f, size_t base, double* aucs) {
                const StapFilter* filters[4] = {&f.kron_stap, &f.kron_spatial,
                                                &f.kron_classical, &f.lr_stap};
                for (size_t m = 0; m < 4; ++m) {
                    std::vector<double> s0, s1;
                    s0.reserve(h0.samples.size());
                    s1.reserve(h1.samples.size());
                    for (const auto& x : h0.samples)
                        s0.push_back(max_detection_stat(*filters[m], x, bank));
                    for (const auto& x : h1.samples)
                        s1.push_back(max_detection_stat(*filters[m], x, bank));
                    aucs[m] = roc_auc(s0, s1);
                    cube.set(a, base + m, t, aucs[m]);
                }
            };
            double clean_auc[4], corrupt_auc[4];
            eval(build_filters(cfg, train), 0, clean_auc);
            if (with_corruption) {
                const SampleSet corrupted =
                    corrupt_training(train, cfg.corrupt_fraction,
                                     {cfg.corrupt_amp_lo, cfg.corrupt_amp_hi},
                                     trial_seed(cfg, a, t, 4), cfg.spatial_gain);
                eval(build_filters(cfg, corrupted), 4, corrupt_auc);
                for (size_t m = 0; m < 4; ++m)
                    cube.set(a, 8 + m, t, clean_auc[m] - corrupt_auc[m]);
            }
        }
    });
    ExperimentReport rep;
    rep.series = cube.reduce();
    return rep;
}

inline ExperimentReport run_lrkron_convergence(const ExperimentConfig& cfg) {
    ClutterScenario base = build_scenario(cfg);
    ClutterScenario noisy = base;
    noisy.sigma2 *= cfg.conv_noise_factor * cfg.conv_noise_factor;
    const Index iters = cfg.conv_iters;
    ResultCube cube(iters, {"gap-noise-1x", "gap-noise-10x"}, cfg.trials);
    const double forced_tol = std::numeric_limits<double>::min(); // run out the iteration budget
    parallel_trials(cfg.trials, cfg.threads, [&](Index t) {
        const ClutterScenario* scs[2] = {&base, &noisy};
        for (size_t m = 0; m < 2; ++m) {
            const SampleSet train =
                sample_clutter(*scs[m], cfg.conv_n, trial_seed(cfg, static_cast<Index>(m), t, 0));
            const KronCovModel model = lr_kron(sample_covariance(train), cfg.p, cfg.q, cfg.r_a,
                                               cfg.r_b, forced_tol, iters);
            const double f_end = std::sqrt(model.objective_trace.back());
            for (Index i = 0; i < iters; ++i) {
                const size_t ii = std::min(static_cast<size_t>(i), model.objective_trace.size() - 1);
                cube.set(i, m, t, std::sqrt(model.objective_trace[ii]) - f_end);
            }
        }
    });
    ExperimentReport rep;
    rep.series = cube.reduce();
    return rep;
}

} // namespace detail

/// Run the named experiment: seeded Monte Carlo trials of
/// sample -> estimate -> filter -> evaluate, aggregated to mean and
/// standard error per axis point. Deterministic under (config, seed),
/// independent of worker count.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport rep;
    if (cfg.experiment == "lrkron-convergence") {
        rep = detail::run_lrkron_convergence(cfg);
        for (Index i = 0; i < cfg.conv_iters; ++i) rep.axis.push_back(static_cast<double>(i));
    } else {
        if (cfg.axis.empty()) throw ConfigError("axis must list at least one n value");
        for (Index n : cfg.axis)
            if (n < 1) throw ConfigError("axis values must be >= 1");
        if (cfg.experiment == "ms-residual-vs-n") rep = detail::run_ms_residual(cfg);
        else if (cfg.experiment == "sinr-loss-vs-n") rep = detail::run_sinr_loss(cfg);
        else if (cfg.experiment == "auc-vs-n") rep = detail::run_auc(cfg, false);
        else if (cfg.experiment == "auc-vs-n-corrupted") rep = detail::run_auc(cfg, true);
        else throw ConfigError("unknown experiment '" + cfg.experiment + "'");
        for (Index n : cfg.axis) rep.axis.push_back(static_cast<double>(n));
    }
    rep.experiment = cfg.experiment;
    rep.trial_count = cfg.trials;
    rep.seed = cfg.seed;
    rep.runtime_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

} // namespace kstap
