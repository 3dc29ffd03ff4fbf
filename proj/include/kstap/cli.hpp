#pragma once

#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kstap/experiments.hpp"
#include "kstap/io.hpp"
#include "kstap/metrics.hpp"

namespace kstap {

/// simulate: draw n range bins from the configured scenario and write them
/// as a KPHD file. Deterministic under seed.
inline void run_simulate(const SimulateConfig& cfg, std::ostream& log, bool quiet = false) {
    if (cfg.knobs.output.empty())
        throw ConfigError("simulate: no output path (config 'output' or --output)");
    const ClutterScenario sc = detail::build_scenario(cfg.knobs);
    const SampleSet data = sample_clutter(sc, cfg.n);
    write_kphd(cfg.knobs.output, data);
    if (!quiet) {
        log << "simulate: p=" << sc.p << " q=" << sc.q << " n=" << cfg.n
            << " sigma2=" << format_g12(sc.sigma2) << " texture_dof=" << sc.texture_dof
            << " seed=" << cfg.knobs.seed << "\n";
        log << "wrote " << cfg.knobs.output << "\n";
    }
}

struct EstimateOptions {
    std::string input;
    std::string output;
    Index r_a = 1;
    Index r_b = 5;
    double tol = 1e-8;
    Index max_iter = 200;
};

/// estimate: sample covariance of the input bins, low-rank Kronecker fit,
/// model persisted as KCOV. Ranks are validated against the header before
/// the payload is read.
inline KronCovModel run_estimate(const EstimateOptions& opt, std::ostream& log,
                                 bool quiet = false) {
    if (opt.output.empty()) throw ConfigError("estimate: no output path");
    const KphdHeader h = read_kphd_header(opt.input);
    if (opt.r_a < 1 || opt.r_a > h.p)
        throw ConfigError("estimate: r_a out of range for p=" + std::to_string(h.p));
    if (opt.r_b < 1 || opt.r_b > h.q)
        throw ConfigError("estimate: r_b out of range for q=" + std::to_string(h.q));
    if (h.n < 1) throw ConfigError("estimate: input holds no samples");

    const SampleSet data = read_kphd(opt.input);
    const HermitianMatrix scm = sample_covariance(data);
    const KronCovModel model = lr_kron(scm, h.p, h.q, opt.r_a, opt.r_b, opt.tol, opt.max_iter);
    write_kcov(opt.output, model);
    if (!quiet) {
        log << "estimate: p=" << h.p << " q=" << h.q << " n=" << h.n << " r_a=" << opt.r_a
            << " r_b=" << opt.r_b << "\n";
        log << "iterations=" << model.iterations << " converged=" << (model.converged ? "yes" : "no")
            << " objective=" << format_g12(model.objective_trace.back()) << "\n";
        auto spectrum = [&](const HermitianMatrix& m) {
            std::ostringstream ss;
            const EigenPairs e = hermitian_eig(m);
            for (Index i = 0; i < e.values.size(); ++i)
                ss << (i ? " " : "") << format_g12(e.values(i));
            return ss.str();
        };
        log << "spatial factor eigenvalues: " << spectrum(model.a_factor) << "\n";
        log << "temporal factor eigenvalues: " << spectrum(model.b_factor) << "\n";
        log << "wrote " << opt.output << "\n";
    }
    return model;
}

struct FilterOptions {
    std::string input;
    std::string model;
    std::string kind = "kron-stap"; // kron-stap | kron-classical | spatial | lr
    Index doppler_bins = 150;
    Index lr_rank = 0; // lr kind: 0 -> model.r_a * model.r_b
    std::string output;
};

/// filter: apply the chosen clutter canceler to every range bin and write
/// the per-bin, per-Doppler detection statistics as CSV (one row per bin).
/// The lr kind trains on the input file's own sample covariance.
inline void run_filter(const FilterOptions& opt, std::ostream& log, bool quiet = false) {
    if (opt.output.empty()) throw ConfigError("filter: no output path");
    if (opt.doppler_bins < 1) throw ConfigError("filter: doppler-bins must be >= 1");
    const KronCovModel model = read_kcov(opt.model);
    const KphdHeader h = read_kphd_header(opt.input);
    if (h.p != model.p() || h.q != model.q())
        throw ConfigError("filter: model dimensions (" + std::to_string(model.p()) + "," +
                          std::to_string(model.q()) + ") do not match data (" +
                          std::to_string(h.p) + "," + std::to_string(h.q) + ")");
    const SampleSet data = read_kphd(opt.input);

    StapFilter f;
    if (opt.kind == "kron-stap") f = kron_stap_filter(model);
    else if (opt.kind == "kron-classical") f = kron_classical_filter(model);
    else if (opt.kind == "spatial" || opt.kind == "kron-spatial") f = spatial_only_filter(model);
    else if (opt.kind == "lr") {
        if (data.samples.empty()) throw ConfigError("filter: lr kind needs at least one sample");
        const Index r = opt.lr_rank > 0 ? opt.lr_rank : model.r_a * model.r_b;
        f = lr_stap_filter(sample_covariance(data), h.p, h.q, r);
    } else {
        throw ConfigError("filter: unknown kind '" + opt.kind + "'");
    }
    for (const auto& w : f.warnings)
        if (!quiet) log << "warning: " << w << "\n";

    // Detection statistics already maximize over the spatial steering in
    // closed form; the bank spans the Doppler axis.
    const std::vector<SteeringVector> bank =
        steering_bank(h.p, h.q, doppler_grid(opt.doppler_bins), 1.0);
    std::ostringstream csv;
    for (const auto& x : data.samples) {
        const std::vector<double> stats = detection_statistic(f, x, bank);
        for (size_t i = 0; i < stats.size(); ++i)
            csv << (i ? "," : "") << format_g12(stats[i]);
        csv << '\n';
    }
    detail::spit(opt.output, csv.str());
    if (!quiet)
        log << "filter: kind=" << opt.kind << " bins=" << data.count()
            << " doppler-bins=" << opt.doppler_bins << "\nwrote " << opt.output << "\n";
}

/// experiment: load + validate config, run the Monte Carlo suite, write the
/// report CSV. Returns the report.
inline ExperimentReport run_experiment_cmd(const std::string& config_path,
                                           std::optional<std::uint64_t> seed_override,
                                           const std::string& output_override,
                                           std::ostream& log, bool quiet = false) {
    ExperimentConfig cfg = load_experiment_config(ConfigMap::parse_file(config_path));
    if (seed_override) cfg.seed = *seed_override;
    if (!output_override.empty()) cfg.output = output_override;
    if (cfg.output.empty())
        throw ConfigError("experiment: no output path (config 'output' or --output)");
    const ExperimentReport rep = run_experiment(cfg);
    write_report_csv_file(rep, cfg.output);
    if (!quiet) {
        log << "experiment: " << rep.experiment << " trials=" << rep.trial_count
            << " seed=" << rep.seed << " runtime=" << format_g12(rep.runtime_sec) << "s\n";
        log << "wrote " << cfg.output << "\n";
    }
    return rep;
}

} // namespace kstap
