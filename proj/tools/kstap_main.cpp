#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kstap/kstap.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Kronecker-structured STAP toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // let subcommands use the global --seed/--output/--quiet

    bool quiet = false;
    std::string output;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    app.add_flag("--quiet", quiet, "suppress informational output");
    app.add_option("--output", output, "output path (overrides config)");
    app.add_option("--seed", seed_flag, "seed override")->each([&](const std::string&) {
        seed_set = true;
    });

    std::string sim_config;
    auto* sim = app.add_subcommand("simulate", "draw SIRV clutter bins into a KPHD file");
    sim->add_option("config", sim_config, "scenario config file")->required();

    kstap::EstimateOptions est;
    auto* estc = app.add_subcommand("estimate", "fit a low-rank Kronecker covariance model");
    estc->add_option("--input", est.input, "KPHD input")->required();
    estc->add_option("--ra", est.r_a, "spatial rank")->required();
    estc->add_option("--rb", est.r_b, "temporal rank")->required();
    estc->add_option("--tol", est.tol, "convergence tolerance");
    estc->add_option("--max-iter", est.max_iter, "iteration cap");

    kstap::FilterOptions flt;
    auto* fltc = app.add_subcommand("filter", "apply a STAP filter, write detection statistics");
    fltc->add_option("--input", flt.input, "KPHD input")->required();
    fltc->add_option("--model", flt.model, "KCOV model")->required();
    fltc->add_option("--kind", flt.kind, "kron-stap | kron-classical | spatial | lr");
    fltc->add_option("--doppler-bins", flt.doppler_bins, "steering bank size (default 150)");
    fltc->add_option("--lr-rank", flt.lr_rank, "rank for the lr kind");

    std::string exp_config;
    auto* expc = app.add_subcommand("experiment", "run a Monte Carlo experiment suite");
    expc->add_option("config", exp_config, "experiment config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            kstap::SimulateConfig cfg =
                kstap::load_simulate_config(kstap::ConfigMap::parse_file(sim_config));
            if (seed_set) cfg.knobs.seed = seed_flag;
            if (!output.empty()) cfg.knobs.output = output;
            kstap::run_simulate(cfg, std::cout, quiet);
        } else if (*estc) {
            est.output = output;
            kstap::run_estimate(est, std::cout, quiet);
        } else if (*fltc) {
            flt.output = output;
            kstap::run_filter(flt, std::cout, quiet);
        } else if (*expc) {
            kstap::run_experiment_cmd(exp_config,
                                      seed_set ? std::optional<std::uint64_t>(seed_flag)
                                               : std::nullopt,
                                      output, std::cout, quiet);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
