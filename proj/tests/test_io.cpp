#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "kstap/cli.hpp"
#include "kstap/io.hpp"
#include "kstap/sim.hpp"
#include "oracles.hpp"

using namespace kstap;

namespace {

struct TempDir {
    std::filesystem::path dir;
    TempDir() {
        dir = std::filesystem::temp_directory_path() /
              ("kstap_test_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter()++));
        std::filesystem::create_directories(dir);
    }
    ~TempDir() { std::filesystem::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

SampleSet small_set(std::uint64_t seed) {
    ClutterScenario sc;
    sc.p = 3;
    sc.q = 8;
    sc.h = ideal_h(3);
    sc.b_true = make_b_random(8, 3, 1.5, seed + 1);
    sc.sigma2 = 1e-3;
    sc.rng_seed = seed;
    return sample_clutter(sc, 7);
}

} // namespace

TEST_CASE("KPHD: bit-exact round trip and size arithmetic") {
    TempDir tmp;
    const SampleSet data = small_set(11);
    const std::string path = tmp.path("a.kphd");
    write_kphd(path, data);

    // header (4 + 2 + 3*4 = 18 bytes) + n*p*q*16 payload
    REQUIRE(std::filesystem::file_size(path) ==
            18u + 7u * 3u * 8u * 16u);

    const SampleSet back = read_kphd(path);
    REQUIRE(back.p == data.p);
    REQUIRE(back.q == data.q);
    REQUIRE(back.count() == data.count());
    for (Index m = 0; m < data.count(); ++m)
        for (Index i = 0; i < data.dim(); ++i)
            REQUIRE(back.samples[static_cast<size_t>(m)](i) ==
                    data.samples[static_cast<size_t>(m)](i));

    // writing the same set twice gives identical bytes
    const std::string path2 = tmp.path("b.kphd");
    write_kphd(path2, data);
    REQUIRE(read_bytes(path) == read_bytes(path2));
}

TEST_CASE("KPHD: corrupt headers name the offending field") {
    TempDir tmp;
    const SampleSet data = small_set(13);
    const std::string path = tmp.path("c.kphd");
    write_kphd(path, data);
    std::string bytes = read_bytes(path);

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    write_bytes(tmp.path("m.kphd"), bad_magic);
    REQUIRE_THROWS_WITH(read_kphd(tmp.path("m.kphd")), Catch::Matchers::ContainsSubstring("magic"));

    std::string bad_version = bytes;
    bad_version[4] = 9;
    write_bytes(tmp.path("v.kphd"), bad_version);
    REQUIRE_THROWS_WITH(read_kphd(tmp.path("v.kphd")),
                        Catch::Matchers::ContainsSubstring("version"));

    std::string truncated = bytes.substr(0, bytes.size() - 8);
    write_bytes(tmp.path("t.kphd"), truncated);
    REQUIRE_THROWS_AS(read_kphd(tmp.path("t.kphd")), FormatError);

    std::string bad_n = bytes;
    bad_n[14] = static_cast<char>(bad_n[14] + 1); // declared n no longer matches payload
    write_bytes(tmp.path("n.kphd"), bad_n);
    REQUIRE_THROWS_AS(read_kphd(tmp.path("n.kphd")), FormatError);

    REQUIRE_THROWS_AS(read_kphd(tmp.path("missing.kphd")), IoError);
}

TEST_CASE("KCOV: bit-exact round trip") {
    TempDir tmp;
    const SampleSet data = small_set(17);
    const KronCovModel model = lr_kron(sample_covariance(data), 3, 8, 1, 3);
    const std::string path = tmp.path("m.kcov");
    write_kcov(path, model);
    const KronCovModel back = read_kcov(path);
    REQUIRE(back.r_a == model.r_a);
    REQUIRE(back.r_b == model.r_b);
    for (Index j = 0; j < 3; ++j)
        for (Index i = 0; i < 3; ++i)
            REQUIRE(back.a_factor.mat(i, j) == model.a_factor.mat(i, j));
    for (Index j = 0; j < 8; ++j)
        for (Index i = 0; i < 8; ++i)
            REQUIRE(back.b_factor.mat(i, j) == model.b_factor.mat(i, j));

    // write-read-write is byte stable
    const std::string path2 = tmp.path("m2.kcov");
    write_kcov(path2, back);
    REQUIRE(read_bytes(path) == read_bytes(path2));

    std::string bytes = read_bytes(path);
    bytes[6] = 9; // p
    write_bytes(tmp.path("bad.kcov"), bytes);
    REQUIRE_THROWS_AS(read_kcov(tmp.path("bad.kcov")), FormatError);
}

TEST_CASE("config parser: grammar, lists, comments, line-numbered errors") {
    ConfigMap m = ConfigMap::parse_string("a.x = 3 # comment\n\n b.y= 2.5\nlist = 1 2 3\n", "f");
    REQUIRE(m.get_index("a.x", 0) == 3);
    REQUIRE(m.get_double("b.y", 0.0) == 2.5);
    const auto lst = m.get_index_list("list");
    REQUIRE(lst == std::vector<Index>{1, 2, 3});
    m.finish();

    REQUIRE_THROWS_WITH(ConfigMap::parse_string("novalue\n", "f"),
                        Catch::Matchers::ContainsSubstring("f:1"));
    REQUIRE_THROWS_WITH(ConfigMap::parse_string("a = 1\na = 2\n", "f"),
                        Catch::Matchers::ContainsSubstring("duplicate"));

    ConfigMap unknown = ConfigMap::parse_string("a = 1\n", "f");
    REQUIRE_THROWS_WITH(unknown.finish(), Catch::Matchers::ContainsSubstring("unknown key 'a'"));

    ConfigMap bad = ConfigMap::parse_string("x = abc\n", "f");
    REQUIRE_THROWS_AS(bad.get_double("x", 0.0), ConfigError);
}

TEST_CASE("experiment config: required keys and rejection before output") {
    REQUIRE_THROWS_WITH(
        load_experiment_config(ConfigMap::parse_string("trials = 3\naxis = 1\n", "f")),
        Catch::Matchers::ContainsSubstring("experiment"));
    REQUIRE_THROWS_WITH(load_experiment_config(ConfigMap::parse_string(
                            "experiment = ms-residual-vs-n\nbogus.key = 1\naxis = 5\n", "f")),
                        Catch::Matchers::ContainsSubstring("bogus.key"));
    REQUIRE_THROWS_AS(load_experiment_config(ConfigMap::parse_string(
                          "experiment = ms-residual-vs-n\n", "f")),
                      ConfigError); // missing axis
    const ExperimentConfig ok = load_experiment_config(ConfigMap::parse_string(
        "experiment = ms-residual-vs-n\naxis = 2 4\nscenario.p = 2\nscenario.q = 6\n"
        "scenario.b_rank = 2\nestimator.r_b = 2\n",
        "f"));
    REQUIRE(ok.axis == std::vector<Index>{2, 4});
    REQUIRE(ok.q == 6);
}

TEST_CASE("cli simulate: determinism, refusal of n = 0, unwritable path") {
    TempDir tmp;
    std::ostringstream log;
    SimulateConfig cfg;
    cfg.n = 10;
    cfg.knobs.seed = 404;
    cfg.knobs.p = 3;
    cfg.knobs.q = 8;
    cfg.knobs.b_rank = 3;
    cfg.knobs.r_b = 3;
    cfg.knobs.output = tmp.path("s1.kphd");
    run_simulate(cfg, log, true);
    cfg.knobs.output = tmp.path("s2.kphd");
    run_simulate(cfg, log, true);
    REQUIRE(read_bytes(tmp.path("s1.kphd")) == read_bytes(tmp.path("s2.kphd")));
    REQUIRE(std::filesystem::file_size(tmp.path("s1.kphd")) == 18u + 10u * 3u * 8u * 16u);

    REQUIRE_THROWS_AS(load_simulate_config(ConfigMap::parse_string(
                          "sim.n = 0\noutput = x.kphd\n", "f")),
                      ConfigError);

    cfg.knobs.output = "/nonexistent_dir_kstap/x.kphd";
    REQUIRE_THROWS_WITH(run_simulate(cfg, log, true),
                        Catch::Matchers::ContainsSubstring("/nonexistent_dir_kstap/x.kphd"));
}

TEST_CASE("cli estimate: pipeline, rank validation before payload") {
    TempDir tmp;
    std::ostringstream log;

    // noiseless low-rank scenario: reported objective is tiny
    SimulateConfig cfg;
    cfg.n = 60;
    cfg.knobs.seed = 505;
    cfg.knobs.p = 3;
    cfg.knobs.q = 8;
    cfg.knobs.b_rank = 3;
    cfg.knobs.r_b = 3;
    cfg.knobs.sigma2_abs = 0.0;
    cfg.knobs.output = tmp.path("clean.kphd");
    run_simulate(cfg, log, true);

    EstimateOptions opt;
    opt.input = tmp.path("clean.kphd");
    opt.output = tmp.path("clean.kcov");
    opt.r_a = 1;
    opt.r_b = 3;
    const KronCovModel model = run_estimate(opt, log, true);
    REQUIRE(model.objective_trace.back() < 1e-8);

    const KronCovModel loaded = read_kcov(opt.output);
    REQUIRE((loaded.a_factor.mat - model.a_factor.mat).norm() == 0.0);

    // ranks are validated against the header before the payload is read:
    // a truncated file with a valid header still reports the rank error
    std::string bytes = read_bytes(tmp.path("clean.kphd"));
    write_bytes(tmp.path("header_only.kphd"), bytes.substr(0, 18));
    EstimateOptions bad;
    bad.input = tmp.path("header_only.kphd");
    bad.output = tmp.path("x.kcov");
    bad.r_a = 1;
    bad.r_b = 9; // > q
    REQUIRE_THROWS_WITH(run_estimate(bad, log, true),
                        Catch::Matchers::ContainsSubstring("r_b"));
}

TEST_CASE("cli filter: bright injected target lands in the right Doppler column") {
    TempDir tmp;
    std::ostringstream log;
    const Index p = 3, q = 16;

    ClutterScenario sc;
    sc.p = p;
    sc.q = q;
    sc.h = ideal_h(p);
    sc.b_true = make_b_dft(q, {1.0, 0.7, 0.4});
    sc.sigma2 = 1e-5;
    sc.rng_seed = 606;
    SampleSet data = sample_clutter(sc, 12);

    // inject a bright target into bin 4 at Doppler 0.25
    TargetSpec t;
    t.doppler = 0.25;
    t.amplitude = cxd(0.5, 0.0);
    t.spatial_gain = 4.0 / 3.0;
    data.samples[4] += target_return(t, p, q);
    write_kphd(tmp.path("d.kphd"), data);

    EstimateOptions est;
    est.input = tmp.path("d.kphd");
    est.output = tmp.path("d.kcov");
    est.r_a = 1;
    est.r_b = 3;
    run_estimate(est, log, true);

    FilterOptions fo;
    fo.input = tmp.path("d.kphd");
    fo.model = tmp.path("d.kcov");
    fo.kind = "kron-stap";
    fo.doppler_bins = 32;
    fo.output = tmp.path("stats.csv");
    run_filter(fo, log, true);

    std::ifstream in(tmp.path("stats.csv"));
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    REQUIRE(rows.size() == 12);
    for (const auto& r : rows) REQUIRE(r.size() == 32);

    // arg-max column of the target row equals the injected Doppler bin
    const auto& target_row = rows[4];
    const size_t argmax = static_cast<size_t>(
        std::max_element(target_row.begin(), target_row.end()) - target_row.begin());
    const std::vector<double> grid = doppler_grid(32);
    REQUIRE(std::abs(grid[argmax] - 0.25) <= 0.5 / 32.0 + 1e-12);

    // dimension mismatch between model and data is rejected
    FilterOptions bad = fo;
    SampleSet other;
    other.p = 2;
    other.q = 16;
    other.samples.push_back(ComplexVector::Zero(32));
    write_kphd(tmp.path("other.kphd"), other);
    bad.input = tmp.path("other.kphd");
    REQUIRE_THROWS_AS(run_filter(bad, log, true), ConfigError);
}

TEST_CASE("cli experiment: seed override and deterministic CSV bytes") {
    TempDir tmp;
    std::ostringstream log;
    const std::string cfg_path = tmp.path("e.cfg");
    {
        std::ofstream out(cfg_path);
        out << "experiment = ms-residual-vs-n\nseed = 1\ntrials = 4\naxis = 1 10\n"
               "scenario.p = 2\nscenario.q = 8\nscenario.b_rank = 2\nestimator.r_b = 2\n"
               "test.bins = 10\nthreads = 2\n";
    }
    run_experiment_cmd(cfg_path, std::nullopt, tmp.path("r1.csv"), log, true);
    run_experiment_cmd(cfg_path, std::nullopt, tmp.path("r2.csv"), log, true);
    REQUIRE(read_bytes(tmp.path("r1.csv")) == read_bytes(tmp.path("r2.csv")));
    REQUIRE(read_bytes(tmp.path("r1.csv")).substr(0, 24) == "axis,method,mean,stderr\n");

    // --seed changes the numbers; equals a config carrying that seed
    run_experiment_cmd(cfg_path, std::uint64_t(77), tmp.path("r3.csv"), log, true);
    REQUIRE(read_bytes(tmp.path("r3.csv")) != read_bytes(tmp.path("r1.csv")));
    const std::string cfg2_path = tmp.path("e2.cfg");
    {
        std::ofstream out(cfg2_path);
        out << "experiment = ms-residual-vs-n\nseed = 77\ntrials = 4\naxis = 1 10\n"
               "scenario.p = 2\nscenario.q = 8\nscenario.b_rank = 2\nestimator.r_b = 2\n"
               "test.bins = 10\nthreads = 2\n";
    }
    run_experiment_cmd(cfg2_path, std::nullopt, tmp.path("r4.csv"), log, true);
    REQUIRE(read_bytes(tmp.path("r3.csv")) == read_bytes(tmp.path("r4.csv")));

    // missing required key: error before any output is created
    const std::string bad_path = tmp.path("bad.cfg");
    {
        std::ofstream out(bad_path);
        out << "trials = 4\n";
    }
    REQUIRE_THROWS_AS(
        run_experiment_cmd(bad_path, std::nullopt, tmp.path("never.csv"), log, true),
        ConfigError);
    REQUIRE_FALSE(std::filesystem::exists(tmp.path("never.csv")));
}

TEST_CASE("bundled presets parse and validate") {
    for (const char* name : {"fig2_desk.cfg", "fig3_desk.cfg", "fig4_desk.cfg",
                             "fig5_desk.cfg", "sinr_desk.cfg", "fig2_paper.cfg",
                             "auc_paper_r25.cfg", "auc_paper_r40.cfg"}) {
        const std::string path = std::string(KSTAP_CONFIG_DIR) + "/" + name;
        REQUIRE_NOTHROW(load_experiment_config(ConfigMap::parse_file(path)));
    }
}
