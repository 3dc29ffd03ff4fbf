#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kstap/covariance.hpp"
#include "kstap/errors.hpp"
#include "kstap/experiments.hpp"
#include "kstap/types.hpp"

namespace kstap {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

// ---------------------------------------------------------------------------
// Binary containers
//
// KPHD (phase history): magic "KPHD", version u16 = 1, p u32, q u32, n u32,
// all little-endian, then n records of p*q complex samples, antenna-major,
// interleaved (real, imag) float64. Header is 18 bytes; total size is
// 18 + n*p*q*16 bytes.
//
// KCOV (covariance model): magic "KCOV", version u16 = 1, p, q, r_a, r_b
// u32 little-endian, then the A factor (p*p entries) and B factor (q*q
// entries) as interleaved (real, imag) float64, column-major. Header is
// 22 bytes; round trips are bit-exact.
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kKphdVersion = 1;
inline constexpr std::uint16_t kKcovVersion = 1;

namespace detail {

inline void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xFF));
    buf.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline void put_u32(std::string& buf, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) buf.push_back(static_cast<char>((v >> s) & 0xFF));
}

inline void put_f64(std::string& buf, double v) {
    char raw[8];
    std::memcpy(raw, &v, 8);
    buf.append(raw, 8);
}

class Cursor {
public:
    Cursor(const std::string& data, const std::string& what) : data_(data), what_(what) {}

    std::uint16_t u16(const char* field) {
        need(2, field);
        std::uint16_t v = static_cast<std::uint8_t>(data_[pos_]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(data_[pos_ + 1])) << 8);
        pos_ += 2;
        return v;
    }

    std::uint32_t u32(const char* field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    double f64(const char* field) {
        need(8, field);
        double v;
        std::memcpy(&v, data_.data() + pos_, 8);
        pos_ += 8;
        return v;
    }

    void expect_magic(const char* magic) {
        need(4, "magic");
        if (std::memcmp(data_.data() + pos_, magic, 4) != 0)
            throw FormatError(what_ + ": bad magic (expected " + magic + ")");
        pos_ += 4;
    }

    size_t remaining() const { return data_.size() - pos_; }

private:
    void need(size_t bytes, const char* field) {
        if (data_.size() - pos_ < bytes)
            throw FormatError(what_ + ": truncated while reading field '" + field + "'");
    }
    const std::string& data_;
    std::string what_;
    size_t pos_ = 0;
};

inline std::string slurp(const std::string& path, size_t max_bytes = size_t(1) << 40) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string data = ss.str();
    if (data.size() > max_bytes) throw FormatError(path + ": file too large");
    return data;
}

inline void spit(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed: " + path);
}

inline void check_finite(double v, const std::string& what) {
    if (!std::isfinite(v)) throw FormatError(what + ": non-finite entry");
}

} // namespace detail

inline void write_kphd(const std::string& path, const SampleSet& data) {
    std::string buf;
    buf.reserve(18 + data.samples.size() * static_cast<size_t>(data.dim()) * 16);
    buf.append("KPHD", 4);
    detail::put_u16(buf, kKphdVersion);
    detail::put_u32(buf, static_cast<std::uint32_t>(data.p));
    detail::put_u32(buf, static_cast<std::uint32_t>(data.q));
    detail::put_u32(buf, static_cast<std::uint32_t>(data.count()));
    for (const auto& x : data.samples) {
        if (x.size() != data.dim())
            throw ArgumentError("write_kphd: sample length mismatch");
        for (Index i = 0; i < x.size(); ++i) {
            detail::put_f64(buf, x(i).real());
            detail::put_f64(buf, x(i).imag());
        }
    }
    detail::spit(path, buf);
}

struct KphdHeader {
    Index p = 0, q = 0, n = 0;
};

inline KphdHeader parse_kphd_header(const std::string& data, const std::string& what) {
    detail::Cursor c(data, what);
    c.expect_magic("KPHD");
    const std::uint16_t ver = c.u16("version");
    if (ver != kKphdVersion)
        throw FormatError(what + ": unsupported version " + std::to_string(ver));
    KphdHeader h;
    h.p = static_cast<Index>(c.u32("p"));
    h.q = static_cast<Index>(c.u32("q"));
    h.n = static_cast<Index>(c.u32("n"));
    if (h.p < 1 || h.q < 1)
        throw FormatError(what + ": p and q must be >= 1");
    return h;
}

inline KphdHeader read_kphd_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string head(18, '\0');
    in.read(head.data(), 18);
    head.resize(static_cast<size_t>(std::max<std::streamsize>(in.gcount(), 0)));
    return parse_kphd_header(head, path);
}

inline SampleSet read_kphd(const std::string& path) {
    const std::string data = detail::slurp(path);
    const KphdHeader h = parse_kphd_header(data, path);
    const size_t expect = 18 + static_cast<size_t>(h.n) * static_cast<size_t>(h.p) *
                                   static_cast<size_t>(h.q) * 16;
    if (data.size() != expect)
        throw FormatError(path + ": payload size does not match declared n (expected " +
                          std::to_string(expect) + " bytes, got " + std::to_string(data.size()) + ")");
    detail::Cursor c(data, path);
    c.expect_magic("KPHD");
    c.u16("version");
    c.u32("p");
    c.u32("q");
    c.u32("n");
    SampleSet out;
    out.p = h.p;
    out.q = h.q;
    out.samples.reserve(static_cast<size_t>(h.n));
    for (Index m = 0; m < h.n; ++m) {
        ComplexVector x(h.p * h.q);
        for (Index i = 0; i < x.size(); ++i) {
            const double re = c.f64("sample");
            const double im = c.f64("sample");
            detail::check_finite(re, path);
            detail::check_finite(im, path);
            x(i) = cxd(re, im);
        }
        out.samples.push_back(std::move(x));
    }
    return out;
}

inline void write_kcov(const std::string& path, const KronCovModel& model) {
    std::string buf;
    buf.append("KCOV", 4);
    detail::put_u16(buf, kKcovVersion);
    detail::put_u32(buf, static_cast<std::uint32_t>(model.p()));
    detail::put_u32(buf, static_cast<std::uint32_t>(model.q()));
    detail::put_u32(buf, static_cast<std::uint32_t>(model.r_a));
    detail::put_u32(buf, static_cast<std::uint32_t>(model.r_b));
    for (const ComplexMatrix* m : {&model.a_factor.mat, &model.b_factor.mat})
        for (Index j = 0; j < m->cols(); ++j)
            for (Index i = 0; i < m->rows(); ++i) {
                detail::put_f64(buf, (*m)(i, j).real());
                detail::put_f64(buf, (*m)(i, j).imag());
            }
    detail::spit(path, buf);
}

inline KronCovModel read_kcov(const std::string& path) {
    const std::string data = detail::slurp(path);
    detail::Cursor c(data, path);
    c.expect_magic("KCOV");
    const std::uint16_t ver = c.u16("version");
    if (ver != kKcovVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(ver));
    const Index p = static_cast<Index>(c.u32("p"));
    const Index q = static_cast<Index>(c.u32("q"));
    const Index r_a = static_cast<Index>(c.u32("r_a"));
    const Index r_b = static_cast<Index>(c.u32("r_b"));
    if (p < 1 || q < 1) throw FormatError(path + ": p and q must be >= 1");
    if (r_a < 1 || r_a > p || r_b < 1 || r_b > q)
        throw FormatError(path + ": ranks out of range");
    const size_t payload = (static_cast<size_t>(p) * static_cast<size_t>(p) +
                            static_cast<size_t>(q) * static_cast<size_t>(q)) * 16;
    if (c.remaining() != payload)
        throw FormatError(path + ": payload size mismatch");
    auto read_mat = [&](Index d) {
        ComplexMatrix m(d, d);
        for (Index j = 0; j < d; ++j)
            for (Index i = 0; i < d; ++i) {
                const double re = c.f64("factor");
                const double im = c.f64("factor");
                detail::check_finite(re, path);
                detail::check_finite(im, path);
                m(i, j) = cxd(re, im);
            }
        return m;
    };
    KronCovModel model;
    try {
        model.a_factor = HermitianMatrix(read_mat(p), /*psd_hint=*/true);
        model.b_factor = HermitianMatrix(read_mat(q), /*psd_hint=*/true);
    } catch (const ValidationError& e) {
        throw FormatError(path + ": stored factor is not Hermitian (" + e.what() + ")");
    }
    model.r_a = r_a;
    model.r_b = r_b;
    return model;
}

// ---------------------------------------------------------------------------
// Flat key-value configuration: `section.key = value`, '#' comments, list
// values whitespace-separated. Unknown and duplicate keys are rejected, and
// nothing is written anywhere until the whole config validates.
// ---------------------------------------------------------------------------

class ConfigMap {
public:
    static ConfigMap parse_string(const std::string& text, const std::string& what = "<config>") {
        ConfigMap cm;
        cm.what_ = what;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const size_t eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError(what + ":" + std::to_string(lineno) + ": expected 'key = value'");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ConfigError(what + ":" + std::to_string(lineno) + ": empty key");
            if (cm.entries_.count(key))
                throw ConfigError(what + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
            cm.entries_[key] = Entry{value, lineno, false};
        }
        return cm;
    }

    static ConfigMap parse_file(const std::string& path) {
        return parse_string(detail::slurp(path), path);
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& dflt) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return dflt;
        it->second.used = true;
        return it->second.value;
    }

    std::string require_string(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end())
            throw ConfigError(what_ + ": missing required key '" + key + "'");
        it->second.used = true;
        return it->second.value;
    }

    double get_double(const std::string& key, double dflt) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return dflt;
        it->second.used = true;
        return parse_double(it->second.value, key, it->second.line);
    }

    Index get_index(const std::string& key, Index dflt) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return dflt;
        it->second.used = true;
        return parse_integer(it->second.value, key, it->second.line);
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return dflt;
        it->second.used = true;
        const Index v = parse_integer(it->second.value, key, it->second.line);
        if (v < 0) throw ConfigError(loc(key) + ": must be non-negative");
        return static_cast<std::uint64_t>(v);
    }

    std::vector<double> get_double_list(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return {};
        it->second.used = true;
        std::vector<double> out;
        std::istringstream ss(it->second.value);
        std::string tok;
        while (ss >> tok) out.push_back(parse_double(tok, key, it->second.line));
        return out;
    }

    std::vector<Index> get_index_list(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return {};
        it->second.used = true;
        std::vector<Index> out;
        std::istringstream ss(it->second.value);
        std::string tok;
        while (ss >> tok) out.push_back(parse_integer(tok, key, it->second.line));
        return out;
    }

    /// Reject any key that was never consumed by a loader.
    void finish() const {
        for (const auto& [key, e] : entries_)
            if (!e.used)
                throw ConfigError(what_ + ":" + std::to_string(e.line) + ": unknown key '" + key + "'");
    }

private:
    struct Entry {
        std::string value;
        int line = 0;
        bool used = false;
    };

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    std::string loc(const std::string& key) const {
        auto it = entries_.find(key);
        return what_ + ":" + std::to_string(it == entries_.end() ? 0 : it->second.line) +
               ": key '" + key + "'";
    }

    double parse_double(const std::string& s, const std::string& key, int line) const {
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw ConfigError(what_ + ":" + std::to_string(line) + ": key '" + key +
                              "': not a number: '" + s + "'");
        return v;
    }

    Index parse_integer(const std::string& s, const std::string& key, int line) const {
        long long v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw ConfigError(what_ + ":" + std::to_string(line) + ": key '" + key +
                              "': not an integer: '" + s + "'");
        return static_cast<Index>(v);
    }

    std::string what_;
    std::map<std::string, Entry> entries_;
};

namespace detail {

inline void load_scenario_keys(ConfigMap& m, ExperimentConfig& c) {
    c.p = m.get_index("scenario.p", c.p);
    c.q = m.get_index("scenario.q", c.q);
    c.h_mode = m.get_string("scenario.h", c.h_mode);
    c.secondary_eig = m.get_double("scenario.secondary.eigenvalue", c.secondary_eig);
    c.secondary_doppler = m.get_double("scenario.secondary.doppler", c.secondary_doppler);
    c.b_modes = m.get_string("scenario.b_modes", c.b_modes);
    c.b_rank = m.get_index("scenario.b_rank", c.b_rank);
    c.b_decades = m.get_double("scenario.b_decades", c.b_decades);
    c.b_eigs = m.get_double_list("scenario.b_eigs");
    c.sigma2_rel = m.get_double("scenario.sigma2_rel", c.sigma2_rel);
    c.sigma2_abs = m.get_double("scenario.sigma2", c.sigma2_abs);
    c.texture_dof = m.get_double("scenario.texture_dof", c.texture_dof);
    c.spatial_gain = m.get_double("scenario.spatial_gain", c.spatial_gain);
    if (c.p < 1 || c.q < 1) throw ConfigError("scenario.p and scenario.q must be >= 1");
    if (c.b_rank < 1 || c.b_rank > c.q) throw ConfigError("scenario.b_rank out of range");
    if (c.texture_dof <= 0.0) throw ConfigError("scenario.texture_dof must be > 0");
}

inline void load_estimator_keys(ConfigMap& m, ExperimentConfig& c) {
    c.r_a = m.get_index("estimator.r_a", c.r_a);
    c.r_b = m.get_index("estimator.r_b", c.r_b);
    c.tol = m.get_double("estimator.tol", c.tol);
    c.max_iter = m.get_index("estimator.max_iter", c.max_iter);
    c.lr_rank = m.get_index("lr.rank", c.lr_rank);
    if (c.r_a < 1 || c.r_a > c.p) throw ConfigError("estimator.r_a out of range");
    if (c.r_b < 1 || c.r_b > c.q) throw ConfigError("estimator.r_b out of range");
    if (c.tol <= 0.0) throw ConfigError("estimator.tol must be > 0");
    if (c.max_iter < 1) throw ConfigError("estimator.max_iter must be >= 1");
    if (c.lr_rank < 0 || c.lr_rank > c.p * c.q) throw ConfigError("lr.rank out of range");
}

} // namespace detail

/// Parse and fully validate an experiment config; throws ConfigError before
/// anything is written.
inline ExperimentConfig load_experiment_config(ConfigMap m) {
    ExperimentConfig c;
    c.experiment = m.require_string("experiment");
    c.seed = m.get_u64("seed", c.seed);
    c.trials = m.get_index("trials", c.trials);
    c.axis = m.get_index_list("axis");
    c.output = m.get_string("output", c.output);
    c.threads = m.get_index("threads", c.threads);
    detail::load_scenario_keys(m, c);
    detail::load_estimator_keys(m, c);
    c.test_bins = m.get_index("test.bins", c.test_bins);
    c.doppler_bins = m.get_index("test.doppler_bins", c.doppler_bins);
    c.target_amp = m.get_double("test.target_amp", c.target_amp);
    c.target_doppler = m.get_double("test.target_doppler", c.target_doppler);
    c.guard = m.get_double("test.guard", c.guard);
    c.corrupt_fraction = m.get_double("corrupt.fraction", c.corrupt_fraction);
    c.corrupt_amp_lo = m.get_double("corrupt.amp_lo", c.corrupt_amp_lo);
    c.corrupt_amp_hi = m.get_double("corrupt.amp_hi", c.corrupt_amp_hi);
    c.conv_n = m.get_index("conv.n", c.conv_n);
    c.conv_iters = m.get_index("conv.iters", c.conv_iters);
    c.conv_noise_factor = m.get_double("conv.noise_factor", c.conv_noise_factor);
    m.finish();

    static const char* known[] = {"ms-residual-vs-n", "sinr-loss-vs-n", "auc-vs-n",
                                  "auc-vs-n-corrupted", "lrkron-convergence"};
    bool ok = false;
    for (const char* k : known) ok = ok || c.experiment == k;
    if (!ok) throw ConfigError("unknown experiment '" + c.experiment + "'");
    if (c.trials < 1) throw ConfigError("trials must be >= 1");
    if (c.experiment != "lrkron-convergence") {
        if (c.axis.empty()) throw ConfigError("missing required key 'axis'");
        for (Index n : c.axis)
            if (n < 1) throw ConfigError("axis values must be >= 1");
    }
    if (c.test_bins < 1) throw ConfigError("test.bins must be >= 1");
    if (c.doppler_bins < 1) throw ConfigError("test.doppler_bins must be >= 1");
    if (c.guard < 0.0 || c.guard >= 0.5) throw ConfigError("test.guard must lie in [0, 0.5)");
    if (c.corrupt_fraction < 0.0 || c.corrupt_fraction > 1.0)
        throw ConfigError("corrupt.fraction must lie in [0, 1]");
    if (c.corrupt_amp_lo < 0.0 || c.corrupt_amp_hi < c.corrupt_amp_lo)
        throw ConfigError("corrupt.amp_lo/amp_hi must satisfy 0 <= lo <= hi");
    if (c.conv_n < 1 || c.conv_iters < 1) throw ConfigError("conv.n and conv.iters must be >= 1");
    return c;
}

/// Scenario + sample count for the simulate command.
struct SimulateConfig {
    ExperimentConfig knobs; // scenario fields + seed + output are used
    Index n = 0;
};

inline SimulateConfig load_simulate_config(ConfigMap m) {
    SimulateConfig sim;
    sim.knobs.seed = m.get_u64("seed", sim.knobs.seed);
    sim.knobs.output = m.get_string("output", "");
    sim.n = m.get_index("sim.n", 0);
    detail::load_scenario_keys(m, sim.knobs);
    m.finish();
    if (sim.n < 1) throw ConfigError("sim.n must be >= 1");
    return sim;
}

inline void write_report_csv_file(const ExperimentReport& rep, const std::string& path) {
    std::ostringstream ss;
    write_report_csv(rep, ss);
    detail::spit(path, ss.str());
}

} // namespace kstap
