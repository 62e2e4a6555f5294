#pragma once

#include "mf2dfdr/core.hpp"
#include "mf2dfdr/engine.hpp"
#include "mf2dfdr/io.hpp"
#include "mf2dfdr/samplers.hpp"
#include "mf2dfdr/sim.hpp"
#include "mf2dfdr/statistics.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

// =============================================================================
// Run configuration: `key = value` files plus command-line overrides, parsed
// into typed settings with errors that name the file line or flag.
// =============================================================================

namespace mf2dfdr::cli {

enum class Mode { analyze, simulate, grid_dump, preprocess };

inline const char* to_string(Mode m) {
    switch (m) {
        case Mode::analyze: return "analyze";
        case Mode::simulate: return "simulate";
        case Mode::grid_dump: return "grid-dump";
        case Mode::preprocess: return "preprocess";
    }
    return "?";
}

inline Mode mode_from_string(const std::string& s) {
    for (Mode m : {Mode::analyze, Mode::simulate, Mode::grid_dump, Mode::preprocess})
        if (s == to_string(m)) return m;
    throw ValidationError("unknown mode '" + s + "'");
}

// Every recognised key; flags use the same names with a leading "--".
inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "x", "y", "z", "input", "out", "x-kind", "y-kind",
        "stat", "spline-df", "epsilon", "bandwidth",
        "sampler", "sampler-spline-df", "bin-col", "bin-edges", "b", "seed", "threads",
        "q", "method", "pi0-lambda", "grid", "path-length",
        "dgp", "n", "m", "rho", "pi", "l", "reps", "ar1", "pi-alpha", "pi-beta",
        "prevalence-min", "rarefy", "clr", "pseudocount", "binarize"};
    return keys;
}

struct Setting {
    std::string value;
    std::string origin;  // "path:line" or "--flag"
};

using Settings = std::map<std::string, Setting>;

struct RunConfig {
    Mode mode = Mode::analyze;
    std::string x_path, y_path, z_path, input_path, out_path;
    io::KindOverrides kinds;
    engine::ProcedureConfig procedure;
    samplers::ResamplePlan plan;
    stats::StatisticSpec statistic;
    bool sampler_given = false, statistic_given = false;
    unsigned threads = 0;

    // simulate: every combination of these lists is one experiment.
    sim::SimConfig sim;
    std::vector<int> dgps{1};
    std::vector<double> rhos{1.0}, pis{0.1}, ls{0.3};
    std::vector<engine::Method> methods{engine::Method::mf2d_fdr};

    io::PreprocessOptions preprocess;

    // Effective settings after merging file and flags, for echoing.
    Settings settings;
};

namespace detail {

[[noreturn]] inline void fail(const Setting& s, const std::string& key, const std::string& msg) {
    throw ValidationError(s.origin + ": " + key + ": " + msg);
}

inline double to_double(const Setting& s, const std::string& key) {
    const auto v = io::parse_number(s.value);
    if (!v || !std::isfinite(*v)) fail(s, key, "expected a number, got '" + s.value + "'");
    return *v;
}

inline long long to_integer(const Setting& s, const std::string& key) {
    long long v = 0;
    const auto* end = s.value.data() + s.value.size();
    const auto [ptr, ec] = std::from_chars(s.value.data(), end, v);
    if (ec != std::errc() || ptr != end) fail(s, key, "expected an integer, got '" + s.value + "'");
    return v;
}

inline bool to_bool(const Setting& s, const std::string& key) {
    if (s.value == "true" || s.value == "1" || s.value == "yes" || s.value == "on") return true;
    if (s.value == "false" || s.value == "0" || s.value == "no" || s.value == "off") return false;
    fail(s, key, "expected true/false, got '" + s.value + "'");
}

inline std::vector<Setting> split_list(const Setting& s) {
    std::vector<Setting> out;
    for (const auto& part : io::split(s.value, ',')) {
        if (part.empty()) throw ValidationError(s.origin + ": empty element in list '" + s.value + "'");
        out.push_back({part, s.origin});
    }
    return out;
}

template <class Fn>
auto wrap(const Setting& s, const std::string& key, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        fail(s, key, e.what());
    }
}

}  // namespace detail

// Parses `key = value` lines; '#' starts a comment.
inline Settings parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(path + ": cannot open config file");
    const std::set<std::string> known(known_keys().begin(), known_keys().end());
    Settings out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = io::trim(line);
        if (line.empty()) continue;
        const std::string origin = path + ":" + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError(origin + ": expected 'key = value'");
        const std::string key = io::trim(line.substr(0, eq));
        const std::string value = io::trim(line.substr(eq + 1));
        if (!known.count(key)) throw ValidationError(origin + ": unknown key '" + key + "'");
        if (value.empty()) throw ValidationError(origin + ": " + key + ": missing value");
        out[key] = {value, origin};
    }
    return out;
}

// Applies merged settings on top of the defaults.
inline RunConfig build_config(Mode mode, const Settings& settings) {
    using detail::to_double;
    using detail::to_integer;
    RunConfig c;
    c.mode = mode;
    c.settings = settings;
    const std::set<std::string> known(known_keys().begin(), known_keys().end());
    for (const auto& [key, s] : settings)
        if (!known.count(key)) throw ValidationError(s.origin + ": unknown key '" + key + "'");
    auto get = [&](const std::string& key) -> const Setting* {
        const auto it = settings.find(key);
        return it == settings.end() ? nullptr : &it->second;
    };

    if (auto s = get("x")) c.x_path = s->value;
    if (auto s = get("y")) c.y_path = s->value;
    if (auto s = get("z")) c.z_path = s->value;
    if (auto s = get("input")) c.input_path = s->value;
    if (auto s = get("out")) c.out_path = s->value;
    if (auto s = get("x-kind")) c.kinds.x = detail::wrap(*s, "x-kind", [&] { return column_kind_from_string(s->value); });
    if (auto s = get("y-kind")) c.kinds.y = detail::wrap(*s, "y-kind", [&] { return column_kind_from_string(s->value); });

    if (auto s = get("stat")) {
        c.statistic = detail::wrap(*s, "stat", [&] { return stats::statistic_from_string(s->value); });
        c.statistic_given = true;
    }
    if (auto s = get("spline-df")) {
        const auto v = to_integer(*s, "spline-df");
        if (v != 0 && v < 3) detail::fail(*s, "spline-df", "must be 0 (linear) or >= 3");
        c.statistic.spline_df = static_cast<int>(v);
    }
    if (auto s = get("epsilon")) {
        c.statistic.kernel.epsilon = to_double(*s, "epsilon");
        if (!(c.statistic.kernel.epsilon > 0.0)) detail::fail(*s, "epsilon", "must be positive");
    }
    if (auto s = get("bandwidth")) {
        if (s->value == "median") {
            c.statistic.kernel.bandwidth = depstats::Bandwidth::median();
        } else {
            const double v = to_double(*s, "bandwidth");
            if (!(v > 0.0)) detail::fail(*s, "bandwidth", "must be positive (or 'median')");
            c.statistic.kernel.bandwidth = depstats::Bandwidth::fixed(v);
        }
    }

    if (auto s = get("sampler")) {
        c.plan.strategy = detail::wrap(*s, "sampler", [&] { return samplers::strategy_from_string(s->value); });
        c.sampler_given = true;
    }
    if (auto s = get("sampler-spline-df")) {
        const auto v = to_integer(*s, "sampler-spline-df");
        if (v != 0 && v < 3) detail::fail(*s, "sampler-spline-df", "must be 0 (linear) or >= 3");
        c.plan.spline_df = static_cast<int>(v);
    }
    if (auto s = get("bin-col")) {
        const auto v = to_integer(*s, "bin-col");
        if (v < 0) detail::fail(*s, "bin-col", "must be >= 0");
        c.plan.bin_column = static_cast<Index>(v);
    }
    if (auto s = get("bin-edges")) {
        for (const auto& e : detail::split_list(*s)) c.plan.bin_edges.push_back(to_double(e, "bin-edges"));
        for (std::size_t k = 1; k < c.plan.bin_edges.size(); ++k)
            if (!(c.plan.bin_edges[k] > c.plan.bin_edges[k - 1]))
                detail::fail(*s, "bin-edges", "edges must be strictly increasing");
    }
    if (c.plan.strategy == samplers::Strategy::binned_permute && c.plan.bin_edges.empty())
        throw ValidationError("binned-perm sampler needs --bin-edges");
    if (auto s = get("b")) {
        const auto v = to_integer(*s, "b");
        if (v < 1) detail::fail(*s, "b", "must be >= 1");
        c.plan.b_count = static_cast<Index>(v);
    }
    if (auto s = get("seed")) {
        const auto v = to_integer(*s, "seed");
        if (v < 0) detail::fail(*s, "seed", "must be >= 0");
        c.plan.seed = static_cast<std::uint64_t>(v);
    }
    if (auto s = get("threads")) {
        const auto v = to_integer(*s, "threads");
        if (v < 0) detail::fail(*s, "threads", "must be >= 0");
        c.threads = static_cast<unsigned>(v);
    }

    if (auto s = get("q")) {
        c.procedure.q = to_double(*s, "q");
        if (!(c.procedure.q > 0.0 && c.procedure.q < 1.0)) detail::fail(*s, "q", "must lie in (0, 1)");
    }
    if (auto s = get("method")) {
        c.methods.clear();
        for (const auto& part : detail::split_list(*s))
            c.methods.push_back(detail::wrap(part, "method", [&] { return engine::method_from_string(part.value); }));
        if (mode != Mode::simulate && c.methods.size() != 1) detail::fail(*s, "method", "expects a single method");
        c.procedure.method = c.methods.front();
    }
    if (auto s = get("pi0-lambda")) {
        c.procedure.storey = true;
        if (s->value != "auto") {
            const double v = to_double(*s, "pi0-lambda");
            if (!(v > 0.0)) detail::fail(*s, "pi0-lambda", "must be positive (or 'auto')");
            c.procedure.pi0_lambda = v;
        }
    }
    if (auto s = get("grid")) c.procedure.grid = detail::wrap(*s, "grid", [&] { return engine::grid_spec_from_string(s->value); });
    if (auto s = get("path-length")) {
        const auto v = to_integer(*s, "path-length");
        if (v < 1) detail::fail(*s, "path-length", "must be >= 1");
        c.procedure.path_length = static_cast<int>(v);
    }

    if (auto s = get("dgp")) {
        c.dgps.clear();
        for (const auto& part : detail::split_list(*s)) {
            const auto v = to_integer(part, "dgp");
            if (v < 1 || v > sim::kDgpCount) detail::fail(part, "dgp", "must lie in 1..11");
            c.dgps.push_back(static_cast<int>(v));
        }
    }
    auto real_list = [&](const char* key, std::vector<double>& target, double lo, double hi, bool open_lo) {
        if (auto s = get(key)) {
            target.clear();
            for (const auto& part : detail::split_list(*s)) {
                const double v = to_double(part, key);
                if (v > hi || v < lo || (open_lo && v == lo))
                    detail::fail(part, key, "out of range");
                target.push_back(v);
            }
        }
    };
    real_list("rho", c.rhos, 0.0, 1e6, false);
    real_list("pi", c.pis, 0.0, 1.0, false);
    real_list("l", c.ls, 0.0, 1e6, true);
    if (auto s = get("n")) {
        const auto v = to_integer(*s, "n");
        if (v < 5) detail::fail(*s, "n", "must be >= 5");
        c.sim.n = static_cast<Index>(v);
    }
    if (auto s = get("m")) {
        const auto v = to_integer(*s, "m");
        if (v < 1) detail::fail(*s, "m", "must be >= 1");
        c.sim.m = static_cast<Index>(v);
    }
    if (auto s = get("reps")) {
        const auto v = to_integer(*s, "reps");
        if (v < 1) detail::fail(*s, "reps", "must be >= 1");
        c.sim.reps = static_cast<int>(v);
    }
    if (auto s = get("ar1")) {
        const double v = to_double(*s, "ar1");
        if (!(std::abs(v) < 1.0)) detail::fail(*s, "ar1", "must lie in (-1, 1)");
        c.sim.ar1 = v;
    }
    auto density = [&](const char* key, std::optional<double>& target) {
        if (auto s = get(key)) {
            const double v = to_double(*s, key);
            if (!(v >= 0.0 && v <= 1.0)) detail::fail(*s, key, "must lie in [0, 1]");
            target = v;
        }
    };
    density("pi-alpha", c.sim.pi_alpha);
    density("pi-beta", c.sim.pi_beta);

    if (auto s = get("prevalence-min")) {
        c.preprocess.prevalence_min = to_double(*s, "prevalence-min");
        if (!(c.preprocess.prevalence_min >= 0.0 && c.preprocess.prevalence_min <= 1.0))
            detail::fail(*s, "prevalence-min", "must lie in [0, 1]");
    }
    if (auto s = get("rarefy")) c.preprocess.rarefy = detail::to_bool(*s, "rarefy");
    if (auto s = get("clr")) c.preprocess.clr = detail::to_bool(*s, "clr");
    if (auto s = get("binarize")) c.preprocess.binarize = detail::to_bool(*s, "binarize");
    if (auto s = get("pseudocount")) {
        c.preprocess.pseudocount = to_double(*s, "pseudocount");
        if (!(c.preprocess.pseudocount > 0.0)) detail::fail(*s, "pseudocount", "must be positive");
    }
    if (c.preprocess.clr && c.preprocess.binarize) throw ValidationError("clr and binarize are mutually exclusive");
    c.preprocess.seed = c.plan.seed;

    // Inputs each mode needs.
    auto require_file = [&](const std::string& key, const std::string& path) {
        if (path.empty()) throw ValidationError("missing required input --" + key);
        if (!std::filesystem::exists(path)) {
            const auto* s = get(key);
            throw ValidationError((s ? s->origin + ": " : std::string()) + key + ": file not found: " + path);
        }
    };
    switch (mode) {
        case Mode::analyze:
        case Mode::grid_dump:
            require_file("x", c.x_path);
            require_file("y", c.y_path);
            if (!c.z_path.empty()) require_file("z", c.z_path);
            break;
        case Mode::preprocess: require_file("input", c.input_path); break;
        case Mode::simulate: break;
    }
    if (c.out_path.empty()) throw ValidationError("missing required output --out");
    c.procedure.validate();
    return c;
}

// File settings first, flag settings override them key by key.
inline RunConfig parse_config(Mode mode, const std::string& config_path, const Settings& flags) {
    Settings merged;
    if (!config_path.empty()) merged = parse_config_file(config_path);
    for (const auto& [k, v] : flags) merged[k] = v;
    return build_config(mode, merged);
}

}  // namespace mf2dfdr::cli
