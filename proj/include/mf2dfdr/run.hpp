#pragma once

#include "mf2dfdr/config.hpp"
#include "mf2dfdr/engine.hpp"
#include "mf2dfdr/io.hpp"
#include "mf2dfdr/sim.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

// =============================================================================
// Mode drivers behind the command-line tool.
// =============================================================================

namespace mf2dfdr::cli {

// "<out>" with a trailing .json/.tsv removed; analyze writes <base>.json and <base>.tsv.
inline std::string output_base(const std::string& out) {
    for (const char* ext : {".json", ".tsv"}) {
        const std::string e(ext);
        if (out.size() > e.size() && out.compare(out.size() - e.size(), e.size(), e) == 0)
            return out.substr(0, out.size() - e.size());
    }
    return out;
}

inline Dataset load_for(const RunConfig& c) { return io::load_dataset(c.x_path, c.y_path, c.z_path, c.kinds); }

inline StatTensor tensor_for(const RunConfig& c, const Dataset& ds) {
    engine::BuildOptions options;
    options.threads = c.threads;
    return engine::build_tensor(ds, c.plan, c.statistic, options);
}

inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

struct AnalyzeOutput {
    nlohmann::json document;
    std::string table;
};

inline AnalyzeOutput analyze(const RunConfig& c, const Dataset& ds) {
    const auto start = std::chrono::steady_clock::now();
    const StatTensor t = tensor_for(c, ds);
    const engine::ProcedureResult res = engine::run_procedure(t, c.procedure);
    const auto pvalues = res.pvalues.empty() ? engine::resampling_pvalues(t) : res.pvalues;
    const auto& cut = res.cutoff;

    std::vector<bool> rejected(static_cast<std::size_t>(t.m()), false);
    for (Index j : cut.rejected) rejected[static_cast<std::size_t>(j)] = true;
    auto name = [&](Index j) {
        return static_cast<std::size_t>(j) < ds.feature_names.size() ? ds.feature_names[static_cast<std::size_t>(j)]
                                                                    : "f" + std::to_string(j + 1);
    };

    using nlohmann::json;
    json doc;
    doc["mode"] = "analyze";
    doc["method"] = engine::to_string(c.procedure.method);
    doc["q"] = c.procedure.q;
    doc["B"] = c.plan.b_count;
    doc["seed"] = c.plan.seed;
    doc["statistic"] = c.statistic.name();
    doc["sampler"] = samplers::to_string(c.plan.strategy);
    doc["grid"] = c.procedure.grid.name();
    doc["dimensions"] = {{"n", ds.n()}, {"m", ds.m()}, {"p", ds.p()}, {"d", ds.d()}};
    doc["x_kind"] = to_string(ds.x_kind);
    doc["y_kind"] = to_string(ds.y_kind);
    if (res.pi0) {
        doc["pi0"] = res.pi0->value;
        doc["pi0_lambda"] = res.pi0->lambda;
        if (!res.pi0->warning.empty()) doc["pi0_warning"] = res.pi0->warning;
    } else {
        doc["pi0"] = nullptr;
    }
    doc["cutoffs"] = {{"t1", number_or_null(cut.t1)}, {"t2", number_or_null(cut.t2)}};
    doc["fdp_estimate"] = cut.fdp_estimate;
    doc["rejections"] = cut.rejected.size();
    json names = json::array(), degenerate = json::array(), features = json::array();
    for (Index j : cut.rejected) names.push_back(name(j));
    int warnings = 0;
    std::ostringstream table;
    table << "feature\tt_m\tt_c\tfbar\tpvalue\trejected\tdegenerate\n";
    for (Index j = 0; j < t.m(); ++j) {
        const auto s = t.at(0, j);
        const double fb = std::isfinite(cut.t1) ? engine::fbar(t, j, cut.t1, cut.t2) : 0.0;
        const double p = pvalues[static_cast<std::size_t>(j)];
        if (t.degenerate(j)) degenerate.push_back(name(j));
        warnings += t.warnings(j);
        features.push_back({{"name", name(j)},
                            {"t_m", s.t_m},
                            {"t_c", s.t_c},
                            {"fbar", fb},
                            {"pvalue", p},
                            {"rejected", static_cast<bool>(rejected[static_cast<std::size_t>(j)])}});
        table << name(j) << '\t' << io::format_double(s.t_m) << '\t' << io::format_double(s.t_c) << '\t'
              << io::format_double(fb) << '\t' << io::format_double(p) << '\t'
              << (rejected[static_cast<std::size_t>(j)] ? 1 : 0) << '\t' << (t.degenerate(j) ? 1 : 0) << '\n';
    }
    doc["rejected"] = names;
    doc["degenerate"] = degenerate;
    doc["warnings"] = warnings;
    doc["features"] = features;
    json echo = json::object();
    for (const auto& [k, v] : c.settings)
        if (k != "method" && k != "out") echo[k] = v.value;
    doc["config"] = echo;
    doc["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {doc, table.str()};
}

inline void run_analyze(const RunConfig& c, std::ostream& log) {
    const Dataset ds = load_for(c);
    const auto out = analyze(c, ds);
    const std::string base = output_base(c.out_path);
    io::write_atomic(base + ".json", out.document.dump(2) + "\n");
    io::write_atomic(base + ".tsv", out.table);
    log << "analyze: " << out.document["rejections"].get<std::size_t>() << " of " << ds.m() << " features rejected ("
        << engine::to_string(c.procedure.method) << ", q=" << c.procedure.q << "); wrote " << base << ".json and "
        << base << ".tsv\n";
}

inline std::string grid_dump_table(const RunConfig& c, const Dataset& ds) {
    const StatTensor t = tensor_for(c, ds);
    double pi0 = 1.0;
    if (c.procedure.storey)
        pi0 = engine::storey_pi0(t, c.procedure.pi0_lambda.value_or(engine::default_pi0_lambda(t))).value;
    const auto grid = engine::make_grid(t, c.procedure.grid);
    std::ostringstream os;
    os << "t1\tt2\tsum_fbar\trejections\tfdp_tilde\n";
    for (const auto& r : engine::decision_surface(t, grid, pi0))
        os << io::format_double(r.t1) << '\t' << io::format_double(r.t2) << '\t' << io::format_double(r.sum_fbar) << '\t'
           << r.rejections << '\t' << io::format_double(r.fdp_tilde) << '\n';
    return os.str();
}

inline void run_grid_dump(const RunConfig& c, std::ostream& log) {
    const std::string table = grid_dump_table(c, load_for(c));
    io::write_atomic(c.out_path, table);
    log << "grid-dump: wrote " << c.out_path << "\n";
}

// One row per (dgp, rho, pi, l, method).
inline std::string simulate_table(const RunConfig& c, std::ostream& log) {
    std::ostringstream os;
    os << "dgp\trho\tpi\tl\tmethod\tfdr\tfdr_se\tpower\tpower_se\tfwer\tfwer_se\treps_completed\n";
    for (int dgp : c.dgps)
        for (double rho : c.rhos)
            for (double pi : c.pis)
                for (double l : c.ls) {
                    sim::SimConfig s = c.sim;
                    s.dgp = dgp;
                    s.rho = rho;
                    s.pi = pi;
                    s.l = l;
                    s.seed = c.plan.seed;
                    s.procedure = c.procedure;
                    s.methods = c.methods;
                    s.sampler = c.plan;
                    if (!c.sampler_given) s.sampler.strategy = sim::default_sampler_for(dgp);
                    s.statistic = c.statistic_given ? c.statistic : sim::default_statistic_for(dgp);
                    if (!c.statistic_given) {
                        s.statistic.spline_df = c.statistic.spline_df;
                        s.statistic.kernel = c.statistic.kernel;
                    }
                    s.threads = c.threads;
                    const auto result = sim::run_experiment(s);
                    for (const auto& f : result.failures) log << "simulate: dgp " << dgp << ", " << f << "\n";
                    for (const auto& sum : result.summaries)
                        os << dgp << '\t' << io::format_double(rho) << '\t' << io::format_double(pi) << '\t'
                           << io::format_double(l) << '\t' << engine::to_string(sum.method) << '\t'
                           << io::format_double(sum.empirical_fdr) << '\t' << io::format_double(sum.fdr_se) << '\t'
                           << io::format_double(sum.empirical_power) << '\t' << io::format_double(sum.power_se) << '\t'
                           << io::format_double(sum.empirical_fwer) << '\t' << io::format_double(sum.fwer_se) << '\t'
                           << sum.reps_completed << '\n';
                }
    return os.str();
}

inline void run_simulate(const RunConfig& c, std::ostream& log) {
    io::write_atomic(c.out_path, simulate_table(c, log));
    log << "simulate: wrote " << c.out_path << "\n";
}

inline void run_preprocess(const RunConfig& c, std::ostream& log) {
    const io::Table t = io::read_table(c.input_path);
    const auto res = io::preprocess_counts(t.values, c.preprocess);
    std::vector<std::string> names;
    for (Index k : res.kept) names.push_back(t.columns[static_cast<std::size_t>(k)]);
    io::write_matrix(c.out_path, res.values, names, t.row_names);
    log << "preprocess: kept " << res.kept.size() << " of " << t.values.cols() << " features; wrote " << c.out_path
        << "\n";
}

inline void run(const RunConfig& c, std::ostream& log) {
    switch (c.mode) {
        case Mode::analyze: run_analyze(c, log); break;
        case Mode::simulate: run_simulate(c, log); break;
        case Mode::grid_dump: run_grid_dump(c, log); break;
        case Mode::preprocess: run_preprocess(c, log); break;
    }
}

}  // namespace mf2dfdr::cli
