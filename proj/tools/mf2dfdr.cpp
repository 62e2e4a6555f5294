#include "mf2dfdr/config.hpp"
#include "mf2dfdr/run.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

namespace {

struct Flag {
    const char* key;
    const char* help;
};

// Shared by every subcommand.
const Flag kSharedFlags[] = {
    {"x", "covariate file (delimited text with header)"},
    {"y", "feature matrix file"},
    {"z", "confounder file"},
    {"x-kind", "covariate kind: continuous|binary (inferred when absent)"},
    {"y-kind", "feature kind: continuous|binary|count (inferred when absent)"},
    {"stat", "glm:<family>|rv|hsic|categorical|basis-wald[:J1,J2]"},
    {"sampler", "residual-perm|residual-boot|parametric-logistic|binned-perm"},
    {"b", "number of resampled covariates B"},
    {"q", "target level"},
    {"method", "mf2d-fdr|mf2d-fwer|mf1d|bh|exchangeable-path|ordered-grid"},
    {"pi0-lambda", "enable the Storey null-proportion estimate at this lambda (or 'auto')"},
    {"spline-df", "spline df for conditional RV residualization (0 = linear)"},
    {"sampler-spline-df", "spline df for the residual sampler's z basis (0 = linear)"},
    {"epsilon", "cHSIC regularization"},
    {"bandwidth", "kernel bandwidth or 'median'"},
    {"grid", "quantile:<G>|observed"},
    {"path-length", "points on the default monotone path"},
    {"bin-col", "z column used by binned-perm"},
    {"bin-edges", "comma-separated increasing bin edges for binned-perm"},
    {"seed", "root seed"},
    {"threads", "worker threads (0 = all cores)"},
    {"out", "output path"},
};

const Flag kSimulateFlags[] = {
    {"dgp", "data generating process id(s) 1..11, comma-separated"},
    {"n", "sample size"},
    {"m", "number of features"},
    {"rho", "confounding degree(s)"},
    {"pi", "signal density(ies)"},
    {"l", "effect size(s)"},
    {"reps", "replications per setting"},
    {"ar1", "AR(1) coefficient for feature errors"},
    {"pi-alpha", "density of the signal of interest"},
    {"pi-beta", "density of the confounding signal"},
};

const Flag kPreprocessFlags[] = {
    {"input", "count matrix file (rows = samples)"},
    {"prevalence-min", "keep features present in at least this fraction of rows"},
    {"rarefy", "subsample rows to the minimum total (true/false)"},
    {"clr", "centered log-ratio transform (true/false)"},
    {"pseudocount", "pseudo-count added before CLR"},
    {"binarize", "presence/absence transform (true/false)"},
};

struct Subcommand {
    CLI::App* app = nullptr;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config_path;
};

template <std::size_t N>
void add_flags(Subcommand& sc, const Flag (&flags)[N]) {
    for (const auto& f : flags)
        sc.options[f.key] = sc.app->add_option(std::string("--") + f.key, sc.values[f.key], f.help);
}

}  // namespace

int main(int argc, char** argv) {
    using namespace mf2dfdr;
    CLI::App app{"Model-free two-dimensional FDR control"};
    app.require_subcommand(1);

    std::map<std::string, Subcommand> subs;
    const std::pair<const char*, const char*> modes[] = {
        {"analyze", "estimate the rejection region on a dataset"},
        {"simulate", "run simulation experiments"},
        {"grid-dump", "write the 2-D decision surface"},
        {"preprocess", "filter and transform a count matrix"},
    };
    for (const auto& [name, help] : modes) {
        Subcommand& sc = subs[name];
        sc.app = app.add_subcommand(name, help);
        sc.app->add_option("--config", sc.config_path, "key = value configuration file");
        add_flags(sc, kSharedFlags);
        if (std::string(name) == "simulate") add_flags(sc, kSimulateFlags);
        if (std::string(name) == "preprocess") add_flags(sc, kPreprocessFlags);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        for (auto& [name, sc] : subs) {
            if (!sc.app->parsed()) continue;
            cli::Settings flags;
            for (const auto& [key, opt] : sc.options)
                if (opt->count() > 0) flags[key] = {sc.values[key], "--" + key};
            const auto config = cli::parse_config(cli::mode_from_string(name), sc.config_path, flags);
            cli::run(config, std::cerr);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
