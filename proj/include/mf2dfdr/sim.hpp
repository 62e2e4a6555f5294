#pragma once

#include "mf2dfdr/core.hpp"
#include "mf2dfdr/engine.hpp"
#include "mf2dfdr/parallel.hpp"
#include "mf2dfdr/rng.hpp"
#include "mf2dfdr/samplers.hpp"
#include "mf2dfdr/statistics.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

// =============================================================================
// Simulation harness: signal generation, the eleven data generating
// processes, paired multi-method replications and Monte Carlo summaries.
// =============================================================================

namespace mf2dfdr::sim {

inline constexpr int kDgpCount = 11;

struct SimConfig {
    int dgp = 1;
    Index n = 100;
    Index m = 1000;
    double rho = 1.0;
    double pi = 0.1;
    double l = 0.3;
    int reps = 100;
    std::uint64_t seed = 1;
    std::optional<double> ar1;       // AR(1) coefficient across features (DGPs 1-8)
    std::optional<double> pi_alpha;  // overrides pi for the signal of interest
    std::optional<double> pi_beta;   // overrides pi for the confounding signal
    engine::ProcedureConfig procedure;
    std::vector<engine::Method> methods{engine::Method::mf2d_fdr};
    samplers::ResamplePlan sampler;
    stats::StatisticSpec statistic;
    unsigned threads = 0;

    void validate() const {
        if (dgp < 1 || dgp > kDgpCount) throw ValidationError("unknown dgp " + std::to_string(dgp) + " (expected 1..11)");
        if (n < 5) throw ValidationError("simulation needs n >= 5");
        if (m < 1) throw ValidationError("simulation needs m >= 1");
        if (!std::isfinite(rho) || rho < 0.0) throw ValidationError("rho must be finite and >= 0");
        for (double v : {pi, pi_alpha.value_or(pi), pi_beta.value_or(pi)})
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("signal densities must lie in [0, 1]");
        if (!(l > 0.0) || !std::isfinite(l)) throw ValidationError("effect size l must be positive");
        if (reps < 1) throw ValidationError("reps must be >= 1");
        if (ar1 && !(std::abs(*ar1) < 1.0)) throw ValidationError("AR(1) coefficient must lie in (-1, 1)");
        if (ar1 && dgp > 8) throw ValidationError("AR(1) errors apply to the additive DGPs 1-8 only");
        if (methods.empty()) throw ValidationError("at least one method is required");
        procedure.validate();
        statistic.validate();
    }
};

// Column kinds produced by each DGP.
struct DgpKinds {
    ColumnKind x = ColumnKind::continuous;
    ColumnKind y = ColumnKind::continuous;
    ColumnKind z = ColumnKind::continuous;
};

inline DgpKinds dgp_kinds(int dgp) {
    DgpKinds k;
    if (dgp >= 5 && dgp <= 8) k.x = ColumnKind::binary;
    if (dgp == 8) k.z = ColumnKind::binary;
    if (dgp == 9) k.y = ColumnKind::binary;
    if (dgp == 10 || dgp == 11) k.y = ColumnKind::count;
    return k;
}

// Sampler and statistic that fit each DGP's column kinds.
inline samplers::Strategy default_sampler_for(int dgp) {
    return dgp_kinds(dgp).x == ColumnKind::binary ? samplers::Strategy::parametric : samplers::Strategy::permute;
}

inline stats::StatisticSpec default_statistic_for(int dgp) {
    stats::StatisticSpec s;
    if (dgp == 9) s.family = glm::Family::binomial();
    if (dgp == 10) s.family = glm::Family::poisson();
    if (dgp == 11) s.family = glm::Family::negbinom(3.0);
    return s;
}

// ---------------------------------------------------------------------------
// Signals
// ---------------------------------------------------------------------------

struct Signals {
    Vector alpha, beta;
    TruthMask truth;
};

// One draw from (π/2)U(-l-0.2, -l) + (π/2)U(l, l+0.2) + (1-π)δ0.
inline double draw_mixture(double pi, double l, rng::Engine& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (!(unif(rng) < pi)) return 0.0;
    const double magnitude = l + 0.2 * unif(rng);
    return unif(rng) < 0.5 ? -magnitude : magnitude;
}

inline Signals gen_signals(Index m, double pi_alpha, double pi_beta, double l, rng::Engine& rng) {
    if (!(pi_alpha >= 0.0 && pi_alpha <= 1.0 && pi_beta >= 0.0 && pi_beta <= 1.0))
        throw ValidationError("signal densities must lie in [0, 1]");
    if (!(l > 0.0)) throw ValidationError("effect size l must be positive");
    Signals s;
    s.alpha.resize(m);
    s.beta.resize(m);
    s.truth.is_null.resize(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j) {
        s.alpha(j) = draw_mixture(pi_alpha, l, rng);
        s.beta(j) = draw_mixture(pi_beta, l, rng);
        s.truth.is_null[static_cast<std::size_t>(j)] = s.alpha(j) == 0.0;
    }
    return s;
}

inline Signals gen_signals(Index m, double pi, double l, rng::Engine& rng) { return gen_signals(m, pi, pi, l, rng); }

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct SimData {
    Dataset dataset;
    TruthMask truth;
    Vector alpha, beta;
};

namespace detail {

inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline double sample_sd(const Vector& v) {
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

// Negative binomial with the given size and mean, as a gamma-Poisson mixture.
inline double draw_negbinom(double size, double mu, rng::Engine& rng) {
    std::gamma_distribution<double> gamma(size, mu / size);
    const double lambda = gamma(rng);
    if (!(lambda > 0.0)) return 0.0;
    std::poisson_distribution<long long> pois(lambda);
    return static_cast<double>(pois(rng));
}

}  // namespace detail

inline SimData gen_dataset(const SimConfig& cfg, rng::Engine& rng) {
    if (cfg.dgp < 1 || cfg.dgp > kDgpCount) throw ValidationError("unknown dgp " + std::to_string(cfg.dgp));
    const Index n = cfg.n, m = cfg.m;
    const int dgp = cfg.dgp;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    SimData out;
    auto signals = gen_signals(m, cfg.pi_alpha.value_or(cfg.pi), cfg.pi_beta.value_or(cfg.pi), cfg.l, rng);

    Vector z(n), x(n);
    for (Index i = 0; i < n; ++i) z(i) = dgp == 8 ? (unif(rng) < 0.7 ? 1.0 : 0.0) : normal(rng);

    const DgpKinds kinds = dgp_kinds(dgp);
    for (Index i = 0; i < n; ++i) {
        const double zi = z(i);
        if (kinds.x == ColumnKind::binary) {
            x(i) = unif(rng) < detail::logistic(cfg.rho * zi) ? 1.0 : 0.0;
        } else {
            double h = zi;
            if (dgp == 2) h = zi * zi;
            if (dgp == 3 || dgp == 4) h = zi + zi * zi;
            x(i) = cfg.rho * h + normal(rng);
        }
    }
    if (kinds.x == ColumnKind::continuous) {
        const double sd = detail::sample_sd(x);
        if (sd > 0.0) x /= sd;
    }

    auto f_of_x = [dgp](double v) {
        switch (dgp) {
            case 2:
            case 3: return v * v * v;
            case 4: return v + std::abs(v * v * v);
            case 5:
            case 6:
            case 7: return std::exp(v);
            default: return v;
        }
    };
    auto g_of_z = [dgp](double v) {
        switch (dgp) {
            case 2:
            case 4:
            case 6: return std::exp(v);
            case 3: return v * v * v;
            case 7: return v * v;
            default: return v;
        }
    };

    Matrix y(n, m);
    if (dgp <= 8) {
        const double a = cfg.ar1.value_or(0.0);
        const double init_sd = cfg.ar1 ? 1.0 / std::sqrt(1.0 - a * a) : 1.0;
        Vector eps(n);
        for (Index j = 0; j < m; ++j) {
            for (Index i = 0; i < n; ++i) {
                const double e = normal(rng);
                eps(i) = (cfg.ar1 && j > 0) ? a * eps(i) + e : (cfg.ar1 ? init_sd * e : e);
            }
            for (Index i = 0; i < n; ++i)
                y(i, j) = signals.alpha(j) * f_of_x(x(i)) + signals.beta(j) * g_of_z(z(i)) + eps(i);
        }
    } else {
        for (Index j = 0; j < m; ++j)
            for (Index i = 0; i < n; ++i) {
                const double eta = signals.alpha(j) * x(i) + signals.beta(j) * z(i);
                if (dgp == 9) {
                    y(i, j) = unif(rng) < detail::logistic(eta) ? 1.0 : 0.0;
                } else if (dgp == 10) {
                    std::poisson_distribution<long long> pois(std::exp(eta));
                    y(i, j) = static_cast<double>(pois(rng));
                } else {
                    y(i, j) = detail::draw_negbinom(3.0, std::exp(eta), rng);
                }
            }
    }

    out.dataset.x = x;
    out.dataset.y = std::move(y);
    out.dataset.z = z;
    out.dataset.x_kind = kinds.x;
    out.dataset.y_kind = kinds.y;
    out.dataset.z_kind = {kinds.z};
    out.dataset.feature_names.reserve(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j) out.dataset.feature_names.push_back("f" + std::to_string(j + 1));
    out.truth = std::move(signals.truth);
    out.alpha = std::move(signals.alpha);
    out.beta = std::move(signals.beta);
    return out;
}

// ---------------------------------------------------------------------------
// Replications
// ---------------------------------------------------------------------------

struct Score {
    double fdp = 0.0;
    double power = 0.0;
    Index rejections = 0;
    Index false_rejections = 0;
};

inline Score score(const std::vector<Index>& rejected, const TruthMask& truth) {
    Score s;
    s.rejections = static_cast<Index>(rejected.size());
    for (Index j : rejected)
        if (truth.is_null[static_cast<std::size_t>(j)]) ++s.false_rejections;
    const Index non_null = truth.m() - truth.null_count();
    s.fdp = static_cast<double>(s.false_rejections) / static_cast<double>(std::max<Index>(1, s.rejections));
    s.power = static_cast<double>(s.rejections - s.false_rejections) / static_cast<double>(std::max<Index>(1, non_null));
    return s;
}

// One score per configured method, all computed on one shared dataset and tensor.
inline std::vector<Score> run_replication(const SimConfig& cfg, std::uint64_t rep_seed, unsigned threads = 1) {
    rng::Engine data_rng = rng::make_engine(rng::substream(rep_seed, "data"));
    const SimData data = gen_dataset(cfg, data_rng);
    samplers::ResamplePlan plan = cfg.sampler;
    plan.seed = rng::substream(rep_seed, "sampler");
    engine::BuildOptions options;
    options.threads = threads;
    const StatTensor tensor = engine::build_tensor(data.dataset, plan, cfg.statistic, options);
    std::vector<Score> out;
    out.reserve(cfg.methods.size());
    for (engine::Method method : cfg.methods) {
        engine::ProcedureConfig pc = cfg.procedure;
        pc.method = method;
        out.push_back(score(engine::run_procedure(tensor, pc).cutoff.rejected, data.truth));
    }
    return out;
}

struct ExperimentSummary {
    engine::Method method = engine::Method::mf2d_fdr;
    double empirical_fdr = 0.0, fdr_se = 0.0;
    double empirical_power = 0.0, power_se = 0.0;
    double empirical_fwer = 0.0, fwer_se = 0.0;
    int reps_completed = 0;
    std::vector<Score> per_rep;
};

struct ExperimentResult {
    std::vector<ExperimentSummary> summaries;  // one per method, in config order
    std::vector<std::string> failures;         // "rep <k>: <message>"
};

namespace detail {

// Mean and standard error (sample s.d. / sqrt(k)).
inline std::pair<double, double> mean_se(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    const auto k = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= k;
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (k - 1.0)) / std::sqrt(k)};
}

}  // namespace detail

inline ExperimentSummary summarize(engine::Method method, std::vector<Score> per_rep) {
    ExperimentSummary s;
    s.method = method;
    std::vector<double> fdp, power, any_false;
    for (const auto& r : per_rep) {
        fdp.push_back(r.fdp);
        power.push_back(r.power);
        any_false.push_back(r.false_rejections > 0 ? 1.0 : 0.0);
    }
    std::tie(s.empirical_fdr, s.fdr_se) = detail::mean_se(fdp);
    std::tie(s.empirical_power, s.power_se) = detail::mean_se(power);
    std::tie(s.empirical_fwer, s.fwer_se) = detail::mean_se(any_false);
    s.reps_completed = static_cast<int>(per_rep.size());
    s.per_rep = std::move(per_rep);
    return s;
}

// Replication k uses seed substream(cfg.seed, k). Replications run
// concurrently; the fold over them follows rep order.
inline ExperimentResult run_experiment(const SimConfig& cfg) {
    cfg.validate();
    const auto kinds = dgp_kinds(cfg.dgp);
    stats::check_compatibility(cfg.statistic, cfg.sampler.strategy, kinds.x, kinds.y, {kinds.z}, 1);

    const auto reps = static_cast<std::size_t>(cfg.reps);
    std::vector<std::optional<std::vector<Score>>> results(reps);
    std::vector<std::string> errors(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t k) {
        try {
            results[k] = run_replication(cfg, rng::substream(cfg.seed, static_cast<std::uint64_t>(k)), 1);
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    });

    ExperimentResult out;
    for (std::size_t k = 0; k < reps; ++k)
        if (!results[k]) out.failures.push_back("rep " + std::to_string(k) + ": " + errors[k]);
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        std::vector<Score> per_rep;
        for (std::size_t k = 0; k < reps; ++k)
            if (results[k]) per_rep.push_back((*results[k])[mi]);
        out.summaries.push_back(summarize(cfg.methods[mi], std::move(per_rep)));
    }
    return out;
}

}  // namespace mf2dfdr::sim
