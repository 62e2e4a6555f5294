#pragma once

#include "mf2dfdr/core.hpp"
#include "mf2dfdr/parallel.hpp"
#include "mf2dfdr/samplers.hpp"
#include "mf2dfdr/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

// =============================================================================
// Decision layer: tensor construction, F-bar / FDP estimates, Storey pi0,
// 2-D cutoff search, sequential path procedures and the BH baseline.
// =============================================================================

namespace mf2dfdr::engine {

// ---------------------------------------------------------------------------
// Tensor construction
// ---------------------------------------------------------------------------

struct BuildOptions {
    unsigned threads = 0;  // 0: hardware concurrency
    // Upper bound on memory held by prepared draw contexts at once; draws are
    // processed in chunks that fit.
    std::size_t draw_memory_bytes = std::size_t{512} << 20;
};

namespace detail {

inline bool zero_variance(const Matrix& y, Index j) {
    const double first = y(0, j);
    for (Index i = 1; i < y.rows(); ++i)
        if (y(i, j) != first) return false;
    return true;
}

inline std::size_t draw_context_bytes(const stats::StatisticSpec& spec, Index n) {
    const auto nn = static_cast<std::size_t>(n);
    if (spec.kind == stats::StatKind::hsic) return 2 * nn * nn * sizeof(double);
    return 8 * nn * sizeof(double);
}

}  // namespace detail

inline StatTensor build_tensor(const Dataset& ds, const samplers::ResamplePlan& plan,
                               const stats::StatisticSpec& spec, const BuildOptions& options = {}) {
    require_valid(ds);
    stats::check_compatibility(spec, plan.strategy, ds.x_kind, ds.y_kind, ds.z_kind, ds.p());
    if (plan.b_count < 1) throw ValidationError("B must be >= 1");

    const auto sampler = samplers::ConditionalSampler::fit(ds.x, ds.z, plan);
    const Index b_rows = plan.b_count + 1;
    StatTensor tensor({ds.n(), ds.m(), plan.b_count, ds.p(), ds.d()});

    std::vector<Index> active;
    for (Index j = 0; j < ds.m(); ++j) {
        if (detail::zero_variance(ds.y, j))
            tensor.mark_degenerate(j);
        else
            active.push_back(j);
    }
    if (active.empty()) return tensor;

    const auto evaluator = stats::make_evaluator(spec, ds.y, ds.z);
    const std::size_t per_draw = std::max<std::size_t>(1, detail::draw_context_bytes(spec, ds.n()));
    const Index chunk = std::max<Index>(1, static_cast<Index>(options.draw_memory_bytes / per_draw));
    std::vector<int> warning_counts(static_cast<std::size_t>(ds.m()), 0);

    for (Index begin = 0; begin < b_rows; begin += chunk) {
        const Index end = std::min(b_rows, begin + chunk);
        std::vector<std::unique_ptr<stats::DrawContext>> draws(static_cast<std::size_t>(end - begin));
        parallel_for(draws.size(), options.threads, [&](std::size_t k) {
            const Index b = begin + static_cast<Index>(k);
            try {
                draws[k] = evaluator->prepare_draw(b == 0 ? ds.x : sampler.draw(b));
            } catch (const std::exception& e) {
                std::ostringstream os;
                os << "draw b=" << b << " failed: " << e.what();
                throw NumericalError(os.str());
            }
        });
        parallel_for(active.size(), options.threads, [&](std::size_t a) {
            const Index j = active[a];
            depstats::Warnings w;
            Index b = begin;
            try {
                const auto feature = evaluator->prepare_feature(j);
                for (; b < end; ++b)
                    tensor.set(b, j, evaluator->evaluate(*draws[static_cast<std::size_t>(b - begin)], *feature, w));
            } catch (const std::exception& e) {
                std::ostringstream os;
                os << "feature " << j;
                if (static_cast<std::size_t>(j) < ds.feature_names.size())
                    os << " (" << ds.feature_names[static_cast<std::size_t>(j)] << ")";
                os << (b == 0 ? " failed on the observed data" : " failed on draw b=" + std::to_string(b)) << ": "
                   << e.what();
                throw NumericalError(os.str());
            }
            warning_counts[static_cast<std::size_t>(j)] += w.count;
        });
    }
    for (Index j = 0; j < ds.m(); ++j)
        if (warning_counts[static_cast<std::size_t>(j)] > 0) tensor.add_warning(j, warning_counts[static_cast<std::size_t>(j)]);
    return tensor;
}

// ---------------------------------------------------------------------------
// Estimates at a single cutoff pair
// ---------------------------------------------------------------------------

inline double fbar(const StatTensor& t, Index j, double t1, double t2) {
    std::int64_t count = 0;
    for (Index b = 0; b < t.rows(); ++b) {
        const auto s = t.at(b, j);
        if (s.t_m >= t1 && s.t_c >= t2) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(t.rows());
}

// All pairs (every row, every feature) dominating (t1, t2); equals (B+1)·Σ_j F̄_j.
inline std::int64_t dominance_count(const StatTensor& t, double t1, double t2) {
    const auto& tm = t.marginal();
    const auto& tc = t.conditional();
    std::int64_t count = 0;
    for (std::size_t k = 0; k < tm.size(); ++k)
        if (tm[k] >= t1 && tc[k] >= t2) ++count;
    return count;
}

// The one formula shared by every search path so that they agree bit for bit.
inline double fdp_value(std::int64_t dominating, Index b_rows, std::int64_t rejections, double pi0) {
    const double sum_fbar = static_cast<double>(dominating) / static_cast<double>(b_rows);
    return pi0 * sum_fbar / static_cast<double>(std::max<std::int64_t>(1, rejections));
}

inline double fwer_value(std::int64_t dominating, Index b_rows) {
    return static_cast<double>(dominating) / static_cast<double>(b_rows);
}

inline double fdp_tilde(const StatTensor& t, double t1, double t2, std::optional<double> pi0 = std::nullopt) {
    return fdp_value(dominance_count(t, t1, t2), t.rows(), static_cast<std::int64_t>(rejected_at(t, t1, t2).size()),
                     pi0.value_or(1.0));
}

// ---------------------------------------------------------------------------
// Storey null proportion
// ---------------------------------------------------------------------------

struct Pi0Estimate {
    double value = 1.0;
    double lambda = 0.0;
    std::string warning;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

inline double default_pi0_lambda(const StatTensor& t) { return 0.5 * median_of(t.conditional()); }

// min(1, #{observed T^C <= λ} / Σ_j F_j(λ)), F_j(λ) the fraction of all B+1
// values of feature j that are <= λ. The numerator is floored at one so the
// estimate stays positive.
inline Pi0Estimate storey_pi0(const StatTensor& t, double lambda) {
    if (!std::isfinite(lambda) || lambda < 0.0) throw ValidationError("pi0 lambda must be finite and >= 0");
    Pi0Estimate out;
    out.lambda = lambda;
    std::int64_t observed_below = 0, all_below = 0;
    const auto& tc = t.conditional();
    for (Index j = 0; j < t.m(); ++j)
        if (tc[static_cast<std::size_t>(j)] <= lambda) ++observed_below;
    for (double v : tc)
        if (v <= lambda) ++all_below;
    if (all_below == 0) {
        out.warning = "storey_pi0: no statistic at or below lambda; pi0 set to 1";
        return out;
    }
    if (observed_below == 0) out.warning = "storey_pi0: no observed statistic at or below lambda; numerator floored at 1";
    const double denom = static_cast<double>(all_below) / static_cast<double>(t.rows());
    out.value = std::min(1.0, static_cast<double>(std::max<std::int64_t>(1, observed_below)) / denom);
    return out;
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

enum class GridKind { observed_values, quantile };

struct GridSpec {
    GridKind kind = GridKind::quantile;
    int g = 100;

    std::string name() const { return kind == GridKind::observed_values ? "observed" : "quantile:" + std::to_string(g); }
};

inline GridSpec grid_spec_from_string(const std::string& s) {
    if (s == "observed") return {GridKind::observed_values, 0};
    if (s == "quantile") return {GridKind::quantile, 100};
    if (s.rfind("quantile:", 0) == 0) {
        int g = 0;
        try {
            std::size_t used = 0;
            g = std::stoi(s.substr(9), &used);
            if (used != s.size() - 9) g = 0;
        } catch (const std::exception&) {
            g = 0;
        }
        if (g < 1) throw ValidationError("grid quantile count must be a positive integer in '" + s + "'");
        return {GridKind::quantile, g};
    }
    throw ValidationError("unknown grid '" + s + "' (expected quantile:<G> or observed)");
}

struct Grid2D {
    std::vector<double> t1_values;  // ascending, first element 0
    std::vector<double> t2_values;
    GridKind construction = GridKind::quantile;
};

// Order statistic at probability level p: the ceil(p·N)-th smallest value.
inline double order_quantile(const std::vector<double>& sorted, double level) {
    if (sorted.empty()) throw ValidationError("quantile of empty sample");
    const auto n = static_cast<double>(sorted.size());
    auto k = static_cast<std::size_t>(std::ceil(level * n - 1e-9));
    k = std::clamp<std::size_t>(k, 1, sorted.size());
    return sorted[k - 1];
}

namespace detail {

inline std::vector<double> finish_axis(std::vector<double> v) {
    v.push_back(0.0);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline std::vector<double> quantile_axis(std::vector<double> pooled, int g) {
    std::sort(pooled.begin(), pooled.end());
    std::vector<double> axis;
    axis.reserve(static_cast<std::size_t>(g));
    for (int k = 1; k <= g; ++k) axis.push_back(order_quantile(pooled, static_cast<double>(k) / g));
    return finish_axis(std::move(axis));
}

}  // namespace detail

inline Grid2D make_grid(const StatTensor& t, const GridSpec& spec) {
    Grid2D grid;
    grid.construction = spec.kind;
    if (spec.kind == GridKind::quantile) {
        if (spec.g < 1) throw ValidationError("quantile grid needs G >= 1");
        grid.t1_values = detail::quantile_axis(t.marginal(), spec.g);
        grid.t2_values = detail::quantile_axis(t.conditional(), spec.g);
    } else {
        std::vector<double> a, c;
        for (Index j = 0; j < t.m(); ++j) {
            if (t.degenerate(j)) continue;
            a.push_back(t.at(0, j).t_m);
            c.push_back(t.at(0, j).t_c);
        }
        grid.t1_values = detail::finish_axis(std::move(a));
        grid.t2_values = detail::finish_axis(std::move(c));
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Dominance sweep
// ---------------------------------------------------------------------------

struct SurfacePoint {
    std::size_t i1 = 0, i2 = 0;
    std::int64_t dominating = 0;  // pairs over all rows with T^M >= t1, T^C >= t2
    std::int64_t rejections = 0;  // non-degenerate observed pairs likewise
};

// Visits every grid point (t1 index descending, t2 index descending) with its
// dominance counts. Each pair is bucketed by the largest grid index it
// reaches on each axis, then t1 is swept downward while a per-t2-bin count
// is accumulated; suffix sums over the t2 bins give the counts.
// O(N log G + G1·G2) for N = (B+1)·m pairs. i1_max limits the t1 axis.
template <class Visitor>
void sweep_grid(const StatTensor& t, const Grid2D& grid, Visitor&& visit, std::size_t i1_max = SIZE_MAX) {
    const std::size_t g1 = grid.t1_values.size(), g2 = grid.t2_values.size();
    if (g1 == 0 || g2 == 0) throw ValidationError("empty grid axis");
    i1_max = std::min(i1_max, g1 - 1);
    auto bin = [](const std::vector<double>& axis, double v) -> std::ptrdiff_t {
        return std::upper_bound(axis.begin(), axis.end(), v) - axis.begin() - 1;
    };

    // bucket[i1] lists (t2 bin, observed flag) of the pairs whose t1 bin is i1.
    std::vector<std::vector<std::pair<std::int32_t, bool>>> bucket(i1_max + 1);
    const auto& tm = t.marginal();
    const auto& tc = t.conditional();
    const auto m = static_cast<std::size_t>(t.m());
    for (std::size_t k = 0; k < tm.size(); ++k) {
        const std::ptrdiff_t b1 = bin(grid.t1_values, tm[k]);
        const std::ptrdiff_t b2 = bin(grid.t2_values, tc[k]);
        if (b1 < 0 || b2 < 0) continue;
        const bool observed = k < m && !t.degenerate(static_cast<Index>(k));
        bucket[std::min(static_cast<std::size_t>(b1), i1_max)].emplace_back(static_cast<std::int32_t>(b2), observed);
    }

    std::vector<std::int64_t> all_bins(g2, 0), obs_bins(g2, 0);
    for (std::size_t step = 0; step <= i1_max; ++step) {
        const std::size_t i1 = i1_max - step;
        for (const auto& [b2, observed] : bucket[i1]) {
            ++all_bins[static_cast<std::size_t>(b2)];
            if (observed) ++obs_bins[static_cast<std::size_t>(b2)];
        }
        std::int64_t all = 0, obs = 0;
        for (std::size_t s2 = 0; s2 < g2; ++s2) {
            const std::size_t i2 = g2 - 1 - s2;
            all += all_bins[i2];
            obs += obs_bins[i2];
            visit(SurfacePoint{i1, i2, all, obs});
        }
    }
}

// ---------------------------------------------------------------------------
// Cutoff searches
// ---------------------------------------------------------------------------

enum class Constraint { fdp, fwer };

namespace detail {

struct Candidate {
    bool found = false;
    std::int64_t rejections = 0;
    double value = 0.0;
    std::size_t i1 = 0, i2 = 0;

    // max rejections, then min estimate, then min t1, then min t2.
    bool better_than(const Candidate& o) const {
        if (!o.found) return true;
        if (rejections != o.rejections) return rejections > o.rejections;
        if (value != o.value) return value < o.value;
        if (i1 != o.i1) return i1 < o.i1;
        return i2 < o.i2;
    }
};

inline CutoffResult finish(const StatTensor& t, const Grid2D& grid, const Candidate& best, double pi0) {
    CutoffResult r;
    r.pi0 = pi0;
    if (!best.found || best.rejections == 0) return r;
    r.t1 = grid.t1_values[best.i1];
    r.t2 = grid.t2_values[best.i2];
    r.fdp_estimate = best.value;
    r.rejected = rejected_at(t, r.t1, r.t2);
    return r;
}

}  // namespace detail

// Most observed rejections over the grid subject to the estimate <= q. A
// search whose best feasible point rejects nothing returns the sentinel
// (+inf, +inf) with an empty set.
inline CutoffResult grid_search(const StatTensor& t, const Grid2D& grid, double q, Constraint constraint,
                                double pi0 = 1.0, bool one_dim = false) {
    if (!(q >= 0.0) || !std::isfinite(q)) throw ValidationError("q must be finite and >= 0");
    const Index rows = t.rows();
    detail::Candidate best;
    sweep_grid(
        t, grid,
        [&](const SurfacePoint& p) {
            const double v = constraint == Constraint::fdp ? fdp_value(p.dominating, rows, p.rejections, pi0)
                                                           : fwer_value(p.dominating, rows);
            if (!(v <= q)) return;
            const detail::Candidate c{true, p.rejections, v, p.i1, p.i2};
            if (c.better_than(best)) best = c;
        },
        one_dim ? 0 : SIZE_MAX);
    return detail::finish(t, grid, best, constraint == Constraint::fdp ? pi0 : 1.0);
}

inline CutoffResult optimal_cutoff(const StatTensor& t, const Grid2D& grid, double q, double pi0 = 1.0) {
    return grid_search(t, grid, q, Constraint::fdp, pi0, false);
}

inline CutoffResult one_dim_cutoff(const StatTensor& t, const Grid2D& grid, double q, double pi0 = 1.0) {
    if (grid.t1_values.empty() || grid.t1_values.front() != 0.0)
        throw ValidationError("one-dimensional search needs t1 = 0 on the grid");
    return grid_search(t, grid, q, Constraint::fdp, pi0, true);
}

inline CutoffResult fwer_cutoff(const StatTensor& t, const Grid2D& grid, double q) {
    return grid_search(t, grid, q, Constraint::fwer, 1.0, false);
}

// Long-format decision surface: one row per grid point.
struct SurfaceRow {
    double t1 = 0.0, t2 = 0.0, sum_fbar = 0.0, fdp_tilde = 0.0;
    std::int64_t rejections = 0;
};

inline std::vector<SurfaceRow> decision_surface(const StatTensor& t, const Grid2D& grid, double pi0 = 1.0) {
    std::vector<SurfaceRow> rows(grid.t1_values.size() * grid.t2_values.size());
    const std::size_t g2 = grid.t2_values.size();
    sweep_grid(t, grid, [&](const SurfacePoint& p) {
        rows[p.i1 * g2 + p.i2] = {grid.t1_values[p.i1], grid.t2_values[p.i2], fwer_value(p.dominating, t.rows()),
                                  fdp_value(p.dominating, t.rows(), p.rejections, pi0), p.rejections};
    });
    return rows;
}

// ---------------------------------------------------------------------------
// Benjamini-Hochberg
// ---------------------------------------------------------------------------

inline std::vector<Index> bh(const std::vector<double>& pvalues, double q) {
    for (double p : pvalues)
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p-values must lie in [0, 1]");
    const std::size_t m = pvalues.size();
    std::vector<Index> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = static_cast<Index>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return pvalues[static_cast<std::size_t>(a)] < pvalues[static_cast<std::size_t>(b)]; });
    std::size_t k_star = 0;
    for (std::size_t k = 1; k <= m; ++k)
        if (pvalues[static_cast<std::size_t>(order[k - 1])] <= q * static_cast<double>(k) / static_cast<double>(m))
            k_star = k;
    std::vector<Index> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_star));
    std::sort(out.begin(), out.end());
    return out;
}

// (1 + #{b >= 1 : T^C_b >= T^C_0}) / (B+1); degenerate features get 1.
inline std::vector<double> resampling_pvalues(const StatTensor& t) {
    std::vector<double> p(static_cast<std::size_t>(t.m()), 1.0);
    for (Index j = 0; j < t.m(); ++j) {
        if (t.degenerate(j)) continue;
        const double obs = t.at(0, j).t_c;
        std::int64_t count = 1;
        for (Index b = 1; b < t.rows(); ++b)
            if (t.at(b, j).t_c >= obs) ++count;
        p[static_cast<std::size_t>(j)] = static_cast<double>(count) / static_cast<double>(t.rows());
    }
    return p;
}

// ---------------------------------------------------------------------------
// Sequential path procedures
// ---------------------------------------------------------------------------

struct MonotonePath {
    std::vector<std::pair<double, double>> points;

    void validate() const {
        if (points.empty()) throw ValidationError("empty path");
        for (std::size_t s = 0; s < points.size(); ++s) {
            const auto [a, c] = points[s];
            if (!(a >= 0.0) || !(c >= 0.0)) throw ValidationError("path thresholds must be >= 0");
            if (s > 0 && (a < points[s - 1].first || c < points[s - 1].second))
                throw ValidationError("path is not componentwise nondecreasing at s=" + std::to_string(s + 1));
        }
    }
};

// Diagonal path through the s/S quantiles of the pooled T^M and T^C values.
inline MonotonePath default_path(const StatTensor& t, int s_count) {
    if (s_count < 1) throw ValidationError("path length S must be >= 1");
    std::vector<double> a = t.marginal(), c = t.conditional();
    std::sort(a.begin(), a.end());
    std::sort(c.begin(), c.end());
    MonotonePath path;
    path.points.reserve(static_cast<std::size_t>(s_count));
    for (int s = 1; s <= s_count; ++s) {
        const double level = static_cast<double>(s) / s_count;
        path.points.emplace_back(order_quantile(a, level), order_quantile(c, level));
    }
    return path;
}

// Smallest index whose estimate is <= q, rejecting at that point.
inline CutoffResult ordered_grid_procedure(const StatTensor& t, const MonotonePath& path, double q,
                                           std::optional<double> pi0 = std::nullopt) {
    path.validate();
    const double p0 = pi0.value_or(1.0);
    for (const auto& [a, c] : path.points) {
        const auto rejected = rejected_at(t, a, c);
        const double v = fdp_value(dominance_count(t, a, c), t.rows(), static_cast<std::int64_t>(rejected.size()), p0);
        if (v <= q) {
            CutoffResult r;
            r.pi0 = p0;
            if (rejected.empty()) return r;
            r.t1 = a;
            r.t2 = c;
            r.rejected = rejected;
            r.fdp_estimate = v;
            return r;
        }
    }
    CutoffResult r;
    r.pi0 = p0;
    return r;
}

// s* = min{s : (B+1)^{-1} Σ_b V^b(s) / max(1, V^0(s)) <= q}.
inline CutoffResult exchangeable_path(const StatTensor& t, const MonotonePath& path, double q) {
    return ordered_grid_procedure(t, path, q, std::nullopt);
}

// ---------------------------------------------------------------------------
// Procedure dispatch
// ---------------------------------------------------------------------------

enum class Method { mf2d_fdr, mf2d_fwer, mf1d, bh, exchangeable_path, ordered_grid };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::mf2d_fdr: return "mf2d-fdr";
        case Method::mf2d_fwer: return "mf2d-fwer";
        case Method::mf1d: return "mf1d";
        case Method::bh: return "bh";
        case Method::exchangeable_path: return "exchangeable-path";
        case Method::ordered_grid: return "ordered-grid";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    for (Method m : {Method::mf2d_fdr, Method::mf2d_fwer, Method::mf1d, Method::bh, Method::exchangeable_path,
                     Method::ordered_grid})
        if (s == to_string(m)) return m;
    if (s == "mf2d") return Method::mf2d_fdr;
    throw ValidationError("unknown method '" + s + "'");
}

struct ProcedureConfig {
    double q = 0.05;
    Method method = Method::mf2d_fdr;
    bool storey = false;
    std::optional<double> pi0_lambda;  // default λ when storey is on and this is empty
    GridSpec grid;
    int path_length = 100;

    void validate() const {
        if (!(q > 0.0 && q < 1.0)) throw ValidationError("q must lie in (0, 1)");
        if (pi0_lambda && !(std::isfinite(*pi0_lambda) && *pi0_lambda > 0.0))
            throw ValidationError("pi0 lambda must be finite and positive");
        if (grid.kind == GridKind::quantile && grid.g < 1) throw ValidationError("quantile grid needs G >= 1");
        if (path_length < 1) throw ValidationError("path length must be >= 1");
    }
};

struct ProcedureResult {
    CutoffResult cutoff;
    Method method = Method::mf2d_fdr;
    std::optional<Pi0Estimate> pi0;
    std::vector<double> pvalues;  // bh only
};

inline ProcedureResult run_procedure(const StatTensor& t, const ProcedureConfig& cfg) {
    cfg.validate();
    ProcedureResult out;
    out.method = cfg.method;
    double pi0 = 1.0;
    const bool uses_pi0 = cfg.method == Method::mf2d_fdr || cfg.method == Method::mf1d ||
                          cfg.method == Method::ordered_grid;
    if (cfg.storey && uses_pi0) {
        out.pi0 = storey_pi0(t, cfg.pi0_lambda.value_or(default_pi0_lambda(t)));
        pi0 = out.pi0->value;
    }
    switch (cfg.method) {
        case Method::mf2d_fdr: out.cutoff = optimal_cutoff(t, make_grid(t, cfg.grid), cfg.q, pi0); break;
        case Method::mf1d: out.cutoff = one_dim_cutoff(t, make_grid(t, cfg.grid), cfg.q, pi0); break;
        case Method::mf2d_fwer: out.cutoff = fwer_cutoff(t, make_grid(t, cfg.grid), cfg.q); break;
        case Method::bh:
            out.pvalues = resampling_pvalues(t);
            out.cutoff.rejected = bh(out.pvalues, cfg.q);
            break;
        case Method::exchangeable_path:
            out.cutoff = exchangeable_path(t, default_path(t, cfg.path_length), cfg.q);
            break;
        case Method::ordered_grid:
            out.cutoff = ordered_grid_procedure(t, default_path(t, cfg.path_length), cfg.q,
                                                out.pi0 ? std::optional<double>(pi0) : std::nullopt);
            break;
    }
    return out;
}

}  // namespace mf2dfdr::engine
