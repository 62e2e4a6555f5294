#pragma once

#include "mf2dfdr/core.hpp"
#include "mf2dfdr/glm.hpp"
#include "mf2dfdr/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

// =============================================================================
// Conditional samplers for X | Z: fit a model once, then draw synthetic
// covariate matrices with Y and Z held fixed.
// =============================================================================

namespace mf2dfdr::samplers {

enum class ModelKind { residual_linear, parametric_logistic, binned_residual };

struct ConditionalModel {
    ModelKind kind = ModelKind::residual_linear;
    Matrix x;              // observed covariate, n x p
    Matrix fitted_mean;    // n x p
    Matrix residuals;      // n x p (residual kinds)
    Vector success_prob;   // n (logistic kind)
    std::vector<int> bin_assignment;  // n (binned kind)
    int bin_count = 1;
    int spline_df = 0;     // 0: z entered linearly

    Index n() const { return x.rows(); }
};

enum class Strategy { permute, bootstrap, parametric, binned_permute };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::permute: return "residual-perm";
        case Strategy::bootstrap: return "residual-boot";
        case Strategy::parametric: return "parametric-logistic";
        case Strategy::binned_permute: return "binned-perm";
    }
    return "?";
}

inline Strategy strategy_from_string(const std::string& s) {
    if (s == "residual-perm") return Strategy::permute;
    if (s == "residual-boot") return Strategy::bootstrap;
    if (s == "parametric-logistic") return Strategy::parametric;
    if (s == "binned-perm") return Strategy::binned_permute;
    throw ValidationError("unknown sampler '" + s + "'");
}

struct ResamplePlan {
    Strategy strategy = Strategy::permute;
    Index b_count = 100;
    std::uint64_t seed = 1;
    // Remark-1 style basis transform of z for the residual model (0 = linear).
    int spline_df = 0;
    // Binned residual permutation: z column and sorted edges.
    Index bin_column = 0;
    std::vector<double> bin_edges;
};

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

inline ConditionalModel fit_residual_linear(const Matrix& x, const Matrix& z, int spline_df = 0) {
    if (z.cols() > 0 && z.rows() != x.rows()) throw ValidationError("x and z differ in row count");
    const Matrix design = glm::confounder_design(z, spline_df, x.rows());
    if (x.rows() <= design.cols())
        throw ValidationError("residual model needs n > " + std::to_string(design.cols()) + " rows");
    glm::LeastSquares ls(design);
    ConditionalModel m;
    m.kind = ModelKind::residual_linear;
    m.x = x;
    m.spline_df = spline_df;
    m.fitted_mean.resize(x.rows(), x.cols());
    for (Index c = 0; c < x.cols(); ++c) m.fitted_mean.col(c) = design * ls.coef(x.col(c));
    m.residuals = x - m.fitted_mean;
    return m;
}

inline ConditionalModel fit_parametric_logistic(const Vector& x, const Matrix& z) {
    for (Index i = 0; i < x.size(); ++i)
        if (x(i) != 0.0 && x(i) != 1.0) throw ValidationError("parametric-logistic sampler needs a binary covariate");
    const Matrix design = glm::confounder_design(z, 0, x.size());
    const glm::GlmFit fit = glm::irls(design, x, glm::Family::binomial());
    if (fit.reason == "separation")
        throw NumericalError(
            "logistic model of x on z is separated; choose a residual sampler or reduce the confounder set");
    ConditionalModel m;
    m.kind = ModelKind::parametric_logistic;
    m.x = x;
    m.fitted_mean.resize(x.size(), 1);
    m.success_prob.resize(x.size());
    const Vector eta = design * fit.coef;
    for (Index i = 0; i < x.size(); ++i) {
        const double p = glm::detail::inv_logit(eta(i));
        m.success_prob(i) = std::clamp(p, 1e-8, 1.0 - 1e-8);
        m.fitted_mean(i, 0) = m.success_prob(i);
    }
    return m;
}

// Bin k holds rows with edges[k-1] < value <= edges[k].
inline int bin_of(double value, const std::vector<double>& edges) {
    return static_cast<int>(std::lower_bound(edges.begin(), edges.end(), value) - edges.begin());
}

inline ConditionalModel fit_binned_residual(const Matrix& x, const Matrix& z, Index bin_column,
                                            const std::vector<double>& bin_edges) {
    if (bin_column < 0 || bin_column >= z.cols()) throw ValidationError("bin column out of range");
    if (!std::is_sorted(bin_edges.begin(), bin_edges.end()) ||
        std::adjacent_find(bin_edges.begin(), bin_edges.end()) != bin_edges.end())
        throw ValidationError("bin edges must be strictly increasing");
    const Index n = x.rows();
    ConditionalModel m;
    m.kind = ModelKind::binned_residual;
    m.x = x;
    m.bin_count = static_cast<int>(bin_edges.size()) + 1;
    m.bin_assignment.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) m.bin_assignment[static_cast<std::size_t>(i)] = bin_of(z(i, bin_column), bin_edges);

    m.fitted_mean.resize(n, x.cols());
    for (int bin = 0; bin < m.bin_count; ++bin) {
        std::vector<Index> rows;
        for (Index i = 0; i < n; ++i)
            if (m.bin_assignment[static_cast<std::size_t>(i)] == bin) rows.push_back(i);
        if (static_cast<Index>(rows.size()) <= z.cols() + 1) {
            std::ostringstream os;
            os << "bin " << bin << " holds " << rows.size() << " rows; need more than " << z.cols() + 1;
            throw ValidationError(os.str());
        }
        Matrix zb(static_cast<Index>(rows.size()), z.cols());
        Matrix xb(static_cast<Index>(rows.size()), x.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            zb.row(static_cast<Index>(r)) = z.row(rows[r]);
            xb.row(static_cast<Index>(r)) = x.row(rows[r]);
        }
        const Matrix design = glm::confounder_design(zb, 0, zb.rows());
        glm::LeastSquares ls(design);
        for (Index c = 0; c < x.cols(); ++c) {
            const Vector f = design * ls.coef(xb.col(c));
            for (std::size_t r = 0; r < rows.size(); ++r) m.fitted_mean(rows[r], c) = f(static_cast<Index>(r));
        }
    }
    m.residuals = x - m.fitted_mean;
    return m;
}

// ---------------------------------------------------------------------------
// Drawing
// ---------------------------------------------------------------------------

namespace detail {

inline void require_kind(const ConditionalModel& m, ModelKind k, const char* what) {
    if (m.kind != k) throw ValidationError(std::string(what) + ": wrong conditional model kind");
}

// fitted_i + residual_{source_i}; a row whose source is itself is copied
// from x so that the identity draw reproduces x bit for bit.
inline Matrix assemble(const ConditionalModel& m, const std::vector<Index>& source) {
    Matrix out(m.x.rows(), m.x.cols());
    for (Index i = 0; i < m.x.rows(); ++i) {
        const Index s = source[static_cast<std::size_t>(i)];
        if (s == i)
            out.row(i) = m.x.row(i);
        else
            out.row(i) = m.fitted_mean.row(i) + m.residuals.row(s);
    }
    return out;
}

}  // namespace detail

inline Matrix apply_residual_permutation(const ConditionalModel& m, const std::vector<Index>& perm) {
    if (static_cast<Index>(perm.size()) != m.n()) throw ValidationError("permutation length mismatch");
    return detail::assemble(m, perm);
}

inline Matrix draw_residual_permutation(const ConditionalModel& m, rng::Engine& rng) {
    detail::require_kind(m, ModelKind::residual_linear, "draw_residual_permutation");
    std::vector<Index> perm(static_cast<std::size_t>(m.n()));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    return detail::assemble(m, perm);
}

inline Matrix draw_residual_bootstrap(const ConditionalModel& m, rng::Engine& rng) {
    detail::require_kind(m, ModelKind::residual_linear, "draw_residual_bootstrap");
    std::uniform_int_distribution<Index> pick(0, m.n() - 1);
    std::vector<Index> source(static_cast<std::size_t>(m.n()));
    for (auto& s : source) s = pick(rng);
    return detail::assemble(m, source);
}

inline Vector draw_parametric_bernoulli(const ConditionalModel& m, rng::Engine& rng) {
    detail::require_kind(m, ModelKind::parametric_logistic, "draw_parametric_bernoulli");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector out(m.n());
    for (Index i = 0; i < m.n(); ++i) out(i) = unif(rng) < m.success_prob(i) ? 1.0 : 0.0;
    return out;
}

inline Matrix draw_binned_permutation(const ConditionalModel& m, rng::Engine& rng) {
    detail::require_kind(m, ModelKind::binned_residual, "draw_binned_permutation");
    std::vector<Index> source(static_cast<std::size_t>(m.n()));
    std::iota(source.begin(), source.end(), Index{0});
    for (int bin = 0; bin < m.bin_count; ++bin) {
        std::vector<Index> rows;
        for (Index i = 0; i < m.n(); ++i)
            if (m.bin_assignment[static_cast<std::size_t>(i)] == bin) rows.push_back(i);
        std::vector<Index> shuffled = rows;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (std::size_t r = 0; r < rows.size(); ++r) source[static_cast<std::size_t>(rows[r])] = shuffled[r];
    }
    return detail::assemble(m, source);
}

// ---------------------------------------------------------------------------
// Plan-level sampler
// ---------------------------------------------------------------------------

// A fitted model plus a strategy. draw(b) is a pure function of
// (plan.seed, b): every draw consumes its own derived substream.
class ConditionalSampler {
public:
    ConditionalSampler(ConditionalModel model, ResamplePlan plan) : model_(std::move(model)), plan_(std::move(plan)) {
        if (plan_.b_count < 1) throw ValidationError("resample plan needs B >= 1");
        const bool ok = (plan_.strategy == Strategy::permute || plan_.strategy == Strategy::bootstrap)
                            ? model_.kind == ModelKind::residual_linear
                        : plan_.strategy == Strategy::parametric ? model_.kind == ModelKind::parametric_logistic
                                                                 : model_.kind == ModelKind::binned_residual;
        if (!ok) throw ValidationError("sampler strategy does not match the fitted model");
    }

    static ConditionalSampler fit(const Matrix& x, const Matrix& z, const ResamplePlan& plan) {
        switch (plan.strategy) {
            case Strategy::permute:
            case Strategy::bootstrap: return {fit_residual_linear(x, z, plan.spline_df), plan};
            case Strategy::parametric:
                if (x.cols() != 1) throw ValidationError("parametric-logistic sampler needs a single covariate column");
                return {fit_parametric_logistic(x.col(0), z), plan};
            case Strategy::binned_permute: return {fit_binned_residual(x, z, plan.bin_column, plan.bin_edges), plan};
        }
        throw ValidationError("unknown sampler strategy");
    }

    Matrix draw(Index b) const {
        rng::Engine eng = rng::make_engine(rng::substream(plan_.seed, static_cast<std::uint64_t>(b)));
        switch (plan_.strategy) {
            case Strategy::permute: return draw_residual_permutation(model_, eng);
            case Strategy::bootstrap: return draw_residual_bootstrap(model_, eng);
            case Strategy::parametric: return draw_parametric_bernoulli(model_, eng);
            case Strategy::binned_permute: return draw_binned_permutation(model_, eng);
        }
        return {};
    }

    const ConditionalModel& model() const { return model_; }
    const ResamplePlan& plan() const { return plan_; }

private:
    ConditionalModel model_;
    ResamplePlan plan_;
};

}  // namespace mf2dfdr::samplers
