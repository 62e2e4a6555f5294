#pragma once

#include "mf2dfdr/core.hpp"
#include "mf2dfdr/depstats.hpp"
#include "mf2dfdr/glm.hpp"
#include "mf2dfdr/samplers.hpp"

#include <memory>
#include <string>
#include <vector>

// =============================================================================
// Statistic registry: which (T^M, T^C) pair to compute, compatibility rules
// against column kinds and samplers, and prepared evaluators that factor the
// per-draw and per-feature work out of the (b, j) loop.
// =============================================================================

namespace mf2dfdr::stats {

enum class StatKind { model_based, rv, hsic, categorical, basis_wald };

struct StatisticSpec {
    StatKind kind = StatKind::model_based;
    glm::Family family = glm::Family::gaussian();
    int spline_df = 5;  // conditional RV residualization
    depstats::KernelSpec kernel;
    int j1 = 2, j2 = 3;  // basis-wald

    std::string name() const {
        switch (kind) {
            case StatKind::model_based: return "glm:" + family.name();
            case StatKind::rv: return "rv";
            case StatKind::hsic: return "hsic";
            case StatKind::categorical: return "categorical";
            case StatKind::basis_wald: return "basis-wald:" + std::to_string(j1) + "," + std::to_string(j2);
        }
        return "?";
    }

    void validate() const {
        if (!(kernel.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
        if (!kernel.bandwidth.median_heuristic && !(kernel.bandwidth.value > 0.0))
            throw ValidationError("bandwidth must be positive");
        if (kind == StatKind::rv && spline_df != 0 && spline_df < 3)
            throw ValidationError("spline df must be 0 (linear) or >= 3");
        if (kind == StatKind::basis_wald && (j1 < 1 || j2 < 1)) throw ValidationError("J1 and J2 must be >= 1");
    }
};

// "glm:<family>", "rv", "hsic", "categorical", "basis-wald[:J1,J2]".
inline StatisticSpec statistic_from_string(const std::string& s) {
    StatisticSpec spec;
    if (s.rfind("glm:", 0) == 0) {
        spec.kind = StatKind::model_based;
        spec.family = glm::family_from_string(s.substr(4));
    } else if (s == "glm") {
        spec.kind = StatKind::model_based;
    } else if (s == "rv") {
        spec.kind = StatKind::rv;
    } else if (s == "hsic") {
        spec.kind = StatKind::hsic;
    } else if (s == "categorical") {
        spec.kind = StatKind::categorical;
    } else if (s.rfind("basis-wald", 0) == 0) {
        spec.kind = StatKind::basis_wald;
        if (s.size() > 10) {
            const auto comma = s.find(',');
            if (s[10] != ':' || comma == std::string::npos)
                throw ValidationError("basis-wald expects basis-wald:<J1>,<J2>");
            try {
                spec.j1 = std::stoi(s.substr(11, comma - 11));
                spec.j2 = std::stoi(s.substr(comma + 1));
            } catch (const std::exception&) {
                throw ValidationError("basis-wald expects integer J1,J2 in '" + s + "'");
            }
        }
    } else {
        throw ValidationError("unknown statistic '" + s + "'");
    }
    spec.validate();
    return spec;
}

// Rejects statistic/sampler combinations that do not fit the data's column kinds.
inline void check_compatibility(const StatisticSpec& spec, const samplers::Strategy& sampler, ColumnKind x_kind,
                                ColumnKind y_kind, const std::vector<ColumnKind>& z_kinds, Index p) {
    spec.validate();
    using samplers::Strategy;
    if (sampler == Strategy::parametric && (x_kind != ColumnKind::binary || p != 1))
        throw ValidationError("parametric-logistic sampler needs a single binary covariate");
    if (sampler != Strategy::parametric && x_kind == ColumnKind::binary)
        throw ValidationError(std::string(samplers::to_string(sampler)) +
                              " sampler would make a binary covariate non-binary; use parametric-logistic");
    switch (spec.kind) {
        case StatKind::hsic:
            if (x_kind == ColumnKind::binary)
                throw ValidationError("hsic is not available for a binary covariate (bandwidth is not well defined); "
                                      "use glm or rv");
            break;
        case StatKind::categorical:
            if (x_kind != ColumnKind::binary || y_kind != ColumnKind::binary)
                throw ValidationError("categorical statistics need binary x and binary y");
            for (auto k : z_kinds)
                if (k != ColumnKind::binary) throw ValidationError("categorical statistics need binary confounders");
            break;
        case StatKind::model_based:
            if (spec.family.kind == glm::FamilyKind::binomial && y_kind != ColumnKind::binary)
                throw ValidationError("glm:binomial needs binary features");
            if ((spec.family.kind == glm::FamilyKind::poisson || spec.family.kind == glm::FamilyKind::negbinom) &&
                y_kind == ColumnKind::continuous)
                throw ValidationError("glm:" + spec.family.name() + " needs count features");
            break;
        case StatKind::basis_wald:
            if (x_kind == ColumnKind::binary && spec.j1 > 1)
                throw ValidationError("basis-wald with J1 > 1 needs a continuous covariate");
            break;
        case StatKind::rv: break;
    }
}

// ---------------------------------------------------------------------------
// Prepared evaluators
// ---------------------------------------------------------------------------

struct DrawContext {
    virtual ~DrawContext() = default;
};
struct FeatureContext {
    virtual ~FeatureContext() = default;
};

// Evaluates the pair for feature j on covariate draw b. prepare_draw is
// called once per draw (including b = 0), prepare_feature once per feature.
class PairEvaluator {
public:
    virtual ~PairEvaluator() = default;
    virtual std::unique_ptr<DrawContext> prepare_draw(const Matrix& x) const = 0;
    virtual std::unique_ptr<FeatureContext> prepare_feature(Index j) const = 0;
    virtual StatPair evaluate(const DrawContext& draw, const FeatureContext& feature,
                              depstats::Warnings& warnings) const = 0;
};

namespace detail {

struct VectorFeature final : FeatureContext {
    Vector y;
};

struct MatrixFeature final : FeatureContext {
    Matrix a;
    double norm = 0.0;
};

// Gaussian family: both designs are factored once per draw and every
// feature costs two triangular solves.
class GaussianModelEvaluator final : public PairEvaluator {
public:
    GaussianModelEvaluator(const Matrix& y, const Matrix& z) : y_(y), z_(z) {}

    struct Draw final : DrawContext {
        Matrix full_design, reduced_design;
        std::unique_ptr<glm::LeastSquares> full, reduced;
        Index p = 1;
    };

    std::unique_ptr<DrawContext> prepare_draw(const Matrix& x) const override {
        auto d = std::make_unique<Draw>();
        d->p = x.cols();
        d->full_design = depstats::detail::full_design(x, z_);
        d->reduced_design = depstats::detail::with_intercept(x);
        d->full = std::make_unique<glm::LeastSquares>(d->full_design);
        d->reduced = std::make_unique<glm::LeastSquares>(d->reduced_design);
        return d;
    }

    std::unique_ptr<FeatureContext> prepare_feature(Index j) const override {
        auto f = std::make_unique<VectorFeature>();
        f->y = y_.col(j);
        return f;
    }

    StatPair evaluate(const DrawContext& dc, const FeatureContext& fc, depstats::Warnings&) const override {
        const auto& d = static_cast<const Draw&>(dc);
        const auto& y = static_cast<const VectorFeature&>(fc).y;
        return {wald(*d.reduced, d.reduced_design, y, d.p), wald(*d.full, d.full_design, y, d.p)};
    }

private:
    static double wald(const glm::LeastSquares& ls, const Matrix& design, const Vector& y, Index p) {
        const Vector coef = ls.coef(y);
        const double sigma2 = (y - design * coef).squaredNorm() / static_cast<double>(ls.df_resid());
        return depstats::detail::wald(coef, ls.cov_unscaled() * sigma2, 1, p);
    }

    const Matrix& y_;
    const Matrix& z_;
};

class GlmModelEvaluator final : public PairEvaluator {
public:
    GlmModelEvaluator(const Matrix& y, const Matrix& z, glm::Family family) : y_(y), z_(z), family_(family) {}

    struct Draw final : DrawContext {
        Matrix full_design, reduced_design;
        Index p = 1;
    };

    std::unique_ptr<DrawContext> prepare_draw(const Matrix& x) const override {
        auto d = std::make_unique<Draw>();
        d->p = x.cols();
        d->full_design = depstats::detail::full_design(x, z_);
        d->reduced_design = depstats::detail::with_intercept(x);
        return d;
    }

    std::unique_ptr<FeatureContext> prepare_feature(Index j) const override {
        auto f = std::make_unique<VectorFeature>();
        f->y = y_.col(j);
        return f;
    }

    StatPair evaluate(const DrawContext& dc, const FeatureContext& fc, depstats::Warnings& w) const override {
        const auto& d = static_cast<const Draw&>(dc);
        const auto& y = static_cast<const VectorFeature&>(fc).y;
        return {depstats::detail::fit_wald(d.reduced_design, y, family_, d.p, &w),
                depstats::detail::fit_wald(d.full_design, y, family_, d.p, &w)};
    }

private:
    const Matrix& y_;
    const Matrix& z_;
    glm::Family family_;
};

// RV and conditional RV. Feature residuals do not depend on the draw.
class RvEvaluator final : public PairEvaluator {
public:
    RvEvaluator(const Matrix& y, const Matrix& z, int spline_df)
        : y_(y), residualizer_(z, spline_df, y.rows()) {}

    struct Draw final : DrawContext {
        Matrix x, x_resid;
        double x_norm = 0.0;
    };
    struct Feature final : FeatureContext {
        Matrix y, y_resid;
        double y_norm = 0.0;
    };

    std::unique_ptr<DrawContext> prepare_draw(const Matrix& x) const override {
        auto d = std::make_unique<Draw>();
        d->x = x;
        d->x_resid = residualizer_.apply(x);
        d->x_norm = x.norm();
        return d;
    }

    std::unique_ptr<FeatureContext> prepare_feature(Index j) const override {
        auto f = std::make_unique<Feature>();
        f->y = y_.col(j);
        f->y_resid = residualizer_.apply(f->y);
        f->y_norm = f->y.norm();
        return f;
    }

    StatPair evaluate(const DrawContext& dc, const FeatureContext& fc, depstats::Warnings& w) const override {
        const auto& d = static_cast<const Draw&>(dc);
        const auto& f = static_cast<const Feature&>(fc);
        return {depstats::rv_coefficient(d.x, f.y, &w),
                depstats::rv_of_residuals(d.x_resid, d.x_norm, f.y_resid, f.y_norm, &w)};
    }

private:
    const Matrix& y_;
    depstats::Residualizer residualizer_;
};

class HsicEvaluator final : public PairEvaluator {
public:
    HsicEvaluator(const Matrix& y, const Matrix& z, depstats::KernelSpec spec) : y_(y), z_(z), spec_(spec) {}

    struct Kernels final : DrawContext {
        Matrix marginal, conditional;
    };
    struct FeatureKernels final : FeatureContext {
        Matrix marginal, conditional;
    };

    std::unique_ptr<DrawContext> prepare_draw(const Matrix& x) const override {
        auto d = std::make_unique<Kernels>();
        d->marginal = depstats::centered_kernel(x, spec_.bandwidth);
        d->conditional = depstats::conditional_joint_kernel(x, z_, spec_);
        return d;
    }

    std::unique_ptr<FeatureContext> prepare_feature(Index j) const override {
        auto f = std::make_unique<FeatureKernels>();
        const Matrix y = y_.col(j);
        f->marginal = depstats::centered_kernel(y, spec_.bandwidth);
        f->conditional = depstats::conditional_joint_kernel(y, z_, spec_);
        return f;
    }

    StatPair evaluate(const DrawContext& dc, const FeatureContext& fc, depstats::Warnings&) const override {
        const auto& d = static_cast<const Kernels&>(dc);
        const auto& f = static_cast<const FeatureKernels&>(fc);
        return {std::max(depstats::normalized_trace_product(d.marginal, f.marginal), 0.0),
                std::max(depstats::normalized_trace_product(d.conditional, f.conditional), 0.0)};
    }

private:
    const Matrix& y_;
    const Matrix& z_;
    depstats::KernelSpec spec_;
};

class CategoricalEvaluator final : public PairEvaluator {
public:
    CategoricalEvaluator(const Matrix& y, const Matrix& z) : y_(y), strata_(depstats::strata_from(z, y.rows())) {}

    struct Draw final : DrawContext {
        Vector x;
    };

    std::unique_ptr<DrawContext> prepare_draw(const Matrix& x) const override {
        if (x.cols() != 1) throw ValidationError("categorical statistics need a single covariate column");
        auto d = std::make_unique<Draw>();
        d->x = x.col(0);
        return d;
    }

    std::unique_ptr<FeatureContext> prepare_feature(Index j) const override {
        auto f = std::make_unique<VectorFeature>();
        f->y = y_.col(j);
        return f;
    }

    StatPair evaluate(const DrawContext& dc, const FeatureContext& fc, depstats::Warnings& w) const override {
        const auto& x = static_cast<const Draw&>(dc).x;
        const auto& y = static_cast<const VectorFeature&>(fc).y;
        return {depstats::pearson_chi_square(x, y, &w), depstats::mantel_haenszel(x, y, strata_, &w)};
    }

private:
    const Matrix& y_;
    std::vector<int> strata_;
};

class BasisWaldEvaluator final : public PairEvaluator {
public:
    BasisWaldEvaluator(const Matrix& y, const Matrix& z, int j1, int j2)
        : y_(y), bz_(depstats::confounder_basis(z, j2, y.rows())), j1_(j1) {}

    struct Draw final : DrawContext {
        std::unique_ptr<depstats::BasisWaldDesign> design;
    };

    std::unique_ptr<DrawContext> prepare_draw(const Matrix& x) const override {
        auto d = std::make_unique<Draw>();
        d->design = std::make_unique<depstats::BasisWaldDesign>(depstats::power_basis(x, j1_), bz_);
        return d;
    }

    std::unique_ptr<FeatureContext> prepare_feature(Index j) const override {
        auto f = std::make_unique<VectorFeature>();
        f->y = y_.col(j);
        return f;
    }

    StatPair evaluate(const DrawContext& dc, const FeatureContext& fc, depstats::Warnings& w) const override {
        return static_cast<const Draw&>(dc).design->evaluate(static_cast<const VectorFeature&>(fc).y, &w);
    }

private:
    const Matrix& y_;
    Matrix bz_;
    int j1_;
};

}  // namespace detail

// The evaluator keeps references to y and z; they must outlive it.
inline std::unique_ptr<PairEvaluator> make_evaluator(const StatisticSpec& spec, const Matrix& y, const Matrix& z) {
    spec.validate();
    switch (spec.kind) {
        case StatKind::model_based:
            if (spec.family.kind == glm::FamilyKind::gaussian)
                return std::make_unique<detail::GaussianModelEvaluator>(y, z);
            return std::make_unique<detail::GlmModelEvaluator>(y, z, spec.family);
        case StatKind::rv: return std::make_unique<detail::RvEvaluator>(y, z, spec.spline_df);
        case StatKind::hsic: return std::make_unique<detail::HsicEvaluator>(y, z, spec.kernel);
        case StatKind::categorical: return std::make_unique<detail::CategoricalEvaluator>(y, z);
        case StatKind::basis_wald: return std::make_unique<detail::BasisWaldEvaluator>(y, z, spec.j1, spec.j2);
    }
    throw ValidationError("unknown statistic kind");
}

// One pair straight from the free functions; used as the reference path.
inline StatPair compute_pair(const StatisticSpec& spec, const Vector& y, const Matrix& x, const Matrix& z,
                             depstats::Warnings* w = nullptr) {
    switch (spec.kind) {
        case StatKind::model_based: return depstats::model_stat_pair(y, x, z, spec.family, w);
        case StatKind::rv:
            return {depstats::rv_coefficient(x, y, w), depstats::conditional_rv(x, y, z, spec.spline_df, w)};
        case StatKind::hsic: return {depstats::hsic(x, y, spec.kernel), depstats::chsic(x, y, z, spec.kernel)};
        case StatKind::categorical:
            return {depstats::pearson_chi_square(x.col(0), y, w), depstats::mantel_haenszel(x.col(0), y, z, w)};
        case StatKind::basis_wald: return depstats::basis_wald_pair(y, x, z, spec.j1, spec.j2, w);
    }
    throw ValidationError("unknown statistic kind");
}

}  // namespace mf2dfdr::stats
