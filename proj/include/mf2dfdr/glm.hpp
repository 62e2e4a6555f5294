#pragma once

#include "mf2dfdr/core.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

// =============================================================================
// Regression engines: QR least squares, IRLS for GLM families, natural cubic
// spline bases and orthogonal projection complements.
// =============================================================================

namespace mf2dfdr::glm {

inline constexpr double kRankTolerance = 1e-10;

// Least squares solver for one design and many responses. The design is
// factored once with a column-pivoting QR; rank is detected from the R
// diagonal relative to its largest entry.
class LeastSquares {
public:
    explicit LeastSquares(const Matrix& design) : qr_(design.rows(), design.cols()) {
        if (design.rows() <= design.cols())
            throw NumericalError("singular design: need more rows than columns");
        if (!design.allFinite()) throw ValidationError("design contains non-finite values");
        qr_.setThreshold(kRankTolerance);
        qr_.compute(design);
        if (qr_.rank() < design.cols()) throw NumericalError("singular design");
        const Index k = design.cols();
        Matrix r_inv = qr_.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(
            Matrix::Identity(k, k));
        Matrix unpermuted = r_inv * r_inv.transpose();
        cov_unscaled_ = qr_.colsPermutation() * unpermuted * qr_.colsPermutation().transpose();
    }

    Index rows() const { return qr_.rows(); }
    Index cols() const { return qr_.cols(); }
    Index df_resid() const { return qr_.rows() - qr_.cols(); }

    Vector coef(const Vector& response) const { return qr_.solve(response); }

    // (D'D)^{-1}
    const Matrix& cov_unscaled() const { return cov_unscaled_; }

    const Eigen::ColPivHouseholderQR<Matrix>& qr() const { return qr_; }

private:
    Eigen::ColPivHouseholderQR<Matrix> qr_;
    Matrix cov_unscaled_;
};

struct LinearFit {
    Vector coef;
    Vector residuals;
    double sigma2_hat = 0.0;
    Matrix cov_unscaled;
    Index df_resid = 0;
};

inline LinearFit ols(const Matrix& design, const Vector& response) {
    if (design.rows() != response.size()) throw ValidationError("ols: design and response differ in length");
    LeastSquares ls(design);
    LinearFit fit;
    fit.coef = ls.coef(response);
    fit.residuals = response - design * fit.coef;
    fit.df_resid = ls.df_resid();
    fit.sigma2_hat = fit.residuals.squaredNorm() / static_cast<double>(fit.df_resid);
    fit.cov_unscaled = ls.cov_unscaled();
    return fit;
}

// ---------------------------------------------------------------------------
// Generalized linear models
// ---------------------------------------------------------------------------

enum class FamilyKind { gaussian, binomial, poisson, negbinom };

struct Family {
    FamilyKind kind = FamilyKind::gaussian;
    double size = 0.0;  // negative binomial size, fixed by the caller

    static Family gaussian() { return {FamilyKind::gaussian, 0.0}; }
    static Family binomial() { return {FamilyKind::binomial, 0.0}; }
    static Family poisson() { return {FamilyKind::poisson, 0.0}; }
    static Family negbinom(double size) {
        if (!(size > 0.0) || !std::isfinite(size)) throw ValidationError("negbinom size must be positive");
        return {FamilyKind::negbinom, size};
    }

    std::string name() const {
        switch (kind) {
            case FamilyKind::gaussian: return "gaussian";
            case FamilyKind::binomial: return "binomial";
            case FamilyKind::poisson: return "poisson";
            case FamilyKind::negbinom: {
                std::string s = std::to_string(size);
                s.erase(s.find_last_not_of('0') + 1);
                if (s.back() == '.') s.pop_back();
                return "negbinom(" + s + ")";
            }
        }
        return "?";
    }
};

// "gaussian", "binomial", "poisson", "negbinom" or "negbinom(<size>)".
inline Family family_from_string(const std::string& s) {
    if (s == "gaussian") return Family::gaussian();
    if (s == "binomial" || s == "logit") return Family::binomial();
    if (s == "poisson") return Family::poisson();
    if (s == "negbinom") return Family::negbinom(3.0);
    if (s.rfind("negbinom(", 0) == 0 && s.back() == ')') {
        const std::string inner = s.substr(9, s.size() - 10);
        std::size_t used = 0;
        double size = 0.0;
        try {
            size = std::stod(inner, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != inner.size() || used == 0) throw ValidationError("bad negbinom size in '" + s + "'");
        return Family::negbinom(size);
    }
    throw ValidationError("unknown GLM family '" + s + "'");
}

struct GlmFit {
    Family family;
    Vector coef;
    Vector se;
    Matrix cov;  // dispersion-scaled inverse information
    double dispersion = 1.0;
    bool converged = false;
    int iterations = 0;
    std::string reason;  // empty, "separation" or "max_iter"
};

namespace detail {

inline double inv_logit(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

inline double log1p_exp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

inline constexpr double kMaxEta = 700.0;

struct Working {
    double score = 0.0;   // d loglik / d eta
    double weight = 0.0;  // -d^2 loglik / d eta^2
};

inline Working working(const Family& f, double y, double eta) {
    switch (f.kind) {
        case FamilyKind::gaussian: return {y - eta, 1.0};
        case FamilyKind::binomial: {
            const double p = inv_logit(eta);
            return {y - p, p * (1.0 - p)};
        }
        case FamilyKind::poisson: {
            const double mu = std::exp(std::min(eta, kMaxEta));
            return {y - mu, mu};
        }
        case FamilyKind::negbinom: {
            const double mu = std::exp(std::min(eta, kMaxEta));
            const double r = f.size;
            const double denom = mu + r;
            return {r * (y - mu) / denom, (y + r) * r * mu / (denom * denom)};
        }
    }
    return {};
}

inline void check_domain(const Family& f, const Vector& y) {
    for (Index i = 0; i < y.size(); ++i) {
        const double v = y(i);
        if (!std::isfinite(v)) throw ValidationError("irls: non-finite response");
        if (f.kind == FamilyKind::binomial && v != 0.0 && v != 1.0)
            throw ValidationError("irls: binomial response must be 0/1");
        if ((f.kind == FamilyKind::poisson || f.kind == FamilyKind::negbinom) && (v < 0.0 || v != std::floor(v)))
            throw ValidationError("irls: count response must be a nonnegative integer");
    }
}

inline bool all_probabilities_at_boundary(const Vector& eta) {
    for (Index i = 0; i < eta.size(); ++i) {
        const double p = inv_logit(eta(i));
        if (p > 1e-8 && p < 1.0 - 1e-8) return false;
    }
    return true;
}

}  // namespace detail

inline double log_likelihood(const Matrix& design, const Vector& response, const Family& f, const Vector& coef) {
    const Vector eta = design * coef;
    double ll = 0.0;
    for (Index i = 0; i < eta.size(); ++i) {
        const double y = response(i), e = eta(i);
        switch (f.kind) {
            case FamilyKind::gaussian: ll += -0.5 * (y - e) * (y - e); break;
            case FamilyKind::binomial: ll += y * e - detail::log1p_exp(e); break;
            case FamilyKind::poisson: ll += y * e - std::exp(e) - std::lgamma(y + 1.0); break;
            case FamilyKind::negbinom: {
                const double r = f.size, mu = std::exp(e);
                ll += std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0) + r * std::log(r / (r + mu)) +
                      y * (e - std::log(r + mu));
                break;
            }
        }
    }
    return ll;
}

// Score vector X' (d loglik / d eta) at coef.
inline Vector score(const Matrix& design, const Vector& response, const Family& f, const Vector& coef) {
    const Vector eta = design * coef;
    Vector u(eta.size());
    for (Index i = 0; i < eta.size(); ++i) u(i) = detail::working(f, response(i), eta(i)).score;
    return design.transpose() * u;
}

// Newton iterations on the log-likelihood, written as iteratively reweighted
// least squares with observed-information weights (identical to Fisher
// scoring for canonical links). Standard errors come from the inverse
// observed information; the gaussian family uses the df-adjusted residual
// variance so its standard errors are on the t scale.
inline GlmFit irls(const Matrix& design, const Vector& response, const Family& family, int max_iter = 50,
                   double tol = 1e-8) {
    if (design.rows() != response.size()) throw ValidationError("irls: design and response differ in length");
    detail::check_domain(family, response);
    const Index n = design.rows(), k = design.cols();

    GlmFit fit;
    fit.family = family;

    if (family.kind == FamilyKind::gaussian) {
        LinearFit lf = ols(design, response);
        fit.coef = lf.coef;
        fit.dispersion = lf.sigma2_hat;
        fit.cov = lf.cov_unscaled * lf.sigma2_hat;
        fit.se = fit.cov.diagonal().cwiseSqrt();
        fit.converged = true;
        fit.iterations = 1;
        return fit;
    }
    if (n <= k) throw NumericalError("singular design: need more rows than columns");
    {
        // Rank check up front so a singular design is an error, not a stall.
        Eigen::ColPivHouseholderQR<Matrix> qr(design);
        qr.setThreshold(kRankTolerance);
        if (qr.rank() < k) throw NumericalError("singular design");
    }

    // Starting values from a linear fit to the link-transformed response.
    Vector eta(n);
    for (Index i = 0; i < n; ++i) {
        const double y = response(i);
        if (family.kind == FamilyKind::binomial) {
            const double mu = (y + 0.5) / 2.0;
            eta(i) = std::log(mu / (1.0 - mu));
        } else {
            eta(i) = std::log(y + 0.1);
        }
    }
    Vector beta = LeastSquares(design).coef(eta);

    if (family.kind == FamilyKind::binomial) {
        const double s = response.sum();
        if (s == 0.0 || s == static_cast<double>(n)) {
            fit.coef = beta;
            fit.se = Vector::Zero(k);
            fit.reason = "separation";
            return fit;
        }
    }

    double ll = log_likelihood(design, response, family, beta);
    Vector u(n), w(n);
    Matrix info(k, k);
    for (int it = 1; it <= max_iter; ++it) {
        fit.iterations = it;
        eta = design * beta;
        for (Index i = 0; i < n; ++i) {
            const auto wk = detail::working(family, response(i), eta(i));
            u(i) = wk.score;
            w(i) = wk.weight;
        }
        info.noalias() = design.transpose() * w.asDiagonal() * design;
        const Vector grad = design.transpose() * u;
        Eigen::LDLT<Matrix> ldlt(info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
            ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
            if (family.kind == FamilyKind::binomial && detail::all_probabilities_at_boundary(eta)) {
                fit.coef = beta;
                fit.se = Vector::Zero(k);
                fit.reason = "separation";
                return fit;
            }
            throw NumericalError("singular information matrix");
        }
        Vector step = ldlt.solve(grad);

        // Step halving keeps the log-likelihood monotone.
        Vector candidate = beta + step;
        double ll_new = log_likelihood(design, response, family, candidate);
        for (int h = 0; h < 30 && !(ll_new >= ll - 1e-12 * std::abs(ll)); ++h) {
            step *= 0.5;
            candidate = beta + step;
            ll_new = log_likelihood(design, response, family, candidate);
        }
        beta = candidate;
        ll = ll_new;

        if (family.kind == FamilyKind::binomial && detail::all_probabilities_at_boundary(design * beta)) {
            fit.coef = beta;
            fit.se = Vector::Zero(k);
            fit.reason = "separation";
            return fit;
        }
        if (step.cwiseAbs().maxCoeff() <= tol * (1.0 + beta.cwiseAbs().maxCoeff())) {
            fit.converged = true;
            break;
        }
    }

    // Information at the final estimate.
    eta = design * beta;
    for (Index i = 0; i < n; ++i) w(i) = detail::working(family, response(i), eta(i)).weight;
    info.noalias() = design.transpose() * w.asDiagonal() * design;
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
        throw NumericalError("singular information matrix");
    fit.coef = beta;
    fit.cov = ldlt.solve(Matrix::Identity(k, k));
    fit.se = fit.cov.diagonal().cwiseSqrt();
    if (!fit.converged) fit.reason = "max_iter";
    return fit;
}

// ---------------------------------------------------------------------------
// Natural cubic splines
// ---------------------------------------------------------------------------

namespace detail {

// Type-7 (linear interpolation) sample quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double prob) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::size_t distinct_count(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

// Natural cubic spline space with df knots (two boundary knots at the data
// range, df - 2 interior knots at equally spaced quantiles). The df basis
// functions are the truncated-power natural basis
//   1, u, d_k(u) - d_{K-1}(u)   for k = 1..K-2,
// with u the input rescaled to [0, 1]. The constant function is included,
// so a regression on the basis needs no separate intercept.
class SplineBasis {
public:
    SplineBasis() = default;

    SplineBasis(std::vector<double> knots) : knots_(std::move(knots)) {
        if (knots_.size() < 3) throw ValidationError("natural cubic spline needs df >= 3");
        for (std::size_t i = 1; i < knots_.size(); ++i)
            if (!(knots_[i] > knots_[i - 1])) throw NumericalError("spline knots must be strictly increasing");
        lo_ = knots_.front();
        scale_ = knots_.back() - knots_.front();
        scaled_.reserve(knots_.size());
        for (double k : knots_) scaled_.push_back((k - lo_) / scale_);
    }

    static SplineBasis fit(const Vector& values, int df) {
        if (df < 3) throw ValidationError("natural cubic spline needs df >= 3");
        std::vector<double> v(values.data(), values.data() + values.size());
        if (detail::distinct_count(v) < static_cast<std::size_t>(df))
            throw ValidationError("natural cubic spline with df=" + std::to_string(df) + " needs at least " +
                                  std::to_string(df) + " distinct values");
        std::sort(v.begin(), v.end());
        std::vector<double> knots;
        knots.push_back(v.front());
        for (int k = 1; k <= df - 2; ++k) knots.push_back(detail::quantile_sorted(v, static_cast<double>(k) / (df - 1)));
        knots.push_back(v.back());
        return SplineBasis(std::move(knots));
    }

    int df() const { return static_cast<int>(knots_.size()); }
    const std::vector<double>& knots() const { return knots_; }
    std::pair<double, double> boundary_knots() const { return {knots_.front(), knots_.back()}; }
    std::vector<double> interior_knots() const { return {knots_.begin() + 1, knots_.end() - 1}; }

    void evaluate(double x, double* out) const {
        const double u = (x - lo_) / scale_;
        const std::size_t kk = scaled_.size();
        const double last = scaled_[kk - 1];
        const double prev = scaled_[kk - 2];
        auto cube_plus = [](double a) { return a > 0.0 ? a * a * a : 0.0; };
        auto d = [&](std::size_t k) {
            return (cube_plus(u - scaled_[k]) - cube_plus(u - last)) / (last - scaled_[k]);
        };
        const double d_prev = (cube_plus(u - prev) - cube_plus(u - last)) / (last - prev);
        out[0] = 1.0;
        out[1] = u;
        for (std::size_t k = 0; k + 2 < kk; ++k) out[k + 2] = d(k) - d_prev;
    }

    Matrix evaluate(const Vector& values) const {
        Matrix out(values.size(), df());
        std::vector<double> row(static_cast<std::size_t>(df()));
        for (Index i = 0; i < values.size(); ++i) {
            evaluate(values(i), row.data());
            for (int c = 0; c < df(); ++c) out(i, c) = row[static_cast<std::size_t>(c)];
        }
        return out;
    }

private:
    std::vector<double> knots_, scaled_;
    double lo_ = 0.0, scale_ = 1.0;
};

inline Matrix natural_cubic_basis(const Vector& values, int df) { return SplineBasis::fit(values, df).evaluate(values); }

// Design [1, g(z_1), ..., g(z_d)] for regressing on confounders. Columns with
// at least df distinct values get their non-constant spline terms; columns
// with fewer (binary or coarse) enter linearly; constant columns are dropped
// since the intercept already spans them. df = 0 gives [1, z].
inline Matrix confounder_design(const Matrix& z, int spline_df, Index n_rows = -1) {
    const Index n = z.cols() > 0 ? z.rows() : n_rows;
    if (n < 0) throw ValidationError("confounder_design: row count unknown for empty z");
    std::vector<Matrix> blocks;
    Index cols = 1;
    for (Index c = 0; c < z.cols(); ++c) {
        const Vector col = z.col(c);
        std::vector<double> v(col.data(), col.data() + col.size());
        const std::size_t distinct = detail::distinct_count(v);
        if (distinct < 2) continue;
        if (spline_df >= 3 && distinct >= static_cast<std::size_t>(spline_df)) {
            Matrix basis = natural_cubic_basis(col, spline_df);
            blocks.push_back(basis.rightCols(spline_df - 1));
        } else {
            blocks.push_back(col);
        }
        cols += blocks.back().cols();
    }
    Matrix out(n, cols);
    out.col(0).setOnes();
    Index at = 1;
    for (const auto& b : blocks) {
        out.middleCols(at, b.cols()) = b;
        at += b.cols();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Orthogonal projection complement I - P_basis
// ---------------------------------------------------------------------------

class ProjectionComplement {
public:
    explicit ProjectionComplement(const Matrix& basis) {
        if (basis.cols() == 0) {
            q_ = Matrix(basis.rows(), 0);
            return;
        }
        if (basis.rows() < basis.cols()) throw NumericalError("projection basis is rank deficient");
        Eigen::ColPivHouseholderQR<Matrix> qr(basis);
        qr.setThreshold(kRankTolerance);
        if (qr.rank() < basis.cols()) throw NumericalError("projection basis is rank deficient");
        q_ = qr.householderQ() * Matrix::Identity(basis.rows(), basis.cols());
    }

    Vector apply(const Vector& v) const { return v - q_ * (q_.transpose() * v); }
    Matrix apply(const Matrix& v) const { return v - q_ * (q_.transpose() * v); }

    Index rows() const { return q_.rows(); }
    const Matrix& orthonormal_basis() const { return q_; }

private:
    Matrix q_;
};

inline ProjectionComplement projection_complement(const Matrix& basis) { return ProjectionComplement(basis); }

}  // namespace mf2dfdr::glm
