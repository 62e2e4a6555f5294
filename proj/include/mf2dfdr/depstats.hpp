#pragma once

#include "mf2dfdr/core.hpp"
#include "mf2dfdr/glm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

// =============================================================================
// Marginal and conditional independence statistics. Every statistic is
// oriented so that larger values are stronger evidence of dependence.
// =============================================================================

namespace mf2dfdr::depstats {

// Cap for statistics that diverge on perfect fits.
inline constexpr double kStatisticCap = 1e12;

// Counts soft failures (non-converged fits, zero variance, zero margins)
// that were mapped to a zero statistic.
struct Warnings {
    int count = 0;
    std::string last;

    void add(std::string what) {
        ++count;
        last = std::move(what);
    }
};

// ---------------------------------------------------------------------------
// Model-based Wald statistics
// ---------------------------------------------------------------------------

namespace detail {

// Wald statistic for the coefficient block [first, first + len): |t| for a
// single coefficient, the chi-square form otherwise.
inline double wald(const Vector& coef, const Matrix& cov, Index first, Index len) {
    if (len == 1) {
        const double c = coef(first);
        const double var = cov(first, first);
        if (c == 0.0) return 0.0;
        if (!(var > 0.0)) return kStatisticCap;
        return std::min(std::abs(c) / std::sqrt(var), kStatisticCap);
    }
    const Vector a = coef.segment(first, len);
    const Matrix v = cov.block(first, first, len, len);
    Eigen::LDLT<Matrix> ldlt(v);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
        return a.isZero(0.0) ? 0.0 : kStatisticCap;
    const double w = a.dot(ldlt.solve(a));
    return std::clamp(w, 0.0, kStatisticCap);
}

inline Matrix with_intercept(const Matrix& x) {
    Matrix d(x.rows(), x.cols() + 1);
    d.col(0).setOnes();
    d.rightCols(x.cols()) = x;
    return d;
}

inline Matrix full_design(const Matrix& x, const Matrix& z) {
    const Matrix zd = glm::confounder_design(z, 0, x.rows());  // [1, non-constant z]
    Matrix d(x.rows(), zd.cols() + x.cols());
    d.col(0).setOnes();
    d.middleCols(1, x.cols()) = x;
    d.rightCols(zd.cols() - 1) = zd.rightCols(zd.cols() - 1);
    return d;
}

inline double fit_wald(const Matrix& design, const Vector& y, const glm::Family& family, Index p, Warnings* w) {
    const glm::GlmFit fit = glm::irls(design, y, family);
    if (!fit.converged) {
        if (w) w->add("GLM fit did not converge (" + fit.reason + ")");
        return 0.0;
    }
    return wald(fit.coef, fit.cov, 1, p);
}

}  // namespace detail

// T^C: Wald statistic for the x block in y ~ 1 + x + z; T^M: the same in the
// reduced model y ~ 1 + x.
inline StatPair model_stat_pair(const Vector& y, const Matrix& x, const Matrix& z, const glm::Family& family,
                                Warnings* warnings = nullptr) {
    const Index p = x.cols();
    const double tc = detail::fit_wald(detail::full_design(x, z), y, family, p, warnings);
    const double tm = detail::fit_wald(detail::with_intercept(x), y, family, p, warnings);
    return {tm, tc};
}

// ---------------------------------------------------------------------------
// RV coefficients
// ---------------------------------------------------------------------------

inline Matrix center_columns(const Matrix& a) { return a.rowwise() - a.colwise().mean(); }

inline double rv_coefficient(const Matrix& u, const Matrix& v, Warnings* warnings = nullptr) {
    if (u.rows() != v.rows()) throw ValidationError("rv_coefficient: inputs differ in row count");
    if (u.rows() < 2) throw ValidationError("rv_coefficient: need at least 2 rows");
    const Matrix uc = center_columns(u), vc = center_columns(v);
    const double suu = (uc.transpose() * uc).norm();
    const double svv = (vc.transpose() * vc).norm();
    if (!(suu > 0.0) || !(svv > 0.0)) {
        if (warnings) warnings->add("rv_coefficient: zero-variance input");
        return 0.0;
    }
    const double cross = (uc.transpose() * vc).squaredNorm();
    return std::clamp(cross / (suu * svv), 0.0, 1.0);
}

// Residual maker for regressions on [1, spline(z)].
class Residualizer {
public:
    Residualizer(const Matrix& z, int spline_df, Index n_rows)
        : proj_(glm::confounder_design(z, spline_df, n_rows)) {}

    Matrix apply(const Matrix& a) const { return proj_.apply(a); }
    Vector apply(const Vector& a) const { return proj_.apply(a); }

private:
    glm::ProjectionComplement proj_;
};

// Residual sets whose norm is below this fraction of the input norm are
// treated as having no variance left after removing z.
inline constexpr double kResidualFloor = 1e-10;

inline double rv_of_residuals(const Matrix& ex, double x_norm, const Matrix& ey, double y_norm,
                              Warnings* warnings) {
    if (ex.norm() <= kResidualFloor * std::max(1.0, x_norm) || ey.norm() <= kResidualFloor * std::max(1.0, y_norm)) {
        if (warnings) warnings->add("conditional_rv: residuals vanish after removing z");
        return 0.0;
    }
    return rv_coefficient(ex, ey, warnings);
}

inline double conditional_rv(const Matrix& x, const Vector& y, const Matrix& z, int spline_df,
                             Warnings* warnings = nullptr) {
    const Residualizer res(z, spline_df, x.rows());
    return rv_of_residuals(res.apply(x), x.norm(), Matrix(res.apply(y)), y.norm(), warnings);
}

// ---------------------------------------------------------------------------
// Kernels and HSIC
// ---------------------------------------------------------------------------

struct Bandwidth {
    bool median_heuristic = true;
    double value = 0.0;

    static Bandwidth median() { return {true, 0.0}; }
    static Bandwidth fixed(double v) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("kernel bandwidth must be positive");
        return {false, v};
    }
};

struct KernelSpec {
    Bandwidth bandwidth = Bandwidth::median();
    double epsilon = 0.001;
};

struct KernelMatrix {
    Matrix values;
    bool centered = false;
};

inline Matrix squared_distances(const Matrix& points) {
    const Index n = points.rows();
    Matrix d2(n, n);
    for (Index a = 0; a < n; ++a) {
        d2(a, a) = 0.0;
        for (Index b = a + 1; b < n; ++b) {
            const double v = (points.row(a) - points.row(b)).squaredNorm();
            d2(a, b) = v;
            d2(b, a) = v;
        }
    }
    return d2;
}

inline bool all_rows_identical(const Matrix& points) {
    for (Index a = 1; a < points.rows(); ++a)
        if (points.row(a) != points.row(0)) return false;
    return true;
}

// Median of the n(n-1)/2 pairwise Euclidean distances. When more than half of
// the pairs coincide the median of the positive distances is used instead.
inline double median_heuristic(const Matrix& d2) {
    const Index n = d2.rows();
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index a = 0; a < n; ++a)
        for (Index b = a + 1; b < n; ++b) dist.push_back(std::sqrt(d2(a, b)));
    auto median_of = [](std::vector<double>& v) {
        const std::size_t k = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
        const double hi = v[k];
        if (v.size() % 2 == 1) return hi;
        const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k));
        return 0.5 * (lo + hi);
    };
    if (dist.empty()) throw NumericalError("degenerate bandwidth");
    double med = median_of(dist);
    if (med > 0.0) return med;
    std::vector<double> positive;
    for (double v : dist)
        if (v > 0.0) positive.push_back(v);
    if (positive.empty()) throw NumericalError("degenerate bandwidth");
    return median_of(positive);
}

inline KernelMatrix gaussian_kernel(const Matrix& points, const Bandwidth& bw, double* chosen = nullptr) {
    const Matrix d2 = squared_distances(points);
    const double sigma = bw.median_heuristic ? median_heuristic(d2) : bw.value;
    if (chosen) *chosen = sigma;
    KernelMatrix k;
    k.values = (-d2.array() / (2.0 * sigma * sigma)).exp().matrix();
    return k;
}

// HKH with H = I - 11'/n.
inline KernelMatrix center(const KernelMatrix& k) {
    const Vector row_mean = k.values.rowwise().mean();
    const Vector col_mean = k.values.colwise().mean();
    const double grand = k.values.mean();
    KernelMatrix out;
    out.values = k.values;
    out.values.colwise() -= row_mean;
    out.values.rowwise() -= col_mean.transpose();
    out.values.array() += grand;
    out.values = 0.5 * (out.values + out.values.transpose());
    out.centered = true;
    return out;
}

// Centered Gaussian kernel; inputs whose rows all coincide give the zero matrix.
inline Matrix centered_kernel(const Matrix& points, const Bandwidth& bw) {
    if (all_rows_identical(points)) return Matrix::Zero(points.rows(), points.rows());
    return center(gaussian_kernel(points, bw)).values;
}

// (1/n) Tr(A B) for symmetric A, B.
inline double normalized_trace_product(const Matrix& a, const Matrix& b) {
    return a.cwiseProduct(b).sum() / static_cast<double>(a.rows());
}

inline double hsic(const Matrix& x, const Matrix& y, const KernelSpec& spec = {}) {
    if (x.rows() != y.rows()) throw ValidationError("hsic: inputs differ in row count");
    const double v = normalized_trace_product(centered_kernel(x, spec.bandwidth), centered_kernel(y, spec.bandwidth));
    return std::max(v, 0.0);
}

// Columns divided by their sample standard deviation (constant columns kept).
inline Matrix standardize_scale(const Matrix& a) {
    Matrix out = a;
    if (a.rows() < 2) return out;
    for (Index c = 0; c < a.cols(); ++c) {
        const double mean = a.col(c).mean();
        const double sd = std::sqrt((a.col(c).array() - mean).square().sum() / static_cast<double>(a.rows() - 1));
        if (sd > 0.0) out.col(c) /= sd;
    }
    return out;
}

inline Matrix concat_columns(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a;
    if (b.cols() > 0) out.rightCols(b.cols()) = b;
    return out;
}

// eps^2 (K + eps I)^{-1} K (K + eps I)^{-1} for a centered PSD kernel K.
inline Matrix regularized_conditional_kernel(const Matrix& centered, double epsilon) {
    if (!(epsilon > 0.0)) throw ValidationError("cHSIC epsilon must be positive");
    if (centered.isZero(0.0)) return centered;
    Eigen::SelfAdjointEigenSolver<Matrix> es(centered);
    if (es.info() != Eigen::Success) throw NumericalError("cHSIC: eigen decomposition failed");
    Vector g(es.eigenvalues().size());
    for (Index i = 0; i < g.size(); ++i) {
        const double lambda = std::max(es.eigenvalues()(i), 0.0);
        const double ratio = epsilon / (lambda + epsilon);
        g(i) = ratio * ratio * lambda;
    }
    return es.eigenvectors() * g.asDiagonal() * es.eigenvectors().transpose();
}

inline Matrix conditional_joint_kernel(const Matrix& a, const Matrix& z, const KernelSpec& spec) {
    return regularized_conditional_kernel(centered_kernel(standardize_scale(concat_columns(a, z)), spec.bandwidth),
                                          spec.epsilon);
}

inline double chsic(const Matrix& x, const Matrix& y, const Matrix& z, const KernelSpec& spec = {}) {
    const double v =
        normalized_trace_product(conditional_joint_kernel(x, z, spec), conditional_joint_kernel(y, z, spec));
    return std::max(v, 0.0);
}

// ---------------------------------------------------------------------------
// Categorical statistics
// ---------------------------------------------------------------------------

namespace detail {

inline void require_binary(const Vector& v, const char* what) {
    for (Index i = 0; i < v.size(); ++i)
        if (v(i) != 0.0 && v(i) != 1.0) throw ValidationError(std::string(what) + " must be binary");
}

}  // namespace detail

// Classical 2x2 Pearson chi-square without continuity correction.
inline double pearson_chi_square(const Vector& x, const Vector& y, Warnings* warnings = nullptr) {
    if (x.size() != y.size()) throw ValidationError("pearson_chi_square: length mismatch");
    detail::require_binary(x, "x");
    detail::require_binary(y, "y");
    double a = 0, b = 0, c = 0, d = 0;
    for (Index i = 0; i < x.size(); ++i) {
        if (x(i) == 1.0)
            (y(i) == 1.0 ? a : b) += 1.0;
        else
            (y(i) == 1.0 ? c : d) += 1.0;
    }
    const double n = a + b + c + d;
    const double margins = (a + b) * (c + d) * (a + c) * (b + d);
    if (margins == 0.0) {
        if (warnings) warnings->add("pearson_chi_square: zero margin");
        return 0.0;
    }
    const double det = a * d - b * c;
    return n * det * det / margins;
}

// Stratum label per row from the distinct rows of z (one stratum when d = 0).
inline std::vector<int> strata_from(const Matrix& z, Index n) {
    std::vector<int> out(static_cast<std::size_t>(n), 0);
    if (z.cols() == 0) return out;
    std::map<std::vector<double>, int> ids;
    for (Index i = 0; i < n; ++i) {
        std::vector<double> key;
        key.reserve(static_cast<std::size_t>(z.cols()));
        for (Index c = 0; c < z.cols(); ++c) key.push_back(z(i, c));
        auto it = ids.emplace(std::move(key), static_cast<int>(ids.size())).first;
        out[static_cast<std::size_t>(i)] = it->second;
    }
    return out;
}

// Mantel-Haenszel chi-square (no continuity correction). Strata with zero
// hypergeometric variance (size 1 or a degenerate margin) contribute nothing.
inline double mantel_haenszel(const Vector& x, const Vector& y, const std::vector<int>& strata,
                              Warnings* warnings = nullptr) {
    if (x.size() != y.size() || static_cast<Index>(strata.size()) != x.size())
        throw ValidationError("mantel_haenszel: length mismatch");
    detail::require_binary(x, "x");
    detail::require_binary(y, "y");
    const int k = strata.empty() ? 0 : *std::max_element(strata.begin(), strata.end()) + 1;
    std::vector<double> a(static_cast<std::size_t>(k), 0.0), n1(a), m1(a), nk(a);
    for (Index i = 0; i < x.size(); ++i) {
        const auto s = static_cast<std::size_t>(strata[static_cast<std::size_t>(i)]);
        nk[s] += 1.0;
        n1[s] += x(i);
        m1[s] += y(i);
        a[s] += x(i) * y(i);
    }
    double dev = 0.0, var = 0.0;
    for (std::size_t s = 0; s < static_cast<std::size_t>(k); ++s) {
        const double N = nk[s];
        if (N < 2.0) continue;
        const double v = n1[s] * (N - n1[s]) * m1[s] * (N - m1[s]) / (N * N * (N - 1.0));
        if (!(v > 0.0)) continue;
        dev += a[s] - n1[s] * m1[s] / N;
        var += v;
    }
    if (!(var > 0.0)) {
        if (warnings) warnings->add("mantel_haenszel: all strata degenerate");
        return 0.0;
    }
    return dev * dev / var;
}

inline double mantel_haenszel(const Vector& x, const Vector& y, const Matrix& z, Warnings* warnings = nullptr) {
    return mantel_haenszel(x, y, strata_from(z, x.size()), warnings);
}

// ---------------------------------------------------------------------------
// Basis-expansion Wald statistics
// ---------------------------------------------------------------------------

// Polynomial basis [a, a^2, ..., a^J] for every column of a.
inline Matrix power_basis(const Matrix& a, int degree) {
    if (degree < 1) throw ValidationError("basis degree must be >= 1");
    Matrix out(a.rows(), a.cols() * degree);
    for (Index c = 0; c < a.cols(); ++c)
        for (int e = 1; e <= degree; ++e) out.col(c * degree + e - 1) = a.col(c).array().pow(e).matrix();
    return out;
}

// [1, z, ..., z^(J-1)] for every non-constant column of z; J = 1 is the intercept alone.
inline Matrix confounder_basis(const Matrix& z, int j2, Index n) {
    if (j2 < 1) throw ValidationError("J2 must be >= 1");
    const Matrix zd = glm::confounder_design(z, 0, n);
    if (j2 == 1 || zd.cols() == 1) return Matrix::Ones(n, 1);
    return concat_columns(Matrix::Ones(n, 1), power_basis(zd.rightCols(zd.cols() - 1), j2 - 1));
}

// (G)^{-1/2} for a symmetric positive definite Gram matrix.
inline Matrix inverse_sqrt(const Matrix& gram) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success) throw NumericalError("singular Gram matrix");
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(es.eigenvalues().minCoeff() > glm::kRankTolerance * top)) throw NumericalError("singular Gram matrix");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

// Per-covariate pieces of the basis-Wald statistics, reused across features.
//   T^M = ||(Bx'Bx)^{-1/2} Bx' y||^2 / s^2
//   T^C = ||(Bx'P Bx)^{-1/2} Bx' P y||^2 / s^2,   P = I - proj(Bz)
// with s^2 the residual variance of y on [Bx, Bz].
class BasisWaldDesign {
public:
    BasisWaldDesign(const Matrix& bx, const Matrix& bz) : design_(concat_columns(bx, bz)), full_(design_) {
        marginal_ = inverse_sqrt(bx.transpose() * bx) * bx.transpose();
        const glm::ProjectionComplement perp(bz);
        const Matrix pbx = perp.apply(bx);
        // Bx' P y = (P Bx)' y since P is symmetric and idempotent.
        conditional_ = inverse_sqrt(bx.transpose() * pbx) * pbx.transpose();
    }

    StatPair evaluate(const Vector& y, Warnings* warnings = nullptr) const {
        const Vector resid = y - design_ * full_.coef(y);
        const double sigma2 = resid.squaredNorm() / static_cast<double>(full_.df_resid());
        const double tm_raw = (marginal_ * y).squaredNorm();
        const double tc_raw = (conditional_ * y).squaredNorm();
        if (!(sigma2 > 0.0)) {
            if (warnings) warnings->add("basis_wald: zero residual variance");
            return {tm_raw > 0.0 ? kStatisticCap : 0.0, tc_raw > 0.0 ? kStatisticCap : 0.0};
        }
        return {std::min(tm_raw / sigma2, kStatisticCap), std::min(tc_raw / sigma2, kStatisticCap)};
    }

private:
    Matrix design_;
    glm::LeastSquares full_;
    Matrix marginal_, conditional_;
};

inline StatPair basis_wald_pair(const Vector& y, const Matrix& x, const Matrix& z, int j1, int j2,
                                Warnings* warnings = nullptr) {
    return BasisWaldDesign(power_basis(x, j1), confounder_basis(z, j2, x.rows())).evaluate(y, warnings);
}

}  // namespace mf2dfdr::depstats
