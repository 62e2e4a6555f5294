#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// =============================================================================
// Shared domain types: the (x, y, z) dataset, statistic pairs, the
// (B+1) x m statistic tensor and cutoff results.
// =============================================================================

namespace mf2dfdr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Bad input or configuration. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Numerical failure (singular design, separation, ...). Exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ColumnKind { continuous, binary, count };

inline const char* to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::continuous: return "continuous";
        case ColumnKind::binary: return "binary";
        case ColumnKind::count: return "count";
    }
    return "?";
}

inline ColumnKind column_kind_from_string(const std::string& s) {
    if (s == "continuous") return ColumnKind::continuous;
    if (s == "binary") return ColumnKind::binary;
    if (s == "count") return ColumnKind::count;
    throw ValidationError("unknown column kind '" + s + "'");
}

struct Dataset {
    Matrix x;  // n x p
    Matrix y;  // n x m
    Matrix z;  // n x d (d may be 0)
    ColumnKind x_kind = ColumnKind::continuous;
    ColumnKind y_kind = ColumnKind::continuous;
    std::vector<ColumnKind> z_kind;  // one per z column; empty means all continuous
    std::vector<std::string> feature_names;

    Index n() const { return y.rows(); }
    Index m() const { return y.cols(); }
    Index p() const { return x.cols(); }
    Index d() const { return z.cols(); }

    ColumnKind z_column_kind(Index k) const {
        return z_kind.empty() ? ColumnKind::continuous : z_kind[static_cast<std::size_t>(k)];
    }
};

struct Violation {
    std::string matrix;  // "x", "y", "z" or "shape"
    Index row = -1;
    Index col = -1;
    std::string rule;

    std::string describe() const {
        std::ostringstream os;
        os << matrix;
        if (row >= 0) os << "(" << row << "," << col << ")";
        os << ": " << rule;
        return os.str();
    }
};

namespace detail {

inline void check_cells(const Matrix& mat, const char* name, ColumnKind kind, Index col_begin,
                        Index col_end, std::vector<Violation>& out) {
    for (Index c = col_begin; c < col_end; ++c) {
        for (Index r = 0; r < mat.rows(); ++r) {
            const double v = mat(r, c);
            if (!std::isfinite(v)) {
                out.push_back({name, r, c, "non-finite value"});
            } else if (kind == ColumnKind::binary && v != 0.0 && v != 1.0) {
                out.push_back({name, r, c, "binary column holds a value outside {0,1}"});
            } else if (kind == ColumnKind::count && (v < 0.0 || v != std::floor(v))) {
                out.push_back({name, r, c, "count column holds a value that is not a nonnegative integer"});
            }
        }
    }
}

}  // namespace detail

inline std::vector<Violation> validate(const Dataset& ds) {
    std::vector<Violation> out;
    const Index n = ds.y.rows();
    if (ds.x.rows() != n || (ds.z.cols() > 0 && ds.z.rows() != n)) {
        out.push_back({"shape", -1, -1, "x, y and z must share the same row count"});
        return out;
    }
    if (n < 3) out.push_back({"shape", -1, -1, "at least 3 rows are required"});
    if (ds.x.cols() < 1) out.push_back({"shape", -1, -1, "x needs at least one column"});
    if (ds.y.cols() < 1) out.push_back({"shape", -1, -1, "y needs at least one column"});
    if (!ds.z_kind.empty() && static_cast<Index>(ds.z_kind.size()) != ds.z.cols())
        out.push_back({"shape", -1, -1, "z_kind length does not match z columns"});
    if (!ds.feature_names.empty() && static_cast<Index>(ds.feature_names.size()) != ds.y.cols())
        out.push_back({"shape", -1, -1, "feature_names length does not match y columns"});
    if (ds.x_kind == ColumnKind::count)
        out.push_back({"shape", -1, -1, "x_kind must be continuous or binary"});

    detail::check_cells(ds.x, "x", ds.x_kind, 0, ds.x.cols(), out);
    detail::check_cells(ds.y, "y", ds.y_kind, 0, ds.y.cols(), out);
    for (Index c = 0; c < ds.z.cols(); ++c) {
        ColumnKind k = ds.z_column_kind(c);
        if (k == ColumnKind::count) {
            out.push_back({"shape", -1, c, "z columns must be continuous or binary"});
            k = ColumnKind::continuous;
        }
        detail::check_cells(ds.z, "z", k, c, c + 1, out);
    }
    return out;
}

inline void require_valid(const Dataset& ds) {
    auto v = validate(ds);
    if (v.empty()) return;
    std::ostringstream os;
    os << "invalid dataset (" << v.size() << " violation" << (v.size() > 1 ? "s" : "") << "): "
       << v.front().describe();
    throw ValidationError(os.str());
}

// Marginal and conditional statistic for one feature; larger is more significant.
struct StatPair {
    double t_m = 0.0;
    double t_c = 0.0;

    friend bool operator==(const StatPair&, const StatPair&) = default;
};

// (B+1) x m statistic pairs. Row b = 0 holds the observed statistics,
// rows 1..B the statistics recomputed on resampled covariates.
class StatTensor {
public:
    struct Header {
        Index n = 0, m = 0, b_count = 0, p = 0, d = 0;
    };

    StatTensor() = default;

    StatTensor(Header header)
        : header_(header),
          tm_(static_cast<std::size_t>((header.b_count + 1) * header.m), 0.0),
          tc_(tm_.size(), 0.0),
          degenerate_(static_cast<std::size_t>(header.m), false),
          warnings_(static_cast<std::size_t>(header.m), 0) {
        if (header.b_count < 1) throw ValidationError("StatTensor requires B >= 1");
        if (header.m < 1) throw ValidationError("StatTensor requires m >= 1");
    }

    // Convenience for tests and synthetic experiments: rows = B+1, cols = m.
    static StatTensor from_arrays(const Matrix& t_m, const Matrix& t_c) {
        if (t_m.rows() != t_c.rows() || t_m.cols() != t_c.cols())
            throw ValidationError("StatTensor arrays differ in shape");
        StatTensor t({0, t_m.cols(), t_m.rows() - 1, 1, 0});
        for (Index b = 0; b < t_m.rows(); ++b)
            for (Index j = 0; j < t_m.cols(); ++j) t.set(b, j, {t_m(b, j), t_c(b, j)});
        return t;
    }

    const Header& header() const { return header_; }
    Index m() const { return header_.m; }
    Index b_count() const { return header_.b_count; }
    Index rows() const { return header_.b_count + 1; }

    StatPair at(Index b, Index j) const {
        const auto k = offset(b, j);
        return {tm_[k], tc_[k]};
    }

    void set(Index b, Index j, StatPair s) {
        if (!(std::isfinite(s.t_m) && std::isfinite(s.t_c) && s.t_m >= 0.0 && s.t_c >= 0.0)) {
            std::ostringstream os;
            os << "statistic pair (" << s.t_m << ", " << s.t_c << ") at b=" << b << ", j=" << j
               << " must be finite and nonnegative";
            throw NumericalError(os.str());
        }
        const auto k = offset(b, j);
        tm_[k] = s.t_m;
        tc_[k] = s.t_c;
    }

    // Row-major (B+1) x m views.
    const std::vector<double>& marginal() const { return tm_; }
    const std::vector<double>& conditional() const { return tc_; }

    bool degenerate(Index j) const { return degenerate_[static_cast<std::size_t>(j)]; }
    void mark_degenerate(Index j) { degenerate_[static_cast<std::size_t>(j)] = true; }
    int warnings(Index j) const { return warnings_[static_cast<std::size_t>(j)]; }
    void add_warning(Index j, int count = 1) { warnings_[static_cast<std::size_t>(j)] += count; }

    friend bool operator==(const StatTensor& a, const StatTensor& b) {
        return a.header_.m == b.header_.m && a.header_.b_count == b.header_.b_count &&
               a.tm_ == b.tm_ && a.tc_ == b.tc_;
    }

private:
    std::size_t offset(Index b, Index j) const {
        if (b < 0 || b > header_.b_count || j < 0 || j >= header_.m) {
            std::ostringstream os;
            os << "tensor index (b=" << b << ", j=" << j << ") out of range";
            throw std::out_of_range(os.str());
        }
        return static_cast<std::size_t>(b * header_.m + j);
    }

    Header header_;
    std::vector<double> tm_, tc_;
    std::vector<bool> degenerate_;
    std::vector<int> warnings_;
};

inline std::vector<StatPair> tensor_slice_feature(const StatTensor& t, Index j) {
    if (j < 0 || j >= t.m()) throw std::out_of_range("feature index " + std::to_string(j) + " out of range");
    std::vector<StatPair> out;
    out.reserve(static_cast<std::size_t>(t.rows()));
    for (Index b = 0; b < t.rows(); ++b) out.push_back(t.at(b, j));
    return out;
}

inline constexpr double kInfiniteCutoff = std::numeric_limits<double>::infinity();

struct CutoffResult {
    double t1 = kInfiniteCutoff;
    double t2 = kInfiniteCutoff;
    std::vector<Index> rejected;
    double fdp_estimate = 0.0;
    double pi0 = 1.0;

    std::size_t rejections() const { return rejected.size(); }
};

struct TruthMask {
    std::vector<bool> is_null;

    Index m() const { return static_cast<Index>(is_null.size()); }
    Index null_count() const {
        Index c = 0;
        for (bool b : is_null) c += b ? 1 : 0;
        return c;
    }
};

// Observed rejections at (t1, t2): row 0 pairs dominating the cutoff.
// Degenerate (zero-variance) features are never rejected.
inline std::vector<Index> rejected_at(const StatTensor& t, double t1, double t2) {
    std::vector<Index> out;
    for (Index j = 0; j < t.m(); ++j) {
        if (t.degenerate(j)) continue;
        const auto s = t.at(0, j);
        if (s.t_m >= t1 && s.t_c >= t2) out.push_back(j);
    }
    return out;
}

}  // namespace mf2dfdr
