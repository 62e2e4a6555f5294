#pragma once

#include "mf2dfdr/core.hpp"
#include "mf2dfdr/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

// =============================================================================
// Delimited text I/O, dataset loading with kind inference, atomic writes
// and count-matrix preprocessing (prevalence filter, rarefaction, CLR).
// =============================================================================

namespace mf2dfdr::io {

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

struct Table {
    std::vector<std::string> columns;    // header, excluding a row-label column
    std::vector<std::string> row_names;  // empty unless the first column holds labels
    Matrix values;
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, delim)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* first = s.data();
    if (*first == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        // from_chars rejects "inf"/"nan" spellings that strtod accepts; those
        // are non-finite anyway and reported by validation as such.
        if (s == "NA" || s == "nan" || s == "NaN") return std::nan("");
        return std::nullopt;
    }
    return v;
}

inline char detect_delimiter(const std::string& path, const std::string& header) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".tsv" || ext == ".tab") return '\t';
    if (ext == ".csv") return ',';
    return header.find('\t') != std::string::npos ? '\t' : ',';
}

// Reads a delimited file with a header row. When the first data cell is not
// numeric, the first column is taken as row labels.
inline Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(path + ": cannot open file");
    std::string header;
    while (std::getline(in, header) && trim(header).empty()) {
    }
    if (trim(header).empty()) throw ValidationError(path + ": empty file");
    const char delim = detect_delimiter(path, header);
    Table t;
    auto head = split(header, delim);

    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 1;
    std::optional<bool> labelled;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split(line, delim);
        if (!labelled) {
            labelled = !cells.empty() && !parse_number(cells[0]).has_value();
            if (*labelled) {
                if (head.empty()) throw ValidationError(path + ": header has no columns");
                head.erase(head.begin());
            }
        }
        if (*labelled) {
            t.row_names.push_back(cells.empty() ? "" : cells[0]);
            if (!cells.empty()) cells.erase(cells.begin());
        }
        if (cells.size() != head.size()) {
            std::ostringstream os;
            os << path << ":" << line_no << ": expected " << head.size() << " cells, found " << cells.size();
            throw ValidationError(os.str());
        }
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto v = parse_number(cells[c]);
            if (!v) {
                std::ostringstream os;
                os << path << ":" << line_no << ": non-numeric cell '" << cells[c] << "' at row " << rows.size() + 1
                   << ", column " << c + 1 << " (" << head[c] << ")";
                throw ValidationError(os.str());
            }
            row[c] = *v;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(path + ": empty data (header only)");
    if (head.empty()) throw ValidationError(path + ": no data columns");
    t.columns = std::move(head);
    t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.columns.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            t.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    return t;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Writes to a temporary sibling and renames it over the target.
inline void write_atomic(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    if (target.has_parent_path() && !std::filesystem::exists(target.parent_path()))
        throw std::runtime_error(path + ": directory does not exist");
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(tmp + ": cannot open for writing");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error(tmp + ": write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error(path + ": rename failed: " + ec.message());
    }
}

inline std::string format_table(const Matrix& values, const std::vector<std::string>& columns,
                                const std::vector<std::string>& row_names = {}, char delim = '\t') {
    std::ostringstream os;
    if (!row_names.empty()) os << "id" << delim;
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? std::string(1, delim) : "") << columns[c];
    os << '\n';
    for (Index r = 0; r < values.rows(); ++r) {
        if (!row_names.empty()) os << row_names[static_cast<std::size_t>(r)] << delim;
        for (Index c = 0; c < values.cols(); ++c) os << (c ? std::string(1, delim) : "") << format_double(values(r, c));
        os << '\n';
    }
    return os.str();
}

inline void write_matrix(const std::string& path, const Matrix& values, const std::vector<std::string>& columns,
                         const std::vector<std::string>& row_names = {}) {
    if (static_cast<Index>(columns.size()) != values.cols()) throw ValidationError("column names do not match matrix");
    const char delim = std::filesystem::path(path).extension() == ".csv" ? ',' : '\t';
    write_atomic(path, format_table(values, columns, row_names, delim));
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

// binary if every value is 0 or 1, count if every value is a nonnegative
// integer, continuous otherwise.
inline ColumnKind infer_kind(const Matrix& a) {
    bool binary = true, count = true;
    for (Index c = 0; c < a.cols(); ++c)
        for (Index r = 0; r < a.rows(); ++r) {
            const double v = a(r, c);
            if (v != 0.0 && v != 1.0) binary = false;
            if (!(v >= 0.0) || v != std::floor(v)) count = false;
        }
    return binary ? ColumnKind::binary : count ? ColumnKind::count : ColumnKind::continuous;
}

struct KindOverrides {
    std::optional<ColumnKind> x, y;
};

inline Dataset load_dataset(const std::string& x_path, const std::string& y_path, const std::string& z_path,
                            const KindOverrides& kinds = {}) {
    const Table xt = read_table(x_path);
    const Table yt = read_table(y_path);
    Dataset ds;
    ds.x = xt.values;
    ds.y = yt.values;
    ds.feature_names = yt.columns;
    if (xt.values.rows() != yt.values.rows()) {
        std::ostringstream os;
        os << "row-count mismatch: " << x_path << " has " << xt.values.rows() << " rows, " << y_path << " has "
           << yt.values.rows();
        throw ValidationError(os.str());
    }
    if (!z_path.empty()) {
        const Table zt = read_table(z_path);
        if (zt.values.rows() != yt.values.rows()) {
            std::ostringstream os;
            os << "row-count mismatch: " << z_path << " has " << zt.values.rows() << " rows, " << y_path << " has "
               << yt.values.rows();
            throw ValidationError(os.str());
        }
        ds.z = zt.values;
        for (Index c = 0; c < ds.z.cols(); ++c)
            ds.z_kind.push_back(infer_kind(ds.z.col(c)) == ColumnKind::binary ? ColumnKind::binary
                                                                              : ColumnKind::continuous);
    } else {
        ds.z.resize(ds.y.rows(), 0);
    }
    if (kinds.x) {
        ds.x_kind = *kinds.x;
    } else {
        ds.x_kind = infer_kind(ds.x) == ColumnKind::binary ? ColumnKind::binary : ColumnKind::continuous;
    }
    ds.y_kind = kinds.y ? *kinds.y : infer_kind(ds.y);
    require_valid(ds);
    return ds;
}

// ---------------------------------------------------------------------------
// Count preprocessing
// ---------------------------------------------------------------------------

struct PreprocessOptions {
    double prevalence_min = 0.0;  // fraction of rows with a nonzero count
    bool rarefy = false;
    std::uint64_t seed = 1;
    bool clr = false;
    double pseudocount = 0.5;
    bool binarize = false;

    void validate() const {
        if (!(prevalence_min >= 0.0 && prevalence_min <= 1.0)) throw ValidationError("prevalence_min must lie in [0, 1]");
        if (!(pseudocount > 0.0)) throw ValidationError("pseudocount must be positive");
        if (clr && binarize) throw ValidationError("clr and binarize are mutually exclusive");
    }
};

struct Preprocessed {
    Matrix values;
    std::vector<Index> kept;  // original column indices
};

// Subsample each row without replacement down to the smallest row total.
inline Matrix rarefy(const Matrix& counts, std::uint64_t seed) {
    const Index n = counts.rows(), m = counts.cols();
    std::vector<std::int64_t> totals(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        double t = counts.row(i).sum();
        if (!(t > 0.0)) throw ValidationError("rarefaction: row " + std::to_string(i + 1) + " has zero total count");
        totals[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(t);
    }
    const std::int64_t depth = *std::min_element(totals.begin(), totals.end());
    Matrix out = Matrix::Zero(n, m);
    for (Index i = 0; i < n; ++i) {
        std::vector<std::int32_t> items;
        items.reserve(static_cast<std::size_t>(totals[static_cast<std::size_t>(i)]));
        for (Index k = 0; k < m; ++k)
            for (std::int64_t c = 0; c < static_cast<std::int64_t>(counts(i, k)); ++c)
                items.push_back(static_cast<std::int32_t>(k));
        rng::Engine eng = rng::make_engine(rng::substream(seed, static_cast<std::uint64_t>(i)));
        for (std::int64_t d = 0; d < depth; ++d) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(d), items.size() - 1);
            std::swap(items[static_cast<std::size_t>(d)], items[pick(eng)]);
            out(i, items[static_cast<std::size_t>(d)]) += 1.0;
        }
    }
    return out;
}

inline Matrix clr_transform(const Matrix& counts, double pseudocount) {
    Matrix logs = (counts.array() + pseudocount).log().matrix();
    for (Index i = 0; i < logs.rows(); ++i) logs.row(i).array() -= logs.row(i).mean();
    return logs;
}

inline Preprocessed preprocess_counts(const Matrix& counts, const PreprocessOptions& opt) {
    opt.validate();
    for (Index i = 0; i < counts.rows(); ++i)
        for (Index k = 0; k < counts.cols(); ++k) {
            const double v = counts(i, k);
            if (!(v >= 0.0) || v != std::floor(v)) {
                std::ostringstream os;
                os << "counts must be nonnegative integers; found " << v << " at row " << i + 1 << ", column " << k + 1;
                throw ValidationError(os.str());
            }
        }
    Preprocessed out;
    const auto n = static_cast<double>(counts.rows());
    for (Index k = 0; k < counts.cols(); ++k) {
        const auto present = static_cast<double>((counts.col(k).array() > 0.0).count());
        if (present >= opt.prevalence_min * n * (1.0 - 1e-12)) out.kept.push_back(k);
    }
    if (out.kept.empty()) throw ValidationError("prevalence filter removed every feature");
    Matrix filtered(counts.rows(), static_cast<Index>(out.kept.size()));
    for (std::size_t c = 0; c < out.kept.size(); ++c) filtered.col(static_cast<Index>(c)) = counts.col(out.kept[c]);
    if (opt.rarefy) filtered = rarefy(filtered, opt.seed);
    if (opt.clr) filtered = clr_transform(filtered, opt.pseudocount);
    if (opt.binarize) filtered = (filtered.array() > 0.0).cast<double>().matrix();
    out.values = std::move(filtered);
    return out;
}

}  // namespace mf2dfdr::io
