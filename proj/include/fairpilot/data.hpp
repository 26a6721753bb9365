#ifndef FAIRPILOT_DATA_HPP
#define FAIRPILOT_DATA_HPP

#include "fairpilot/error.hpp"
#include "fairpilot/rng.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fairpilot {

enum class ColumnType { numeric, categorical };

inline const char* to_string(ColumnType t) { return t == ColumnType::numeric ? "numeric" : "categorical"; }

/// One CSV column. `text` keeps the raw cell strings; `values` holds the
/// parsed numbers for numeric columns (NaN where missing).
struct Column {
    std::string name;
    ColumnType type = ColumnType::categorical;
    std::vector<std::string> text;
    std::vector<double> values;
    std::vector<std::uint8_t> missing;
};

struct Provenance {
    std::string source;
    std::vector<std::string> steps;
};

/// Raw or preprocessed table prior to task encoding.
struct Table {
    std::vector<Column> columns;
    std::size_t n_rows = 0;
    Provenance provenance;

    const Column* find(std::string_view name) const {
        for (const auto& c : columns) {
            if (c.name == name) {
                return &c;
            }
        }
        return nullptr;
    }
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix select_rows(std::span<const std::size_t> idx) const {
        Matrix out(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols_), cols_,
                        out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
        }
        return out;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Encoded binary task: numeric features, target Y and sensitive group S.
struct Dataset {
    std::vector<std::string> feature_names;
    Matrix features;
    std::vector<std::uint8_t> target;
    std::vector<std::uint8_t> sensitive;
    Provenance provenance;

    std::size_t n_rows() const noexcept { return target.size(); }
};

enum class Impute { none, mean, median };
enum class Standardize { none, zscore };

struct PreprocessConfig {
    std::vector<std::string> missing_codes;
    double row_missing_threshold = 0.75;
    Impute impute = Impute::none;
    Standardize standardize = Standardize::none;
    // Columns left untouched by imputation and scaling (the target and
    // sensitive columns); rows missing any of them are dropped.
    std::vector<std::string> passthrough_columns;
};

struct TaskEncoding {
    std::string target;
    std::vector<std::string> positive_values;
    std::string sensitive;
    std::vector<std::string> group0_values;
    // Optional: when non-empty, positive/negative (resp. group0/group1)
    // must partition the observed values.
    std::vector<std::string> negative_values;
    std::vector<std::string> group1_values;
};

struct SplitPlan {
    std::size_t n_splits = 10;
    double test_fraction = 0.3;
    bool stratified = true;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    bool operator==(const Split&) const = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) {
        return std::nullopt;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

// RFC-4180 record splitter. Returns rows of fields; tracks the 1-based
// line number each record starts on for error messages.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> split_csv(std::string_view bytes) {
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    auto end_field = [&] {
        fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        // Blank lines are skipped.
        if (!(fields.size() == 1 && fields[0].empty())) {
            rows.emplace_back(record_line, std::move(fields));
        }
        fields.clear();
        record_line = line;
    };

    if (bytes.starts_with("\xEF\xBB\xBF")) {
        bytes.remove_prefix(3);
    }
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const char ch = bytes[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < bytes.size() && bytes[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') {
                    ++line;
                }
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
        case '"':
            if (!field_started && field.empty()) {
                in_quotes = true;
                field_started = true;
            } else {
                field.push_back(ch);
            }
            break;
        case ',':
            end_field();
            break;
        case '\r':
            if (i + 1 < bytes.size() && bytes[i + 1] == '\n') {
                break;
            }
            ++line;
            end_record();
            break;
        case '\n':
            ++line;
            end_record();
            break;
        default:
            field.push_back(ch);
            field_started = true;
        }
    }
    if (in_quotes) {
        throw ParseError("unterminated quoted field starting on line " + std::to_string(record_line));
    }
    if (!field.empty() || !fields.empty() || field_started) {
        end_record();
    }
    return rows;
}

inline double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string format_number(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

inline std::string join_quoted(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += (i ? ", '" : "'") + items[i] + "'";
    }
    return out;
}

inline bool contains(const std::vector<std::string>& set, const std::string& v) {
    return std::find(set.begin(), set.end(), v) != set.end();
}

} // namespace detail

/// Parses CSV bytes with a header row. Cells equal to one of
/// `missing_codes`, and empty cells, are marked missing. A column is
/// numeric when every non-missing cell parses as a finite number.
inline Table load_csv(std::string_view bytes, const std::vector<std::string>& missing_codes = {},
                      std::string source = "csv") {
    auto rows = detail::split_csv(bytes);
    if (rows.empty()) {
        throw ParseError("empty CSV input");
    }
    const auto& header = rows.front().second;
    const auto arity = header.size();

    Table t;
    t.provenance.source = std::move(source);
    t.n_rows = rows.size() - 1;
    t.columns.resize(arity);
    std::set<std::string> seen;
    for (std::size_t c = 0; c < arity; ++c) {
        t.columns[c].name = std::string(detail::trim(header[c]));
        if (t.columns[c].name.empty()) {
            throw ParseError("empty column name at header position " + std::to_string(c + 1));
        }
        if (!seen.insert(t.columns[c].name).second) {
            throw ParseError("duplicate column name '" + t.columns[c].name + "'");
        }
        t.columns[c].text.reserve(t.n_rows);
        t.columns[c].missing.reserve(t.n_rows);
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto& [line, fields] = rows[r];
        if (fields.size() != arity) {
            throw ParseError("row " + std::to_string(r) + " (line " + std::to_string(line) + ") has " +
                             std::to_string(fields.size()) + " fields, expected " + std::to_string(arity));
        }
        for (std::size_t c = 0; c < arity; ++c) {
            const bool miss = detail::trim(fields[c]).empty() || detail::contains(missing_codes, fields[c]);
            t.columns[c].missing.push_back(miss ? 1 : 0);
            t.columns[c].text.push_back(std::move(fields[c]));
        }
    }
    for (auto& col : t.columns) {
        std::vector<double> values(t.n_rows, std::numeric_limits<double>::quiet_NaN());
        bool numeric = true;
        for (std::size_t r = 0; r < t.n_rows && numeric; ++r) {
            if (col.missing[r]) {
                continue;
            }
            if (auto v = detail::parse_number(col.text[r])) {
                values[r] = *v;
            } else {
                numeric = false;
            }
        }
        if (numeric) {
            col.type = ColumnType::numeric;
            col.values = std::move(values);
        } else {
            col.type = ColumnType::categorical;
        }
    }
    return t;
}

/// Row filtering, imputation and standardization.
inline Table preprocess(Table t, const PreprocessConfig& cfg) {
    if (!(cfg.row_missing_threshold >= 0.0 && cfg.row_missing_threshold <= 1.0)) {
        throw ValidationError("row_missing_threshold must be in [0, 1]");
    }
    for (const auto& name : cfg.passthrough_columns) {
        if (!t.find(name)) {
            throw ValidationError("column '" + name + "' not found");
        }
    }
    if (t.n_rows == 0) {
        throw ValidationError("dataset has no rows");
    }
    auto is_passthrough = [&](const Column& c) { return detail::contains(cfg.passthrough_columns, c.name); };

    const auto n_cols = t.columns.size();
    std::vector<std::size_t> keep;
    std::size_t dropped_sparse = 0;
    std::size_t dropped_incomplete = 0;
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        std::size_t n_missing = 0;
        bool passthrough_missing = false;
        for (const auto& col : t.columns) {
            if (col.missing[r]) {
                ++n_missing;
                passthrough_missing = passthrough_missing || is_passthrough(col);
            }
        }
        const double frac = n_cols ? static_cast<double>(n_missing) / static_cast<double>(n_cols) : 0.0;
        if (frac > cfg.row_missing_threshold) {
            ++dropped_sparse;
        } else if (passthrough_missing || (cfg.impute == Impute::none && n_missing > 0)) {
            ++dropped_incomplete;
        } else {
            keep.push_back(r);
        }
    }
    if (keep.empty()) {
        throw ValidationError("preprocessing dropped all rows");
    }
    for (auto& col : t.columns) {
        Column next{col.name, col.type, {}, {}, {}};
        next.text.reserve(keep.size());
        next.missing.reserve(keep.size());
        for (auto r : keep) {
            next.text.push_back(col.text[r]);
            next.missing.push_back(col.missing[r]);
            if (col.type == ColumnType::numeric) {
                next.values.push_back(col.values[r]);
            }
        }
        col = std::move(next);
    }
    t.n_rows = keep.size();
    t.provenance.steps.push_back("drop_sparse_rows(threshold=" + detail::format_number(cfg.row_missing_threshold) +
                                 ", dropped=" + std::to_string(dropped_sparse) + ")");
    if (dropped_incomplete) {
        t.provenance.steps.push_back("drop_incomplete_rows(dropped=" + std::to_string(dropped_incomplete) + ")");
    }

    if (cfg.impute != Impute::none) {
        for (auto& col : t.columns) {
            if (is_passthrough(col)) {
                continue;
            }
            if (col.type == ColumnType::numeric) {
                std::vector<double> observed;
                for (std::size_t r = 0; r < t.n_rows; ++r) {
                    if (!col.missing[r]) {
                        observed.push_back(col.values[r]);
                    }
                }
                const double fill = cfg.impute == Impute::mean ? detail::mean_of(observed) : detail::median_of(observed);
                for (std::size_t r = 0; r < t.n_rows; ++r) {
                    if (col.missing[r]) {
                        col.values[r] = fill;
                        col.text[r] = detail::format_number(fill);
                        col.missing[r] = 0;
                    }
                }
            } else {
                // Most frequent level; ties go to the lexicographically smallest.
                std::map<std::string, std::size_t> counts;
                for (std::size_t r = 0; r < t.n_rows; ++r) {
                    if (!col.missing[r]) {
                        ++counts[col.text[r]];
                    }
                }
                std::string mode;
                std::size_t best = 0;
                for (const auto& [level, n] : counts) {
                    if (n > best) {
                        best = n;
                        mode = level;
                    }
                }
                for (std::size_t r = 0; r < t.n_rows; ++r) {
                    if (col.missing[r] && best > 0) {
                        col.text[r] = mode;
                        col.missing[r] = 0;
                    }
                }
            }
        }
        t.provenance.steps.push_back(cfg.impute == Impute::mean ? "impute(mean)" : "impute(median)");
    }

    if (cfg.standardize == Standardize::zscore) {
        for (auto& col : t.columns) {
            if (col.type != ColumnType::numeric || is_passthrough(col)) {
                continue;
            }
            const double mu = detail::mean_of(col.values);
            double ss = 0.0;
            for (double v : col.values) {
                ss += (v - mu) * (v - mu);
            }
            const double sd = t.n_rows > 1 ? std::sqrt(ss / static_cast<double>(t.n_rows - 1)) : 0.0;
            for (auto& v : col.values) {
                v = sd > 0.0 ? (v - mu) / sd : 0.0;
            }
        }
        t.provenance.steps.push_back("standardize(zscore)");
    }
    return t;
}

/// Binarizes target and sensitive columns and one-hot encodes the
/// remaining categorical features (levels in sorted order, named
/// `column=level`).
inline Dataset encode_task(const Table& t, const TaskEncoding& task) {
    const Column* target = t.find(task.target);
    if (!target) {
        throw ValidationError("target column '" + task.target + "' not found");
    }
    const Column* sensitive = t.find(task.sensitive);
    if (!sensitive) {
        throw ValidationError("sensitive column '" + task.sensitive + "' not found");
    }
    if (task.target == task.sensitive) {
        throw ValidationError("target and sensitive column must differ");
    }
    if (task.positive_values.empty()) {
        throw ValidationError("no positive target values given");
    }
    if (task.group0_values.empty()) {
        throw ValidationError("no group-0 sensitive values given");
    }

    auto binarize = [&](const Column& col, const std::vector<std::string>& ones, const std::vector<std::string>& zeros,
                        const char* ones_label, const char* zeros_label) {
        std::set<std::string> observed;
        std::vector<std::uint8_t> out(t.n_rows);
        for (std::size_t r = 0; r < t.n_rows; ++r) {
            if (col.missing[r]) {
                throw ValidationError("missing value in column '" + col.name + "' at row " + std::to_string(r + 1));
            }
            observed.insert(col.text[r]);
            out[r] = detail::contains(ones, col.text[r]) ? 1 : 0;
        }
        auto check_declared = [&](const std::vector<std::string>& declared, const char* label) {
            std::vector<std::string> unknown;
            for (const auto& v : declared) {
                if (!observed.count(v)) {
                    unknown.push_back(v);
                }
            }
            if (!unknown.empty()) {
                throw ValidationError(std::string(label) + " value(s) " + detail::join_quoted(unknown) +
                                      " not found in column '" + col.name + "'");
            }
        };
        check_declared(ones, ones_label);
        check_declared(zeros, zeros_label);
        if (!zeros.empty()) {
            std::vector<std::string> stray;
            for (const auto& v : observed) {
                if (!detail::contains(ones, v) && !detail::contains(zeros, v)) {
                    stray.push_back(v);
                }
            }
            if (!stray.empty()) {
                throw ValidationError("value(s) " + detail::join_quoted(stray) + " in column '" + col.name +
                                      "' belong to neither " + ones_label + " nor " + zeros_label + " values");
            }
        }
        return out;
    };

    Dataset d;
    d.provenance = t.provenance;
    d.target = binarize(*target, task.positive_values, task.negative_values, "positive", "negative");
    // Sensitive: group 0 is the declared set, everything else is group 1.
    auto in_group0 = binarize(*sensitive, task.group0_values, task.group1_values, "group0", "group1");
    d.sensitive.resize(t.n_rows);
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        d.sensitive[r] = in_group0[r] ? 0 : 1;
    }

    std::array<std::size_t, 2> cls{}, grp{};
    for (std::size_t r = 0; r < t.n_rows; ++r) {
        ++cls[d.target[r]];
        ++grp[d.sensitive[r]];
    }
    for (int k = 0; k < 2; ++k) {
        if (cls[k] == 0) {
            throw ValidationError("target class " + std::to_string(k) + " empty");
        }
    }
    for (int g = 0; g < 2; ++g) {
        if (grp[g] == 0) {
            throw ValidationError("sensitive group " + std::to_string(g) + " empty");
        }
    }

    struct Source {
        const Column* col;
        std::optional<std::string> level;
    };
    std::vector<Source> sources;
    for (const auto& col : t.columns) {
        if (&col == target || &col == sensitive) {
            continue;
        }
        if (col.type == ColumnType::numeric) {
            sources.push_back({&col, std::nullopt});
            d.feature_names.push_back(col.name);
        } else {
            std::set<std::string> levels;
            for (std::size_t r = 0; r < t.n_rows; ++r) {
                if (!col.missing[r]) {
                    levels.insert(col.text[r]);
                }
            }
            for (const auto& lv : levels) {
                sources.push_back({&col, lv});
                d.feature_names.push_back(col.name + "=" + lv);
            }
        }
    }
    d.features = Matrix(t.n_rows, sources.size());
    for (std::size_t j = 0; j < sources.size(); ++j) {
        const auto& src = sources[j];
        for (std::size_t r = 0; r < t.n_rows; ++r) {
            if (src.level) {
                d.features(r, j) = (!src.col->missing[r] && src.col->text[r] == *src.level) ? 1.0 : 0.0;
            } else {
                d.features(r, j) = src.col->values[r];
            }
        }
    }
    d.provenance.steps.push_back("encode(target=" + task.target + ", sensitive=" + task.sensitive + ")");
    return d;
}

/// Repeated holdout splits. Index lists are returned sorted ascending.
inline std::vector<Split> make_splits(const Dataset& d, const SplitPlan& plan) {
    const std::size_t n = d.n_rows();
    if (plan.n_splits < 1) {
        throw ValidationError("n_splits must be >= 1");
    }
    if (!(plan.test_fraction > 0.0 && plan.test_fraction < 1.0)) {
        throw ValidationError("test_fraction must be in (0, 1)");
    }
    if (n < 4) {
        throw ValidationError("at least 4 rows are required to split, got " + std::to_string(n));
    }
    const auto n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(plan.test_fraction * static_cast<double>(n))), 1, n - 1);

    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t r = 0; r < n; ++r) {
        by_class[d.target[r]].push_back(r);
    }
    std::array<std::size_t, 2> test_per_class{};
    if (plan.stratified) {
        for (int k = 0; k < 2; ++k) {
            if (by_class[k].size() < 2) {
                throw ValidationError("stratified split impossible: target class " + std::to_string(k) + " has " +
                                      std::to_string(by_class[k].size()) + " row(s)");
            }
        }
        // Largest-remainder allocation of the test budget across classes.
        std::array<double, 2> quota{};
        std::size_t assigned = 0;
        for (int k = 0; k < 2; ++k) {
            quota[k] = static_cast<double>(n_test) * static_cast<double>(by_class[k].size()) / static_cast<double>(n);
            test_per_class[k] = static_cast<std::size_t>(std::floor(quota[k]));
            assigned += test_per_class[k];
        }
        if (assigned < n_test) {
            const int k = (quota[1] - std::floor(quota[1])) > (quota[0] - std::floor(quota[0])) ? 1 : 0;
            test_per_class[k] += n_test - assigned;
        }
        for (int k = 0; k < 2; ++k) {
            test_per_class[k] = std::clamp<std::size_t>(test_per_class[k], 1, by_class[k].size() - 1);
        }
    }

    Rng rng(derive_seed(plan.seed, {0x5B1175ULL}));
    std::vector<Split> out;
    out.reserve(plan.n_splits);
    for (std::size_t s = 0; s < plan.n_splits; ++s) {
        Split sp;
        if (plan.stratified) {
            for (int k = 0; k < 2; ++k) {
                auto idx = by_class[k];
                rng.shuffle(std::span<std::size_t>(idx));
                sp.test.insert(sp.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(test_per_class[k]));
                sp.train.insert(sp.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(test_per_class[k]), idx.end());
            }
        } else {
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(idx));
            sp.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
            sp.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
        }
        std::sort(sp.train.begin(), sp.train.end());
        std::sort(sp.test.begin(), sp.test.end());
        out.push_back(std::move(sp));
    }
    return out;
}

} // namespace fairpilot

#endif
