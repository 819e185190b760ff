#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "exact/exact_loss.hpp"
#include "exact/linalg.hpp"
#include "exact/random.hpp"

namespace exact {

enum class ColumnKind { numeric, categorical, label, ignore };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
};

/// Layout of a delimited text file.
struct TableSchema {
    std::vector<ColumnSchema> columns;
    bool has_header = false;
    std::vector<std::string> missing_tokens{"?", "", "NA"};
    char delimiter = ',';

    std::size_t label_index() const {
        std::optional<std::size_t> found;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i].kind != ColumnKind::label) continue;
            if (found) throw std::invalid_argument("TableSchema: more than one label column");
            found = i;
        }
        if (!found) throw std::invalid_argument("TableSchema: no label column");
        return *found;
    }

    void validate() const {
        if (columns.empty()) throw std::invalid_argument("TableSchema: no columns");
        label_index();
    }

    bool is_missing(std::string_view cell) const {
        return std::find(missing_tokens.begin(), missing_tokens.end(), cell) != missing_tokens.end();
    }
};

inline ColumnKind parse_column_kind(const std::string& s) {
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "categorical") return ColumnKind::categorical;
    if (s == "label") return ColumnKind::label;
    if (s == "ignore") return ColumnKind::ignore;
    throw std::invalid_argument("unknown column kind '" + s + "'");
}

inline std::string to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::label: return "label";
        case ColumnKind::ignore: return "ignore";
    }
    return "?";
}

/**
 * Schema file format (JSON):
 *   { "header": bool, "delimiter": ",", "missing_tokens": [...],
 *     "columns": [ {"name": str, "kind": "numeric|categorical|label|ignore"}, ... ] }
 * Only "columns" is required; unknown keys are rejected.
 */
inline TableSchema schema_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> allowed{"header", "delimiter", "missing_tokens", "columns"};
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw std::invalid_argument("schema: unknown key '" + key + "'");
    TableSchema schema;
    schema.has_header = j.value("header", false);
    if (j.contains("delimiter")) {
        const auto d = j.at("delimiter").get<std::string>();
        if (d.size() != 1) throw std::invalid_argument("schema: delimiter must be a single character");
        schema.delimiter = d[0];
    }
    if (j.contains("missing_tokens")) schema.missing_tokens = j.at("missing_tokens").get<std::vector<std::string>>();
    for (const auto& c : j.at("columns")) {
        for (const auto& [key, _] : c.items())
            if (key != "name" && key != "kind") throw std::invalid_argument("schema: unknown column key '" + key + "'");
        schema.columns.push_back({c.at("name").get<std::string>(), parse_column_kind(c.at("kind").get<std::string>())});
    }
    schema.validate();
    return schema;
}

inline TableSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema file '" + path + "'");
    return schema_from_json(nlohmann::json::parse(in));
}

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t row, std::size_t column, const std::string& what)
        : std::runtime_error("parse error at row " + std::to_string(row) + ", column " + std::to_string(column) + ": " + what),
          row_(row),
          column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// A parsed cell: missing, numeric, or categorical text.
using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

struct RawTable {
    TableSchema schema;
    std::vector<std::vector<Cell>> rows;

    std::size_t missing_count() const {
        std::size_t n = 0;
        for (const auto& r : rows)
            for (const auto& c : r) n += is_missing(c);
        return n;
    }

    RawTable subset(std::span<const std::size_t> indices) const {
        RawTable out{schema, {}};
        out.rows.reserve(indices.size());
        for (std::size_t i : indices) out.rows.push_back(rows.at(i));
        return out;
    }

    friend bool operator==(const RawTable& a, const RawTable& b) { return a.rows == b.rows; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

/// Splits one record; quoted fields may contain delimiters and doubled quotes.
inline std::vector<std::string> split_record(std::string_view line, char delimiter, std::size_t row) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += ch;
            }
        } else if (ch == '"' && trim(current).empty()) {
            current.clear();
            quoted = true;
            was_quoted = true;
        } else if (ch == delimiter) {
            fields.push_back(was_quoted ? current : std::string(trim(current)));
            current.clear();
            was_quoted = false;
        } else {
            current += ch;
        }
    }
    if (quoted) throw ParseError(row, fields.size() + 1, "unterminated quoted field");
    fields.push_back(was_quoted ? current : std::string(trim(current)));
    return fields;
}

inline std::optional<double> parse_double(std::string_view s) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

inline std::string quote_field(const std::string& s, char delimiter) {
    const bool needs = s.find(delimiter) != std::string::npos || s.find('"') != std::string::npos ||
                       s != trim(s) || s.empty();
    if (!needs) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

}  // namespace detail

/// Parses delimited text. Rows and columns in errors are 1-based and count the header line.
inline RawTable parse_csv(std::istream& in, const TableSchema& schema) {
    schema.validate();
    RawTable table{schema, {}};
    std::string line;
    std::size_t row = 0;
    bool header_pending = schema.has_header;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_record(line, schema.delimiter, row);
        if (fields.size() != schema.columns.size())
            throw ParseError(row, std::min(fields.size(), schema.columns.size()) + 1,
                             "expected " + std::to_string(schema.columns.size()) + " fields, found " +
                                 std::to_string(fields.size()));
        if (header_pending) {
            header_pending = false;
            continue;
        }
        std::vector<Cell> cells;
        cells.reserve(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const auto kind = schema.columns[c].kind;
            if (schema.is_missing(fields[c])) {
                if (kind == ColumnKind::label) throw ParseError(row, c + 1, "missing label");
                cells.emplace_back(std::monostate{});
            } else if (kind == ColumnKind::numeric) {
                const auto v = detail::parse_double(fields[c]);
                if (!v) throw ParseError(row, c + 1, "'" + fields[c] + "' is not a number");
                cells.emplace_back(*v);
            } else {
                cells.emplace_back(std::move(fields[c]));
            }
        }
        table.rows.push_back(std::move(cells));
    }
    if (table.rows.empty()) throw ParseError(row, 0, "no data rows");
    return table;
}

inline RawTable load_csv(const std::string& path, const TableSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open data file '" + path + "'");
    return parse_csv(in, schema);
}

/// Writes a table so that parse_csv with the same schema reproduces it.
inline void write_csv(std::ostream& out, const RawTable& table) {
    const auto& schema = table.schema;
    const std::string missing = schema.missing_tokens.empty() ? "" : schema.missing_tokens.front();
    auto put_row = [&](const auto& fields) {
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (c) out << schema.delimiter;
            out << fields[c];
        }
        out << '\n';
    };
    if (schema.has_header) {
        std::vector<std::string> names;
        for (const auto& c : schema.columns) names.push_back(detail::quote_field(c.name, schema.delimiter));
        put_row(names);
    }
    std::ostringstream num;
    num.precision(17);
    for (const auto& r : table.rows) {
        std::vector<std::string> fields;
        for (const auto& cell : r) {
            if (is_missing(cell)) {
                fields.push_back(missing);
            } else if (const double* d = std::get_if<double>(&cell)) {
                num.str({});
                num << *d;
                fields.push_back(num.str());
            } else {
                fields.push_back(detail::quote_field(std::get<std::string>(cell), schema.delimiter));
            }
        }
        put_row(fields);
    }
}

/// Per-column fill values learned from a (training) table.
struct Imputer {
    std::vector<Cell> fill;

    static Imputer fit(const RawTable& table) {
        const auto& cols = table.schema.columns;
        Imputer imp;
        imp.fill.assign(cols.size(), std::monostate{});
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (cols[c].kind == ColumnKind::label || cols[c].kind == ColumnKind::ignore) continue;
            if (cols[c].kind == ColumnKind::numeric) {
                double sum = 0.0;
                std::size_t n = 0;
                for (const auto& r : table.rows)
                    if (const double* d = std::get_if<double>(&r[c])) {
                        sum += *d;
                        ++n;
                    }
                if (n == 0) throw std::invalid_argument("impute: column '" + cols[c].name + "' has no values");
                imp.fill[c] = sum / static_cast<double>(n);
            } else {
                std::map<std::string, std::size_t> counts;
                for (const auto& r : table.rows)
                    if (const auto* s = std::get_if<std::string>(&r[c])) ++counts[*s];
                if (counts.empty()) throw std::invalid_argument("impute: column '" + cols[c].name + "' has no values");
                // std::map iterates lexicographically, so the first maximum wins ties.
                auto best = counts.begin();
                for (auto it = counts.begin(); it != counts.end(); ++it)
                    if (it->second > best->second) best = it;
                imp.fill[c] = best->first;
            }
        }
        return imp;
    }

    RawTable apply(RawTable table) const {
        for (auto& r : table.rows)
            for (std::size_t c = 0; c < r.size(); ++c)
                if (is_missing(r[c]) && !is_missing(fill.at(c))) r[c] = fill[c];
        return table;
    }
};

/// Numeric mean / categorical mode imputation fitted on the table itself.
inline RawTable impute(const RawTable& table) {
    return Imputer::fit(table).apply(table);
}

/// Numeric design matrix plus label strings.
struct EncodedTable {
    Matrix features;
    std::vector<std::string> labels;
    std::vector<std::string> feature_names;
};

/// Category lists learned from a (training) table; order is first appearance.
struct OneHotEncoder {
    std::vector<std::vector<std::string>> categories;

    static OneHotEncoder fit(const RawTable& table) {
        const auto& cols = table.schema.columns;
        OneHotEncoder enc;
        enc.categories.resize(cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (cols[c].kind != ColumnKind::categorical) continue;
            for (const auto& r : table.rows)
                if (const auto* s = std::get_if<std::string>(&r[c]))
                    if (std::find(enc.categories[c].begin(), enc.categories[c].end(), *s) == enc.categories[c].end())
                        enc.categories[c].push_back(*s);
        }
        return enc;
    }

    /// Unseen categories encode as an all-zero block.
    EncodedTable apply(const RawTable& table) const {
        const auto& cols = table.schema.columns;
        EncodedTable out;
        std::vector<Index> offset(cols.size(), -1);
        Index width = 0;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (cols[c].kind == ColumnKind::numeric) {
                offset[c] = width++;
                out.feature_names.push_back(cols[c].name);
            } else if (cols[c].kind == ColumnKind::categorical) {
                offset[c] = width;
                for (const auto& cat : categories.at(c)) out.feature_names.push_back(cols[c].name + "=" + cat);
                width += static_cast<Index>(categories[c].size());
            }
        }
        const std::size_t label_col = table.schema.label_index();
        out.features = Matrix::Zero(static_cast<Index>(table.rows.size()), width);
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const auto& r = table.rows[i];
            const auto row = static_cast<Index>(i);
            for (std::size_t c = 0; c < cols.size(); ++c) {
                if (cols[c].kind == ColumnKind::numeric) {
                    const double* d = std::get_if<double>(&r[c]);
                    if (!d) throw std::invalid_argument("one_hot: missing numeric value in column '" + cols[c].name + "'");
                    out.features(row, offset[c]) = *d;
                } else if (cols[c].kind == ColumnKind::categorical) {
                    const auto* s = std::get_if<std::string>(&r[c]);
                    if (!s) throw std::invalid_argument("one_hot: missing category in column '" + cols[c].name + "'");
                    const auto& cats = categories[c];
                    const auto it = std::find(cats.begin(), cats.end(), *s);
                    if (it != cats.end()) out.features(row, offset[c] + (it - cats.begin())) = 1.0;
                }
            }
            const Cell& lab = r[label_col];
            if (const auto* s = std::get_if<std::string>(&lab))
                out.labels.push_back(*s);
            else
                throw std::invalid_argument("one_hot: missing label");
        }
        return out;
    }
};

inline EncodedTable one_hot(const RawTable& table) {
    return OneHotEncoder::fit(table).apply(table);
}

struct StandardizeStats {
    Vector mean;
    Vector std;  ///< population standard deviation; zero-variance columns store 1
};

/**
 * Per-column (x - mean) / std. When stats are absent they are computed from
 * the given matrix with the population convention; columns with zero spread
 * map to 0.
 */
inline std::pair<Matrix, StandardizeStats> standardize(const Matrix& features,
                                                       const std::optional<StandardizeStats>& stats = std::nullopt) {
    StandardizeStats s;
    if (stats) {
        if (stats->mean.size() != features.cols() || stats->std.size() != features.cols())
            throw std::invalid_argument("standardize: statistics do not match the feature count");
        s = *stats;
    } else {
        if (features.rows() < 1) throw std::invalid_argument("standardize: empty matrix");
        s.mean = features.colwise().mean().transpose();
        s.std = ((features.rowwise() - s.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
        for (Index c = 0; c < s.std.size(); ++c)
            if (!(s.std(c) > 0.0)) s.std(c) = 1.0;
    }
    Matrix out = (features.rowwise() - s.mean.transpose()) * s.std.cwiseInverse().asDiagonal();
    return {std::move(out), std::move(s)};
}

/// Features with 1-based integer labels.
struct TabularDataset {
    Matrix features;
    std::vector<ClassLabel> labels;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;

    Index size() const noexcept { return features.rows(); }
    Index dim() const noexcept { return features.cols(); }
    Index classes() const noexcept { return static_cast<Index>(class_names.size()); }

    void validate() const {
        if (features.rows() < 1) throw std::invalid_argument("TabularDataset: no rows");
        if (static_cast<Index>(labels.size()) != features.rows())
            throw std::invalid_argument("TabularDataset: label count mismatch");
        if (class_names.size() < 2) throw std::invalid_argument("TabularDataset: at least two classes are required");
        for (ClassLabel y : labels) check_label(y, classes());
        if (!features.allFinite()) throw std::invalid_argument("TabularDataset: non-finite feature value");
    }

    TabularDataset subset(std::span<const std::size_t> indices) const {
        TabularDataset out{Matrix(static_cast<Index>(indices.size()), dim()), {}, feature_names, class_names};
        out.labels.reserve(indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            out.features.row(static_cast<Index>(i)) = features.row(static_cast<Index>(indices[i]));
            out.labels.push_back(labels.at(indices[i]));
        }
        return out;
    }
};

/// Seeded Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    UniformStream rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
    return idx;
}

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// The first ceil(test_fraction * n) shuffled indices go to test.
inline SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (n < 5) throw std::invalid_argument("split: at least 5 rows are required");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("split: test_fraction must lie in (0, 1)");
    const auto idx = shuffled_indices(n, seed);
    // Round away representation noise (0.2 * 10 must give 2, not 3).
    const auto test_n = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n) - 1e-9));
    SplitIndices s;
    s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(test_n));
    s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(test_n), idx.end());
    return s;
}

inline std::pair<TabularDataset, TabularDataset> split(const TabularDataset& dataset, double test_fraction,
                                                       std::uint64_t seed) {
    const auto s = split_indices(static_cast<std::size_t>(dataset.size()), test_fraction, seed);
    return {dataset.subset(s.train), dataset.subset(s.test)};
}

struct PreparedData {
    TabularDataset train;
    TabularDataset test;
};

/**
 * Raw table to standardized train/test datasets. The split happens first;
 * imputation, encoding and standardization are fitted on the train rows only.
 * Class ids follow the sorted order of the distinct label strings.
 */
inline PreparedData prepare(const RawTable& table, double test_fraction, std::uint64_t split_seed) {
    const auto s = split_indices(table.rows.size(), test_fraction, split_seed);
    const RawTable raw_train = table.subset(s.train);
    const RawTable raw_test = table.subset(s.test);

    const Imputer imputer = Imputer::fit(raw_train);
    const RawTable train_filled = imputer.apply(raw_train);
    const RawTable test_filled = imputer.apply(raw_test);
    const OneHotEncoder encoder = OneHotEncoder::fit(train_filled);
    const EncodedTable train_enc = encoder.apply(train_filled);
    const EncodedTable test_enc = encoder.apply(test_filled);

    std::vector<std::string> classes;
    const std::size_t label_col = table.schema.label_index();
    for (const auto& r : table.rows) classes.push_back(std::get<std::string>(r[label_col]));
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    auto to_ids = [&](const std::vector<std::string>& labels) {
        std::vector<ClassLabel> ids;
        ids.reserve(labels.size());
        for (const auto& l : labels)
            ids.push_back(static_cast<ClassLabel>(std::lower_bound(classes.begin(), classes.end(), l) - classes.begin()) + 1);
        return ids;
    };

    auto [train_x, stats] = standardize(train_enc.features);
    auto [test_x, unused] = standardize(test_enc.features, stats);
    PreparedData out{{std::move(train_x), to_ids(train_enc.labels), train_enc.feature_names, classes},
                     {std::move(test_x), to_ids(test_enc.labels), test_enc.feature_names, classes}};
    out.train.validate();
    out.test.validate();
    return out;
}

namespace detail {

inline TabularDataset binary_points(std::initializer_list<double> xs, std::initializer_list<int> signs) {
    TabularDataset ds;
    ds.features = Matrix(static_cast<Index>(xs.size()), 1);
    Index i = 0;
    for (double x : xs) ds.features(i++, 0) = x;
    for (int s : signs) ds.labels.push_back(s < 0 ? 1 : 2);
    ds.feature_names = {"x"};
    ds.class_names = {"-1", "+1"};
    return ds;
}

}  // namespace detail

/// Three points on a line; the only perfect thresholds lie in (0, 0.25).
inline TabularDataset toy1() {
    return detail::binary_points({-0.25, 0.0, 0.25}, {-1, -1, 1});
}

/// Five points; the best linear threshold classifies four correctly.
inline TabularDataset toy2() {
    return detail::binary_points({-6.0, -5.0, -4.0, 0.0, 2.0}, {-1, 1, 1, -1, 1});
}

}  // namespace exact
