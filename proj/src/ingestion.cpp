#include "iswerm/ingestion.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace iswerm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& cell) {
    const std::string s = trim(cell);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

bool is_missing_token(const std::string& cell) {
    const std::string s = trim(cell);
    return s.empty() || s == "NA" || s == "N/A" || s == "NaN" || s == "nan" || s == "null" ||
           s == "NULL" || s == "?";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"': quoted = true; any = true; break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                any = true;
                break;
            case '\r': break;
            case '\n':
                if (any || !field.empty()) {
                    row.push_back(std::move(field));
                    rows.push_back(std::move(row));
                }
                row.clear();
                field.clear();
                any = false;
                break;
            default: field.push_back(c); any = true;
        }
    }
    if (quoted) throw Error("unterminated quoted CSV field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

ClassificationTable load_csv_classification(const std::string& path, const std::string& label_column,
                                            const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open CSV '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    auto rows = parse_csv(buf.str());
    if (rows.empty()) throw Error("CSV '" + path + "' has no header");

    std::vector<std::string> header = rows.front();
    for (auto& h : header) h = trim(h);
    rows.erase(rows.begin());
    const std::size_t ncol = header.size();

    std::size_t label_idx = ncol;
    for (std::size_t j = 0; j < ncol; ++j)
        if (header[j] == label_column) label_idx = j;
    if (label_idx == ncol) throw Error("label column '" + label_column + "' not in header");

    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].size() != ncol)
            throw Error("CSV row " + std::to_string(i + 2) + " has " + std::to_string(rows[i].size()) +
                        " fields, header has " + std::to_string(ncol));

    // Rows without a label are never usable.
    std::erase_if(rows, [&](const auto& r) { return is_missing_token(r[label_idx]); });

    // A column is numeric when every non-missing cell parses as a finite real.
    std::vector<bool> numeric(ncol, true);
    for (std::size_t j = 0; j < ncol; ++j) {
        if (j == label_idx) continue;
        for (const auto& r : rows)
            if (!is_missing_token(r[j]) && !parse_number(r[j])) {
                numeric[j] = false;
                break;
            }
    }

    if (options.drop_missing) {
        std::erase_if(rows, [&](const auto& r) {
            for (std::size_t j = 0; j < ncol; ++j)
                if (j != label_idx && is_missing_token(r[j])) return true;
            return false;
        });
    }
    if (rows.empty()) throw Error("no rows left after cleaning");

    ClassificationTable table;
    std::map<std::string, int> label_codes;
    for (const auto& r : rows) {
        const std::string key = trim(r[label_idx]);
        auto [it, inserted] = label_codes.emplace(key, static_cast<int>(table.class_names.size()));
        if (inserted) table.class_names.push_back(key);
        table.labels.push_back(it->second);
    }
    table.num_classes = static_cast<int>(table.class_names.size());
    if (table.num_classes < 2) throw Error("fewer than 2 classes after cleaning");

    const Index n = static_cast<Index>(rows.size());
    std::vector<Vector> columns;
    for (std::size_t j = 0; j < ncol; ++j) {
        if (j == label_idx) continue;
        if (numeric[j]) {
            Vector col(n);
            double sum = 0.0;
            Index observed = 0;
            for (Index i = 0; i < n; ++i) {
                const auto& cell = rows[static_cast<std::size_t>(i)][j];
                if (is_missing_token(cell)) {
                    col[i] = std::numeric_limits<double>::quiet_NaN();
                } else {
                    col[i] = *parse_number(cell);
                    sum += col[i];
                    ++observed;
                }
            }
            // Only reachable with drop_missing=false: impute the observed mean.
            const double fill = observed > 0 ? sum / static_cast<double>(observed) : 0.0;
            for (Index i = 0; i < n; ++i)
                if (std::isnan(col[i])) col[i] = fill;
            columns.push_back(std::move(col));
            table.column_names.push_back(header[j]);
        } else {
            std::map<std::string, int> codes;
            std::vector<std::string> levels;
            std::vector<int> coded(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i) {
                const auto& cell = rows[static_cast<std::size_t>(i)][j];
                const std::string key = is_missing_token(cell) ? std::string("<missing>") : trim(cell);
                auto [it, inserted] = codes.emplace(key, static_cast<int>(levels.size()));
                if (inserted) levels.push_back(key);
                coded[static_cast<std::size_t>(i)] = it->second;
            }
            for (std::size_t level = 0; level < levels.size(); ++level) {
                Vector col(n);
                for (Index i = 0; i < n; ++i)
                    col[i] = coded[static_cast<std::size_t>(i)] == static_cast<int>(level) ? 1.0 : 0.0;
                columns.push_back(std::move(col));
                table.column_names.push_back(header[j] + "=" + levels[level]);
            }
        }
    }

    table.features.resize(n, static_cast<Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) table.features.col(static_cast<Index>(j)) = columns[j];

    if (options.standardize) {
        for (Index j = 0; j < table.features.cols(); ++j) {
            auto col = table.features.col(j);
            if (col.minCoeff() == col.maxCoeff()) {
                col.setZero();
                continue;
            }
            const double mean = col.mean();
            col.array() -= mean;
            const double ss = col.squaredNorm();
            const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
            if (sd > 0.0) col /= sd;
        }
    }
    return table;
}

void write_table_csv(const ClassificationTable& table, const std::string& path, const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    };
    for (const auto& name : table.column_names) out << quote(name) << ',';
    out << quote(label_column) << '\n';
    char buf[32];
    for (Index i = 0; i < table.rows(); ++i) {
        for (Index j = 0; j < table.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", table.features(i, j));
            out << buf << ',';
        }
        out << table.labels[static_cast<std::size_t>(i)] << '\n';
    }
}

}  // namespace iswerm
