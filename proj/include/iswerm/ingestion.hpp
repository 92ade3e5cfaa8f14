#pragma once

#include "iswerm/types.hpp"

#include <string>
#include <vector>

namespace iswerm {

struct ClassificationTable {
    Matrix features;          ///< n x d
    std::vector<int> labels;  ///< codes in [0, num_classes)
    int num_classes = 0;
    std::vector<std::string> column_names;
    std::vector<std::string> class_names;  ///< raw label text, by code

    Index rows() const { return features.rows(); }
    Index cols() const { return features.cols(); }
};

struct CsvOptions {
    bool drop_missing = true;
    bool standardize = true;
};

/// Reads a headed CSV. Numeric columns stay numeric; any other feature column is
/// integer-coded by first appearance and expanded to one-hot indicators. Labels
/// are coded by first appearance.
ClassificationTable load_csv_classification(const std::string& path, const std::string& label_column,
                                            const CsvOptions& options = {});

/// RFC-4180 record splitting (quoted fields, doubled quotes, embedded newlines).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// Cells treated as missing: empty, NA, N/A, NaN, nan, null, NULL, ?
bool is_missing_token(const std::string& cell);

/// Writes the processed table back out as CSV (features then the label column).
void write_table_csv(const ClassificationTable& table, const std::string& path,
                     const std::string& label_column = "label");

}  // namespace iswerm
