#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "limekit/errors.hpp"

namespace limekit {

/// Tabular training data with binary class labels.
struct Dataset {
    Eigen::MatrixXd features;  // m x d
    std::vector<int> labels;   // m entries in {0, 1}
    std::vector<std::string> feature_names;

    Eigen::Index size() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }
};

/// Reads a dataset from CSV: one header row, numeric cells, last column is
/// the binary label {0, 1}. Throws CsvFormatError on malformed content and
/// IoError when the file cannot be read.
Dataset load_dataset_csv(const std::string& path);

}  // namespace limekit
