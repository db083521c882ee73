#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "dssfn/matrix.hpp"

namespace dssfn {

// Labeled sample collection. Samples are columns: features is P x J,
// targets is the Q x J one-hot encoding of labels.
struct Dataset {
  Matrix features;          // P x J
  Matrix targets;           // Q x J, one-hot columns
  std::vector<int> labels;  // length J, values in [0, Q)
  int class_count = 0;      // Q
  std::string name;

  int feature_dim() const { return features.rows(); }
  int sample_count() const { return features.empty() ? 0 : features.cols(); }
};

// Builds a Dataset from features and integer labels, validating ranges and
// producing the one-hot target matrix.
Dataset make_dataset(Matrix features, std::vector<int> labels, int class_count,
                     std::string name);

struct CsvOptions {
  // -1 autodetects: treat the first line as a header when any field fails
  // to parse as a number. 0/1 force data/header.
  int has_header = -1;
  // Zero-based field index of the label; negative counts from the end
  // (-1 = last field).
  int label_column = -1;
};

// Loads a comma-separated file into a Dataset. Labels must be integers in
// [0, class_count); class_count == 0 infers Q as max label + 1. Accepts LF
// or CRLF endings and a UTF-8 BOM. Malformed rows raise errors carrying
// "path:line:".
Dataset load_csv(const std::string& path, int class_count = 0,
                 const CsvOptions& opts = {});

// Writes features followed by the integer label per row; load_csv on the
// output reproduces the dataset exactly.
void save_csv(const Dataset& d, const std::string& path);

// Node-sharded view of a dataset.
struct DataPartition {
  std::vector<Dataset> shards;
  // origin[m][j] = index of shard m's sample j in the source dataset.
  std::vector<std::vector<int>> origin;
};

// Splits d into node_count shards whose sizes differ by at most one
// (first J mod M shards take the extra sample). shuffle_seed drives a
// Fisher-Yates pass before the contiguous split; shuffle = false keeps the
// source order. Throws when node_count exceeds the sample count.
DataPartition partition_uniform(const Dataset& d, int node_count,
                                std::uint64_t shuffle_seed, bool shuffle = true);

// Per-feature affine map fitted on the training set: [min, max] -> [-1, 1].
struct FeatureScaling {
  std::vector<double> lo;
  std::vector<double> hi;
};

FeatureScaling fit_scaling(const Dataset& train);

// Constant features (lo == hi) map to 0 everywhere.
Matrix apply_scaling(const FeatureScaling& s, const Matrix& features);
Dataset apply_scaling(const FeatureScaling& s, Dataset d);

std::tuple<Dataset, Dataset, FeatureScaling> normalize_fit_apply(
    const Dataset& train, const Dataset& test);

// Deterministic synthetic classification set: class_count anchor points in
// [-1, 1]^feature_dim, samples cycle through classes and scatter around
// their anchor by +-spread per coordinate.
Dataset make_synthetic(std::uint64_t seed, int feature_dim, int class_count,
                       int sample_count, double spread);

}  // namespace dssfn
