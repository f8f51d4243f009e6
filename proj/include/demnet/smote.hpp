#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "demnet/dataio.hpp"

namespace demnet {

/// n_samples x n_features row-major matrix with one label per row.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;
  std::vector<std::size_t> labels;

  const float* row(std::size_t r) const { return values.data() + r * cols; }
  void validate() const;
};

FeatureMatrix to_feature_matrix(const LabeledDataset& ds);

struct SmoteConfig {
  std::size_t k = 5;
  /// Rows per class after balancing; defaults to the largest class count.
  std::optional<std::size_t> target;
  std::uint64_t seed = 42;
  /// Duplicate drawn base rows instead of interpolating.
  bool replicate = false;
};

/// Provenance of one synthetic row: row = base + lambda * (neighbor - base).
struct SmoteWitness {
  std::size_t row = 0;
  std::size_t base = 0;
  std::size_t neighbor = 0;
  double lambda = 0.0;
};

struct SmoteResult {
  FeatureMatrix matrix;
  std::vector<SmoteWitness> witnesses;
  std::size_t original_rows = 0;
};

/// For every member of `cls`, the nearest other members by Euclidean
/// distance (ascending, ties to the lower row index). `k` is clamped to
/// class size - 1. Rows are indices into `matrix`; the outer list follows
/// the members in row order. Throws DataError if the class has < 2 members.
std::vector<std::vector<std::size_t>> knn_within_class(const FeatureMatrix& matrix,
                                                       std::size_t cls, std::size_t k);

/// Same, for a single member `row`.
std::vector<std::size_t> knn_of_row(const FeatureMatrix& matrix,
                                    const std::vector<std::size_t>& members, std::size_t row,
                                    std::size_t k);

/// Brings every class of `num_classes` up to the target count. Original rows
/// come first and unchanged; synthetic rows follow, grouped by class in class
/// order. Each synthetic row draws, from one RngState(seed) stream, a base
/// member uniformly, one of its k nearest neighbours uniformly, and
/// lambda ~ U[0, 1). A class with a single member repeats that member.
/// Throws DataError if a class is empty or the target is below a class count.
SmoteResult smote_balance(const FeatureMatrix& matrix, std::size_t num_classes,
                          const SmoteConfig& config);

/// SMOTE on a dataset's flattened samples; synthetic sources read
/// "smote:<base source>".
LabeledDataset smote_balance_dataset(const LabeledDataset& ds, const SmoteConfig& config,
                                     std::vector<SmoteWitness>* witnesses = nullptr);

}  // namespace demnet
