#include "demnet/smote.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "demnet/errors.hpp"

namespace demnet {

void FeatureMatrix::validate() const {
  if (values.size() != rows * cols) throw ShapeError("feature matrix size does not match rows x cols");
  if (labels.size() != rows) throw ShapeError("feature matrix label count does not match row count");
}

FeatureMatrix to_feature_matrix(const LabeledDataset& ds) {
  ds.validate();
  FeatureMatrix m;
  m.rows = ds.size();
  m.cols = ds.sample_size();
  m.values = ds.samples.values();
  m.labels = ds.labels;
  return m;
}

namespace {

double squared_distance(const float* a, const float* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

std::vector<std::size_t> members_of(const FeatureMatrix& m, std::size_t cls) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < m.rows; ++r)
    if (m.labels[r] == cls) out.push_back(r);
  return out;
}

}  // namespace

std::vector<std::size_t> knn_of_row(const FeatureMatrix& matrix,
                                    const std::vector<std::size_t>& members, std::size_t row,
                                    std::size_t k) {
  if (members.size() < 2) throw DataError("k-NN needs at least two class members");
  const std::size_t kk = std::min(k, members.size() - 1);
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(members.size() - 1);
  for (std::size_t other : members) {
    if (other == row) continue;
    dist.emplace_back(squared_distance(matrix.row(row), matrix.row(other), matrix.cols), other);
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  std::vector<std::size_t> out(kk);
  for (std::size_t i = 0; i < kk; ++i) out[i] = dist[i].second;
  return out;
}

std::vector<std::vector<std::size_t>> knn_within_class(const FeatureMatrix& matrix,
                                                       std::size_t cls, std::size_t k) {
  matrix.validate();
  if (k == 0) throw ValueError("k must be >= 1");
  const auto members = members_of(matrix, cls);
  if (members.size() < 2) {
    throw DataError("class " + std::to_string(cls) + " has " + std::to_string(members.size()) +
                    " member(s); k-NN needs at least two");
  }
  std::vector<std::vector<std::size_t>> out;
  out.reserve(members.size());
  for (std::size_t r : members) out.push_back(knn_of_row(matrix, members, r, k));
  return out;
}

SmoteResult smote_balance(const FeatureMatrix& matrix, std::size_t num_classes,
                          const SmoteConfig& config) {
  matrix.validate();
  if (config.k == 0) throw ValueError("SMOTE k must be >= 1");
  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t r = 0; r < matrix.rows; ++r) {
    if (matrix.labels[r] >= num_classes) {
      throw DataError("label " + std::to_string(matrix.labels[r]) + " outside the class table");
    }
    members[matrix.labels[r]].push_back(r);
  }
  std::size_t largest = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (members[c].empty()) throw DataError("class " + std::to_string(c) + " has no samples");
    largest = std::max(largest, members[c].size());
  }
  const std::size_t target = config.target.value_or(largest);
  if (target < largest) {
    throw DataError("SMOTE target " + std::to_string(target) + " is below the largest class count " +
                    std::to_string(largest));
  }

  SmoteResult result;
  result.original_rows = matrix.rows;
  FeatureMatrix& out = result.matrix;
  out.cols = matrix.cols;
  out.rows = num_classes * target;
  out.values = matrix.values;
  out.labels = matrix.labels;
  out.values.reserve(out.rows * out.cols);
  out.labels.reserve(out.rows);

  RngState rng(config.seed);
  const std::size_t cols = matrix.cols;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto& mem = members[c];
    // Neighbour lists are computed for drawn bases only.
    std::map<std::size_t, std::vector<std::size_t>> neighbours;
    for (std::size_t made = mem.size(); made < target; ++made) {
      SmoteWitness w;
      w.row = out.labels.size();
      w.base = mem[rng.uniform_index(mem.size())];
      w.neighbor = w.base;
      if (mem.size() >= 2 && !config.replicate) {
        auto it = neighbours.find(w.base);
        if (it == neighbours.end())
          it = neighbours.emplace(w.base, knn_of_row(matrix, mem, w.base, config.k)).first;
        w.neighbor = it->second[rng.uniform_index(it->second.size())];
        w.lambda = rng.uniform();
      }
      const float* base = matrix.row(w.base);
      const float* nb = matrix.row(w.neighbor);
      for (std::size_t j = 0; j < cols; ++j) {
        const double b = base[j];
        out.values.push_back(static_cast<float>(b + w.lambda * (static_cast<double>(nb[j]) - b)));
      }
      out.labels.push_back(c);
      result.witnesses.push_back(w);
    }
  }
  return result;
}

LabeledDataset smote_balance_dataset(const LabeledDataset& ds, const SmoteConfig& config,
                                     std::vector<SmoteWitness>* witnesses) {
  const auto matrix = to_feature_matrix(ds);
  auto result = smote_balance(matrix, ds.class_names.size(), config);
  LabeledDataset out;
  Shape shape = ds.samples.shape();
  shape[0] = result.matrix.rows;
  out.samples = Tensor::from_data(std::move(shape), std::move(result.matrix.values));
  out.labels = std::move(result.matrix.labels);
  out.class_names = ds.class_names;
  if (!ds.sources.empty()) {
    out.sources = ds.sources;
    for (const auto& w : result.witnesses) out.sources.push_back("smote:" + ds.sources[w.base]);
  }
  if (witnesses) *witnesses = std::move(result.witnesses);
  return out;
}

}  // namespace demnet
