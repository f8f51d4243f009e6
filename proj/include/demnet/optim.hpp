#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "demnet/dataio.hpp"
#include "demnet/model.hpp"
#include "demnet/tensor.hpp"

namespace demnet {

/// Squared-gradient accumulators for RMSProp, one per parameter tensor.
template <typename T>
struct RmsPropState {
  std::vector<BasicTensor<T>> accumulators;
  double rho = 0.9;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  /// Zeroed accumulators shaped like `params`.
  static RmsPropState create(std::span<const BasicTensor<T>* const> params,
                             double learning_rate = 1e-3, double rho = 0.9,
                             double epsilon = 1e-8);
  void validate() const;
};

/// v <- rho v + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(v) + eps).
/// Accumulators are created on first use when `state` has none.
template <typename T>
void rmsprop_step(std::span<BasicTensor<T>* const> params,
                  std::span<const BasicTensor<T>> grads, RmsPropState<T>& state);

/// theta <- theta - lr g.
template <typename T>
void sgd_step(std::span<BasicTensor<T>* const> params, std::span<const BasicTensor<T>> grads,
              double learning_rate);

enum class OptimizerKind { kRmsProp, kSgd };

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  bool shuffle = true;
  OptimizerKind optimizer = OptimizerKind::kRmsProp;
  double rho = 0.9;
  double epsilon = 1e-8;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<std::size_t> predictions;
};

/// Infer-mode loss, accuracy and predictions over a dataset, in chunks.
EvalResult evaluate(const Model<float>& model, const LabeledDataset& ds,
                    std::size_t batch_size = 128);

/// Batch boundaries for n samples. A trailing batch of a single sample is
/// folded into the previous batch because train-mode batch-norm needs at
/// least two samples.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                              std::size_t batch_size);

/// Rows `indices` of a [N, ...] tensor.
Tensor gather_rows(const Tensor& samples, std::span<const std::size_t> indices);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training. Each epoch shuffles with the stream
/// stage_seed(seed, kShuffle), runs train-mode forward/backward and one
/// optimizer step per batch (dropout masks from stage_seed(seed, kDropout)),
/// then scores `validation` in infer mode. Train loss and accuracy are the
/// sample-weighted means of the train-mode batch outputs.
///
/// Throws DataError on an empty dataset and TrainingError naming the epoch
/// and batch when the loss stops being finite. The model is left in infer mode.
std::vector<EpochRecord> fit(Model<float>& model, const LabeledDataset& train,
                             const LabeledDataset& validation, const TrainConfig& config,
                             const EpochCallback& on_epoch = {});

}  // namespace demnet
