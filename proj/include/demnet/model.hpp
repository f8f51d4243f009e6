#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "demnet/layers.hpp"
#include "demnet/tensor.hpp"

namespace demnet {

/// Architecture hyperparameters. Defaults give the full network for
/// 1x128x128 grayscale scans: a 16-filter stem, four blocks with 32/64/128/256
/// filters, dense widths 512/128/64 and a 4-way softmax head.
struct DemnetConfig {
  std::size_t input_channels = 1;
  std::size_t input_height = 128;
  std::size_t input_width = 128;
  std::size_t stem_filters = 16;
  std::vector<std::size_t> block_filters{32, 64, 128, 256};
  std::size_t kernel = 3;
  std::vector<std::size_t> dense_widths{512, 128, 64};
  std::vector<double> dropout_rates{0.25, 0.25};
  std::size_t classes = 4;
  std::size_t pool_window = 2;
  std::size_t pool_stride = 2;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;
  /// Skip pooling stages whose window no longer fits instead of failing.
  bool adaptive = false;

  /// Throws ValueError when a field is outside its range.
  void validate() const;

  /// `key=value` lines, one per field, doubles printed round-trip exact.
  std::string to_text() const;
  /// Inverse of to_text(). Unknown keys are rejected.
  static DemnetConfig from_text(const std::string& text);

  friend bool operator==(const DemnetConfig&, const DemnetConfig&) = default;
};

enum class LayerKind { kConv2d, kRelu, kMaxPool, kBatchNorm, kDropout, kFlatten, kDense };

const char* to_string(LayerKind kind);

struct LayerDesc {
  LayerKind kind = LayerKind::kRelu;
  std::string name;
  ConvSpec conv;
  PoolSpec pool;
  double dropout_rate = 0.0;
  std::size_t units = 0;
  Shape input_shape;   // per sample, batch axis excluded
  Shape output_shape;  // per sample
};

template <typename T>
struct ForwardResult {
  BasicTensor<T> logits;
  BasicTensor<T> probs;
  std::optional<double> loss;
};

/// The realised layer stack with its parameters.
///
/// Layer order: stem (conv+ReLU, conv+ReLU, maxpool), then per block
/// (conv+ReLU, conv+ReLU, batch-norm, maxpool), flatten, dropout,
/// dense+ReLU, dense+ReLU, dropout, dense+ReLU, dense head. The head logits
/// feed a softmax cross-entropy when labels are supplied.
template <typename T>
class Model {
 public:
  /// Validates the shape walk (every pooling stage must produce an extent
  /// >= 1 unless `adaptive` is set) and draws He-uniform weights from
  /// RngState(init_seed). Biases start at zero.
  static Model build(const DemnetConfig& config, std::uint64_t init_seed);

  const DemnetConfig& config() const { return config_; }
  const std::vector<LayerDesc>& layers() const;
  /// Per-sample input shape [C, H, W].
  Shape input_shape() const;

  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }

  /// Trainable tensors in layer order (weights, bias / gamma, beta).
  std::vector<BasicTensor<T>*> parameters();
  std::vector<const BasicTensor<T>*> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  /// Batch-norm running mean and variance, in layer order.
  std::vector<BasicTensor<T>*> buffers();
  std::vector<const BasicTensor<T>*> buffers() const;

  /// Runs the stack in the current mode and keeps the caches for backward.
  /// `dropout_rng` is required in train mode when any dropout rate is > 0.
  /// With labels the mean cross-entropy loss is computed as well.
  ForwardResult<T> forward(const BasicTensor<T>& batch,
                           const std::vector<std::size_t>* labels = nullptr,
                           RngState* dropout_rng = nullptr);

  /// Gradient of the loss from the last labelled forward(), one tensor per
  /// parameter in parameters() order.
  std::vector<BasicTensor<T>> backward();
  /// Same, starting from an explicit gradient with respect to the logits.
  std::vector<BasicTensor<T>> backward(const BasicTensor<T>& logits_grad);

  /// Infer-mode logits; leaves the training caches untouched.
  BasicTensor<T> infer_logits(const BasicTensor<T>& batch) const;
  /// Argmax over class probabilities, ties to the lowest class index.
  std::vector<std::size_t> predict(const BasicTensor<T>& batch) const;

  template <typename U>
  Model<U> cast() const;

 private:
  template <typename U>
  friend class Model;

  struct Stage {
    LayerDesc desc;
    std::vector<BasicTensor<T>> params;
    BatchNormState<T> bn;
    LayerCache<T> cache;
  };

  BasicTensor<T> normalize_batch(const BasicTensor<T>& batch) const;

  DemnetConfig config_;
  std::vector<Stage> stages_;
  std::vector<LayerDesc> descs_;
  SoftmaxXentCache<T> head_cache_;
  Mode mode_ = Mode::kTrain;
};

/// argmax per row; ties to the lowest index.
template <typename T>
std::vector<std::size_t> argmax_rows(const BasicTensor<T>& scores);

/// Names the layer stack and its per-sample output shapes without allocating
/// parameters. Throws ShapeError naming the first stage that underflows.
std::vector<LayerDesc> plan_layers(const DemnetConfig& config);

}  // namespace demnet
