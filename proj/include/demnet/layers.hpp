#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "demnet/rng.hpp"
#include "demnet/tensor.hpp"

namespace demnet {

enum class Mode { kTrain, kInfer };

/// Convolution geometry. Output extent per axis is
/// floor((in + 2 * pad - kernel) / stride) + 1.
struct ConvSpec {
  std::size_t filters = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
};

/// Max-pooling window and stride.
struct PoolSpec {
  std::size_t window = 2;
  std::size_t stride = 2;
};

/// floor((input - window) / stride + 1), or 0 when the window does not fit.
std::size_t pool_output_extent(std::size_t input, std::size_t window, std::size_t stride);

/// floor((input + 2 pad - kernel) / stride) + 1, or 0 when the kernel does not fit.
std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride,
                               std::size_t pad);

template <typename T>
struct BatchNormState {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;

  /// gamma = 1, beta = 0, running mean 0, running variance 1.
  static BatchNormState create(std::size_t channels, double momentum = 0.9,
                               double epsilon = 1e-5);
};

// Forward caches. Each is marked fresh by its forward call and consumed by
// the matching backward call; a second backward on the same cache throws.

template <typename T>
struct ConvCache {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  ConvSpec spec;
  Shape output_shape;
  bool fresh = false;
};

template <typename T>
struct PoolCache {
  Shape input_shape;
  Shape output_shape;
  std::vector<std::size_t> argmax;
  bool fresh = false;
};

template <typename T>
struct ReluCache {
  Shape shape;
  std::vector<std::uint8_t> positive;
  bool fresh = false;
};

template <typename T>
struct BatchNormCache {
  Shape shape;
  BasicTensor<T> normalized;
  std::vector<T> inv_std;
  BasicTensor<T> gamma;
  Mode mode = Mode::kTrain;
  bool fresh = false;
};

template <typename T>
struct DenseCache {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  Shape output_shape;
  bool fresh = false;
};

template <typename T>
struct DropoutCache {
  Shape shape;
  BasicTensor<T> mask;  // empty when the forward pass was the identity
  bool fresh = false;
};

template <typename T>
struct FlattenCache {
  Shape input_shape;
  Shape output_shape;
  bool fresh = false;
};

template <typename T>
struct SoftmaxXentCache {
  BasicTensor<T> probs;
  std::vector<std::size_t> labels;
  bool fresh = false;
};

template <typename T>
using LayerCache = std::variant<std::monostate, ConvCache<T>, PoolCache<T>, ReluCache<T>,
                                BatchNormCache<T>, DenseCache<T>, DropoutCache<T>,
                                FlattenCache<T>, SoftmaxXentCache<T>>;

/// Gradient of the loss with respect to a layer's input and its parameters,
/// in the parameter order of the forward call (weights, bias / gamma, beta).
template <typename T>
struct LayerGrads {
  BasicTensor<T> input;
  std::vector<BasicTensor<T>> params;
};

template <typename T>
struct SoftmaxXentResult {
  BasicTensor<T> probs;
  double loss = 0.0;
};

/// Cross-correlation of [N, C, H, W] with [F, C, kh, kw] weights plus a
/// per-filter bias.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias, const ConvSpec& spec,
                              ConvCache<T>& cache);

/// Window maximum; ties go to the first cell in row-major order.
template <typename T>
BasicTensor<T> maxpool_forward(const BasicTensor<T>& input, const PoolSpec& spec,
                               PoolCache<T>& cache);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input, ReluCache<T>& cache);

/// Per-channel normalisation over [N, C, ...]. Train mode uses the batch
/// statistics (biased variance) and folds them into the running estimates as
/// running = momentum * running + (1 - momentum) * batch.
template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input, BatchNormState<T>& state,
                                 Mode mode, BatchNormCache<T>& cache);

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias, DenseCache<T>& cache);

/// Inverted dropout: train mode zeroes each element with probability `rate`
/// and scales survivors by 1 / (1 - rate). Infer mode and rate 0 are the
/// identity and draw nothing from `rng`.
template <typename T>
BasicTensor<T> dropout_forward(const BasicTensor<T>& input, double rate, RngState& rng,
                               Mode mode, DropoutCache<T>& cache);

/// [N, ...] -> [N, prod(...)].
template <typename T>
BasicTensor<T> flatten_forward(const BasicTensor<T>& input, FlattenCache<T>& cache);

/// Max-shifted softmax over [N, K] logits and the mean negative
/// log-likelihood of `labels`.
template <typename T>
SoftmaxXentResult<T> softmax_xent_forward(const BasicTensor<T>& logits,
                                          const std::vector<std::size_t>& labels,
                                          SoftmaxXentCache<T>& cache);

/// Softmax alone (no cache, no labels).
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

template <typename T>
LayerGrads<T> conv2d_backward(ConvCache<T>& cache, const BasicTensor<T>& upstream);
template <typename T>
LayerGrads<T> maxpool_backward(PoolCache<T>& cache, const BasicTensor<T>& upstream);
template <typename T>
LayerGrads<T> relu_backward(ReluCache<T>& cache, const BasicTensor<T>& upstream);
template <typename T>
LayerGrads<T> batchnorm_backward(BatchNormCache<T>& cache, const BasicTensor<T>& upstream);
template <typename T>
LayerGrads<T> dense_backward(DenseCache<T>& cache, const BasicTensor<T>& upstream);
template <typename T>
LayerGrads<T> dropout_backward(DropoutCache<T>& cache, const BasicTensor<T>& upstream);
template <typename T>
LayerGrads<T> flatten_backward(FlattenCache<T>& cache, const BasicTensor<T>& upstream);

/// Gradient of `loss_scale * loss` with respect to the logits:
/// loss_scale * (probs - one_hot) / N.
template <typename T>
LayerGrads<T> softmax_xent_backward(SoftmaxXentCache<T>& cache, double loss_scale = 1.0);

/// Dispatches on the cache alternative. For a softmax-xent cache `upstream`
/// must be a single-element tensor holding the loss scale.
template <typename T>
LayerGrads<T> layer_backward(LayerCache<T>& cache, const BasicTensor<T>& upstream);

}  // namespace demnet
