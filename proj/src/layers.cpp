#include "demnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "demnet/errors.hpp"

namespace demnet {

std::size_t pool_output_extent(std::size_t input, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) return 0;
  if (input < window) return 0;
  return (input - window) / stride + 1;
}

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  if (kernel == 0 || stride == 0) return 0;
  const std::size_t padded = input + 2 * pad;
  if (padded < kernel) return 0;
  return (padded - kernel) / stride + 1;
}

template <typename T>
BatchNormState<T> BatchNormState<T>::create(std::size_t channels, double momentum,
                                            double epsilon) {
  if (epsilon <= 0.0) throw ValueError("batch-norm epsilon must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ValueError("batch-norm momentum must be in [0, 1)");
  BatchNormState s;
  s.gamma = BasicTensor<T>::filled({channels}, T(1));
  s.beta = BasicTensor<T>::zeros({channels});
  s.running_mean = BasicTensor<T>::zeros({channels});
  s.running_var = BasicTensor<T>::filled({channels}, T(1));
  s.momentum = momentum;
  s.epsilon = epsilon;
  return s;
}

namespace {

void require_fresh(bool& fresh, const char* layer) {
  if (!fresh) {
    throw StaleCacheError(std::string(layer) +
                          " backward called without a fresh forward cache");
  }
  fresh = false;
}

template <typename T>
void require_shape(const BasicTensor<T>& upstream, const Shape& expected, const char* layer) {
  if (upstream.shape() != expected) {
    throw ShapeError(std::string(layer) + " backward: upstream gradient shape " +
                     shape_to_string(upstream.shape()) + " does not match forward output " +
                     shape_to_string(expected));
  }
}

// col[(c * kh + i) * kw + j][oy * ow + ox] = x[c][oy * s - pad + i][ox * s - pad + j]
template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t h, std::size_t w,
            const ConvSpec& spec, std::size_t oh, std::size_t ow, T* col) {
  const auto pad = static_cast<std::ptrdiff_t>(spec.pad);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < spec.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < spec.kernel_w; ++kj) {
        T* row = col + ((c * spec.kernel_h + ki) * spec.kernel_w + kj) * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * spec.stride + ki) - pad;
          T* dst = row + oy * ow;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = image + (c * h + static_cast<std::size_t>(y)) * w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * spec.stride + kj) - pad;
            dst[ox] = (x < 0 || x >= static_cast<std::ptrdiff_t>(w)) ? T(0)
                                                                      : src[static_cast<std::size_t>(x)];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, std::size_t channels, std::size_t h, std::size_t w,
            const ConvSpec& spec, std::size_t oh, std::size_t ow, T* image) {
  const auto pad = static_cast<std::ptrdiff_t>(spec.pad);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < spec.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < spec.kernel_w; ++kj) {
        const T* row = col + ((c * spec.kernel_h + ki) * spec.kernel_w + kj) * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * spec.stride + ki) - pad;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = image + (c * h + static_cast<std::size_t>(y)) * w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * spec.stride + kj) - pad;
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(w)) continue;
            dst[static_cast<std::size_t>(x)] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

// Number of elements per channel slice for a [N, C, ...] tensor.
std::size_t inner_extent(const Shape& shape) {
  std::size_t inner = 1;
  for (std::size_t axis = 2; axis < shape.size(); ++axis) inner *= shape[axis];
  return inner;
}

}  // namespace

// ---------------------------------------------------------------- conv2d

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias, const ConvSpec& spec,
                              ConvCache<T>& cache) {
  if (input.rank() != 4) throw ShapeError("conv2d expects [N,C,H,W] input, got " +
                                          shape_to_string(input.shape()));
  if (weights.rank() != 4) throw ShapeError("conv2d expects [F,C,kh,kw] weights");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t f = weights.dim(0);
  if (weights.dim(1) != c) {
    throw ShapeError("conv2d: input has " + std::to_string(c) + " channels, weights expect " +
                     std::to_string(weights.dim(1)));
  }
  if (weights.dim(2) != spec.kernel_h || weights.dim(3) != spec.kernel_w || f != spec.filters) {
    throw ShapeError("conv2d: weight shape " + shape_to_string(weights.shape()) +
                     " disagrees with the conv spec");
  }
  if (bias.rank() != 1 || bias.dim(0) != f) throw ShapeError("conv2d: bias must be [F]");
  const std::size_t oh = conv_output_extent(h, spec.kernel_h, spec.stride, spec.pad);
  const std::size_t ow = conv_output_extent(w, spec.kernel_w, spec.stride, spec.pad);
  if (oh == 0) throw ShapeError("conv2d: output height < 1 (axis H, input " + std::to_string(h) + ")");
  if (ow == 0) throw ShapeError("conv2d: output width < 1 (axis W, input " + std::to_string(w) + ")");

  const std::size_t patch = c * spec.kernel_h * spec.kernel_w;
  const std::size_t plane = oh * ow;
  auto out = BasicTensor<T>::zeros({n, f, oh, ow});
  std::vector<T> col(patch * plane);
  for (std::size_t s = 0; s < n; ++s) {
    im2col(input.raw() + s * c * h * w, c, h, w, spec, oh, ow, col.data());
    T* dst = out.raw() + s * f * plane;
    for (std::size_t k = 0; k < f; ++k) std::fill(dst + k * plane, dst + (k + 1) * plane, bias[k]);
    gemm_accumulate(weights.raw(), col.data(), dst, f, patch, plane);
  }
  cache.input = input;
  cache.weights = weights;
  cache.spec = spec;
  cache.output_shape = out.shape();
  cache.fresh = true;
  return out;
}

template <typename T>
LayerGrads<T> conv2d_backward(ConvCache<T>& cache, const BasicTensor<T>& upstream) {
  require_fresh(cache.fresh, "conv2d");
  require_shape(upstream, cache.output_shape, "conv2d");
  const auto& input = cache.input;
  const auto& weights = cache.weights;
  const ConvSpec& spec = cache.spec;
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t f = weights.dim(0);
  const std::size_t oh = upstream.dim(2), ow = upstream.dim(3);
  const std::size_t patch = c * spec.kernel_h * spec.kernel_w;
  const std::size_t plane = oh * ow;

  LayerGrads<T> grads;
  grads.input = BasicTensor<T>::zeros(input.shape());
  auto dweights = BasicTensor<T>::zeros(weights.shape());
  auto dbias = BasicTensor<T>::zeros({f});

  std::vector<T> weights_t(patch * f);
  transpose_into(weights.raw(), weights_t.data(), f, patch);
  std::vector<T> col(patch * plane), col_t(plane * patch), dcol(patch * plane);
  for (std::size_t s = 0; s < n; ++s) {
    const T* dout = upstream.raw() + s * f * plane;
    im2col(input.raw() + s * c * h * w, c, h, w, spec, oh, ow, col.data());
    transpose_into(col.data(), col_t.data(), patch, plane);
    gemm_accumulate(dout, col_t.data(), dweights.raw(), f, plane, patch);
    for (std::size_t k = 0; k < f; ++k) {
      T acc = T(0);
      for (std::size_t i = 0; i < plane; ++i) acc += dout[k * plane + i];
      dbias[k] += acc;
    }
    std::fill(dcol.begin(), dcol.end(), T(0));
    gemm_accumulate(weights_t.data(), dout, dcol.data(), patch, f, plane);
    col2im(dcol.data(), c, h, w, spec, oh, ow, grads.input.raw() + s * c * h * w);
  }
  grads.params.push_back(std::move(dweights));
  grads.params.push_back(std::move(dbias));
  return grads;
}

// --------------------------------------------------------------- maxpool

template <typename T>
BasicTensor<T> maxpool_forward(const BasicTensor<T>& input, const PoolSpec& spec,
                               PoolCache<T>& cache) {
  if (input.rank() != 4) throw ShapeError("maxpool expects [N,C,H,W] input, got " +
                                          shape_to_string(input.shape()));
  if (spec.window == 0 || spec.stride == 0) throw ValueError("maxpool window and stride must be >= 1");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = pool_output_extent(h, spec.window, spec.stride);
  const std::size_t ow = pool_output_extent(w, spec.window, spec.stride);
  if (oh == 0) throw ShapeError("maxpool: window " + std::to_string(spec.window) +
                                " larger than input height " + std::to_string(h));
  if (ow == 0) throw ShapeError("maxpool: window " + std::to_string(spec.window) +
                                " larger than input width " + std::to_string(w));
  auto out = BasicTensor<T>::zeros({n, c, oh, ow});
  cache.argmax.assign(out.size(), 0);
  const T* x = input.raw();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + (oy * spec.stride) * w + ox * spec.stride;
        for (std::size_t i = 0; i < spec.window; ++i) {
          for (std::size_t j = 0; j < spec.window; ++j) {
            const std::size_t idx = base + (oy * spec.stride + i) * w + ox * spec.stride + j;
            if (x[idx] > x[best]) best = idx;
          }
        }
        out[o] = x[best];
        cache.argmax[o] = best;
      }
    }
  }
  cache.input_shape = input.shape();
  cache.output_shape = out.shape();
  cache.fresh = true;
  return out;
}

template <typename T>
LayerGrads<T> maxpool_backward(PoolCache<T>& cache, const BasicTensor<T>& upstream) {
  require_fresh(cache.fresh, "maxpool");
  require_shape(upstream, cache.output_shape, "maxpool");
  LayerGrads<T> grads;
  grads.input = BasicTensor<T>::zeros(cache.input_shape);
  for (std::size_t o = 0; o < upstream.size(); ++o) grads.input[cache.argmax[o]] += upstream[o];
  return grads;
}

// ------------------------------------------------------------------ relu

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input, ReluCache<T>& cache) {
  BasicTensor<T> out = input;
  cache.positive.assign(input.size(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] > T(0)) {
      cache.positive[i] = 1;
    } else {
      out[i] = T(0);
    }
  }
  cache.shape = input.shape();
  cache.fresh = true;
  return out;
}

template <typename T>
LayerGrads<T> relu_backward(ReluCache<T>& cache, const BasicTensor<T>& upstream) {
  require_fresh(cache.fresh, "relu");
  require_shape(upstream, cache.shape, "relu");
  LayerGrads<T> grads;
  grads.input = upstream;
  for (std::size_t i = 0; i < upstream.size(); ++i)
    if (!cache.positive[i]) grads.input[i] = T(0);
  return grads;
}

// ------------------------------------------------------------- batchnorm

template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input, BatchNormState<T>& state,
                                 Mode mode, BatchNormCache<T>& cache) {
  if (input.rank() < 2) throw ShapeError("batchnorm expects [N,C,...] input");
  const std::size_t n = input.dim(0), c = input.dim(1);
  if (state.gamma.size() != c || state.beta.size() != c || state.running_mean.size() != c ||
      state.running_var.size() != c) {
    throw ShapeError("batchnorm: state has " + std::to_string(state.gamma.size()) +
                     " channels, input has " + std::to_string(c));
  }
  if (mode == Mode::kTrain && n < 2) {
    throw ValueError("batchnorm: train mode needs a batch of at least 2 samples, got " +
                     std::to_string(n));
  }
  const std::size_t inner = inner_extent(input.shape());
  const std::size_t count = n * inner;
  cache.inv_std.assign(c, T(0));
  cache.normalized = BasicTensor<T>::zeros(input.shape());
  auto out = BasicTensor<T>::zeros(input.shape());
  const T* x = input.raw();

  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean = 0.0, var = 0.0;
    if (mode == Mode::kTrain) {
      for (std::size_t s = 0; s < n; ++s) {
        const T* slice = x + (s * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) mean += slice[i];
      }
      mean /= static_cast<double>(count);
      for (std::size_t s = 0; s < n; ++s) {
        const T* slice = x + (s * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = slice[i] - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(count);
      const double m = state.momentum;
      state.running_mean[ch] = static_cast<T>(m * state.running_mean[ch] + (1.0 - m) * mean);
      state.running_var[ch] = static_cast<T>(m * state.running_var[ch] + (1.0 - m) * var);
    } else {
      mean = state.running_mean[ch];
      var = state.running_var[ch];
    }
    const T inv_std = static_cast<T>(1.0 / std::sqrt(var + state.epsilon));
    cache.inv_std[ch] = inv_std;
    const T mean_t = static_cast<T>(mean);
    const T g = state.gamma[ch], b = state.beta[ch];
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const T xhat = (x[off + i] - mean_t) * inv_std;
        cache.normalized[off + i] = xhat;
        out[off + i] = g * xhat + b;
      }
    }
  }
  cache.shape = input.shape();
  cache.gamma = state.gamma;
  cache.mode = mode;
  cache.fresh = true;
  return out;
}

template <typename T>
LayerGrads<T> batchnorm_backward(BatchNormCache<T>& cache, const BasicTensor<T>& upstream) {
  require_fresh(cache.fresh, "batchnorm");
  require_shape(upstream, cache.shape, "batchnorm");
  const std::size_t n = cache.shape[0], c = cache.shape[1];
  const std::size_t inner = inner_extent(cache.shape);
  const T count = static_cast<T>(n * inner);
  LayerGrads<T> grads;
  grads.input = BasicTensor<T>::zeros(cache.shape);
  auto dgamma = BasicTensor<T>::zeros({c});
  auto dbeta = BasicTensor<T>::zeros({c});
  const T* dy = upstream.raw();
  const T* xhat = cache.normalized.raw();
  for (std::size_t ch = 0; ch < c; ++ch) {
    T sum_dy = T(0), sum_dy_xhat = T(0);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        sum_dy += dy[off + i];
        sum_dy_xhat += dy[off + i] * xhat[off + i];
      }
    }
    dgamma[ch] = sum_dy_xhat;
    dbeta[ch] = sum_dy;
    const T g = cache.gamma[ch];
    const T inv_std = cache.inv_std[ch];
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        if (cache.mode == Mode::kTrain) {
          grads.input[off + i] = g * inv_std / count *
                                 (count * dy[off + i] - sum_dy - xhat[off + i] * sum_dy_xhat);
        } else {
          grads.input[off + i] = g * inv_std * dy[off + i];
        }
      }
    }
  }
  grads.params.push_back(std::move(dgamma));
  grads.params.push_back(std::move(dbeta));
  return grads;
}

// ----------------------------------------------------------------- dense

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias, DenseCache<T>& cache) {
  if (input.rank() != 2) throw ShapeError("dense expects [N,d_in] input, got " +
                                          shape_to_string(input.shape()));
  if (weights.rank() != 2 || weights.dim(0) != input.dim(1)) {
    throw ShapeError("dense: input " + shape_to_string(input.shape()) +
                     " does not match weights " + shape_to_string(weights.shape()));
  }
  const std::size_t n = input.dim(0), din = input.dim(1), dout = weights.dim(1);
  if (bias.rank() != 1 || bias.dim(0) != dout) throw ShapeError("dense: bias must be [d_out]");
  auto out = BasicTensor<T>::zeros({n, dout});
  for (std::size_t s = 0; s < n; ++s)
    std::copy(bias.raw(), bias.raw() + dout, out.raw() + s * dout);
  gemm_accumulate(input.raw(), weights.raw(), out.raw(), n, din, dout);
  cache.input = input;
  cache.weights = weights;
  cache.output_shape = out.shape();
  cache.fresh = true;
  return out;
}

template <typename T>
LayerGrads<T> dense_backward(DenseCache<T>& cache, const BasicTensor<T>& upstream) {
  require_fresh(cache.fresh, "dense");
  require_shape(upstream, cache.output_shape, "dense");
  const std::size_t n = cache.input.dim(0), din = cache.input.dim(1);
  const std::size_t dout = cache.weights.dim(1);
  LayerGrads<T> grads;
  grads.input = BasicTensor<T>::zeros({n, din});
  auto weights_t = transpose(cache.weights);
  gemm_accumulate(upstream.raw(), weights_t.raw(), grads.input.raw(), n, dout, din);
  auto dweights = BasicTensor<T>::zeros({din, dout});
  auto input_t = transpose(cache.input);
  gemm_accumulate(input_t.raw(), upstream.raw(), dweights.raw(), din, n, dout);
  auto dbias = BasicTensor<T>::zeros({dout});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < dout; ++j) dbias[j] += upstream[s * dout + j];
  grads.params.push_back(std::move(dweights));
  grads.params.push_back(std::move(dbias));
  return grads;
}

// --------------------------------------------------------------- dropout

template <typename T>
BasicTensor<T> dropout_forward(const BasicTensor<T>& input, double rate, RngState& rng,
                               Mode mode, DropoutCache<T>& cache) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValueError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  cache.shape = input.shape();
  cache.fresh = true;
  if (mode == Mode::kInfer || rate == 0.0) {
    cache.mask = BasicTensor<T>();
    return input;
  }
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  cache.mask = BasicTensor<T>::zeros(input.shape());
  BasicTensor<T> out = input;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (rng.uniform() >= rate) {
      cache.mask[i] = scale;
      out[i] *= scale;
    } else {
      out[i] = T(0);
    }
  }
  return out;
}

template <typename T>
LayerGrads<T> dropout_backward(DropoutCache<T>& cache, const BasicTensor<T>& upstream) {
  require_fresh(cache.fresh, "dropout");
  require_shape(upstream, cache.shape, "dropout");
  LayerGrads<T> grads;
  grads.input = upstream;
  if (!cache.mask.empty())
    for (std::size_t i = 0; i < upstream.size(); ++i) grads.input[i] *= cache.mask[i];
  return grads;
}

// --------------------------------------------------------------- flatten

template <typename T>
BasicTensor<T> flatten_forward(const BasicTensor<T>& input, FlattenCache<T>& cache) {
  if (input.rank() < 1) throw ShapeError("flatten expects a batched tensor");
  const std::size_t n = input.dim(0);
  auto out = input.reshaped({n, input.size() / n});
  cache.input_shape = input.shape();
  cache.output_shape = out.shape();
  cache.fresh = true;
  return out;
}

template <typename T>
LayerGrads<T> flatten_backward(FlattenCache<T>& cache, const BasicTensor<T>& upstream) {
  require_fresh(cache.fresh, "flatten");
  require_shape(upstream, cache.output_shape, "flatten");
  LayerGrads<T> grads;
  grads.input = upstream.reshaped(cache.input_shape);
  return grads;
}

// ---------------------------------------------------------- softmax-xent

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects [N,K] logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  auto probs = BasicTensor<T>::zeros(logits.shape());
  std::vector<double> e(k);
  for (std::size_t s = 0; s < n; ++s) {
    const T* row = logits.raw() + s * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      e[j] = std::exp(static_cast<double>(row[j]) - mx);
      sum += e[j];
    }
    for (std::size_t j = 0; j < k; ++j) probs[s * k + j] = static_cast<T>(e[j] / sum);
  }
  return probs;
}

template <typename T>
SoftmaxXentResult<T> softmax_xent_forward(const BasicTensor<T>& logits,
                                          const std::vector<std::size_t>& labels,
                                          SoftmaxXentCache<T>& cache) {
  if (logits.rank() != 2) throw ShapeError("softmax-xent expects [N,K] logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("softmax-xent: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (labels[s] >= k) {
      throw ValueError("softmax-xent: label " + std::to_string(labels[s]) + " at row " +
                       std::to_string(s) + " outside [0, " + std::to_string(k) + ")");
    }
  }
  SoftmaxXentResult<T> result;
  result.probs = softmax(logits);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const T* row = logits.raw() + s * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
    total += (mx + std::log(sum)) - static_cast<double>(row[labels[s]]);
  }
  result.loss = total / static_cast<double>(n);
  cache.probs = result.probs;
  cache.labels = labels;
  cache.fresh = true;
  return result;
}

template <typename T>
LayerGrads<T> softmax_xent_backward(SoftmaxXentCache<T>& cache, double loss_scale) {
  require_fresh(cache.fresh, "softmax-xent");
  const std::size_t n = cache.probs.dim(0), k = cache.probs.dim(1);
  LayerGrads<T> grads;
  grads.input = cache.probs;
  const T scale = static_cast<T>(loss_scale / static_cast<double>(n));
  for (std::size_t s = 0; s < n; ++s) {
    grads.input[s * k + cache.labels[s]] -= T(1);
    for (std::size_t j = 0; j < k; ++j) grads.input[s * k + j] *= scale;
  }
  return grads;
}

template <typename T>
LayerGrads<T> layer_backward(LayerCache<T>& cache, const BasicTensor<T>& upstream) {
  return std::visit(
      [&](auto& c) -> LayerGrads<T> {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, std::monostate>) {
          throw StaleCacheError("layer backward called before any forward pass");
        } else if constexpr (std::is_same_v<C, ConvCache<T>>) {
          return conv2d_backward(c, upstream);
        } else if constexpr (std::is_same_v<C, PoolCache<T>>) {
          return maxpool_backward(c, upstream);
        } else if constexpr (std::is_same_v<C, ReluCache<T>>) {
          return relu_backward(c, upstream);
        } else if constexpr (std::is_same_v<C, BatchNormCache<T>>) {
          return batchnorm_backward(c, upstream);
        } else if constexpr (std::is_same_v<C, DenseCache<T>>) {
          return dense_backward(c, upstream);
        } else if constexpr (std::is_same_v<C, DropoutCache<T>>) {
          return dropout_backward(c, upstream);
        } else if constexpr (std::is_same_v<C, FlattenCache<T>>) {
          return flatten_backward(c, upstream);
        } else {
          if (upstream.size() != 1) {
            throw ShapeError("softmax-xent backward expects a scalar loss gradient");
          }
          return softmax_xent_backward(c, static_cast<double>(upstream[0]));
        }
      },
      cache);
}

#define DEMNET_INSTANTIATE(T)                                                                 \
  template struct BatchNormState<T>;                                                          \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&,       \
                                         const BasicTensor<T>&, const ConvSpec&,             \
                                         ConvCache<T>&);                                      \
  template BasicTensor<T> maxpool_forward(const BasicTensor<T>&, const PoolSpec&,            \
                                          PoolCache<T>&);                                     \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&, ReluCache<T>&);                 \
  template BasicTensor<T> batchnorm_forward(const BasicTensor<T>&, BatchNormState<T>&, Mode,  \
                                            BatchNormCache<T>&);                              \
  template BasicTensor<T> dense_forward(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                        const BasicTensor<T>&, DenseCache<T>&);               \
  template BasicTensor<T> dropout_forward(const BasicTensor<T>&, double, RngState&, Mode,     \
                                          DropoutCache<T>&);                                  \
  template BasicTensor<T> flatten_forward(const BasicTensor<T>&, FlattenCache<T>&);           \
  template SoftmaxXentResult<T> softmax_xent_forward(                                         \
      const BasicTensor<T>&, const std::vector<std::size_t>&, SoftmaxXentCache<T>&);          \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                     \
  template LayerGrads<T> conv2d_backward(ConvCache<T>&, const BasicTensor<T>&);               \
  template LayerGrads<T> maxpool_backward(PoolCache<T>&, const BasicTensor<T>&);              \
  template LayerGrads<T> relu_backward(ReluCache<T>&, const BasicTensor<T>&);                 \
  template LayerGrads<T> batchnorm_backward(BatchNormCache<T>&, const BasicTensor<T>&);       \
  template LayerGrads<T> dense_backward(DenseCache<T>&, const BasicTensor<T>&);               \
  template LayerGrads<T> dropout_backward(DropoutCache<T>&, const BasicTensor<T>&);           \
  template LayerGrads<T> flatten_backward(FlattenCache<T>&, const BasicTensor<T>&);           \
  template LayerGrads<T> softmax_xent_backward(SoftmaxXentCache<T>&, double);                 \
  template LayerGrads<T> layer_backward(LayerCache<T>&, const BasicTensor<T>&);

DEMNET_INSTANTIATE(float)
DEMNET_INSTANTIATE(double)
#undef DEMNET_INSTANTIATE

}  // namespace demnet
