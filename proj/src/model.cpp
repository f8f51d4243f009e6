#include "demnet/model.hpp"

#include <cmath>
#include <set>

#include "demnet/errors.hpp"
#include "text_util.hpp"

namespace demnet {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
  }
  return "?";
}

// --------------------------------------------------------------- config

void DemnetConfig::validate() const {
  if (input_channels == 0 || input_height == 0 || input_width == 0)
    throw ValueError("model input dimensions must be >= 1");
  if (stem_filters == 0) throw ValueError("stem filter count must be >= 1");
  if (block_filters.empty()) throw ValueError("block filter ladder must not be empty");
  for (auto f : block_filters)
    if (f == 0) throw ValueError("block filter counts must be >= 1");
  if (kernel == 0 || kernel % 2 == 0) throw ValueError("kernel size must be odd for same padding");
  if (dense_widths.size() != 3) throw ValueError("exactly three dense widths are required");
  for (auto w : dense_widths)
    if (w == 0) throw ValueError("dense widths must be >= 1");
  if (dropout_rates.size() != 2) throw ValueError("exactly two dropout rates are required");
  for (auto r : dropout_rates)
    if (!(r >= 0.0 && r < 1.0)) throw ValueError("dropout rates must be in [0, 1)");
  if (classes != 4) throw ValueError("the softmax head must have 4 classes");
  if (pool_window == 0 || pool_stride == 0) throw ValueError("pool window and stride must be >= 1");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw ValueError("bn_momentum must be in [0, 1)");
  if (!(bn_epsilon > 0.0)) throw ValueError("bn_epsilon must be positive");
}

std::string DemnetConfig::to_text() const {
  using detail::format_double;
  using detail::join;
  std::string out;
  out += "input=" + std::to_string(input_channels) + "," + std::to_string(input_height) + "," +
         std::to_string(input_width) + "\n";
  out += "stem_filters=" + std::to_string(stem_filters) + "\n";
  out += "block_filters=" + join(block_filters) + "\n";
  out += "kernel=" + std::to_string(kernel) + "\n";
  out += "dense_widths=" + join(dense_widths) + "\n";
  out += "dropout_rates=" + join(dropout_rates) + "\n";
  out += "classes=" + std::to_string(classes) + "\n";
  out += "pool=" + std::to_string(pool_window) + "," + std::to_string(pool_stride) + "\n";
  out += "bn_momentum=" + format_double(bn_momentum) + "\n";
  out += "bn_epsilon=" + format_double(bn_epsilon) + "\n";
  out += std::string("adaptive=") + (adaptive ? "1" : "0") + "\n";
  return out;
}

namespace {

std::vector<std::size_t> to_sizes(const std::vector<std::uint64_t>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

DemnetConfig DemnetConfig::from_text(const std::string& text) {
  DemnetConfig cfg;
  std::set<std::string> seen;
  for (const auto& kv : detail::parse_key_values(text)) {
    if (!seen.insert(kv.key).second) throw ConfigError("duplicate model key '" + kv.key + "'");
    if (kv.key == "input") {
      auto dims = detail::parse_u64_list(kv.key, kv.value);
      if (dims.size() != 3) throw ConfigError("key 'input': expected C,H,W");
      cfg.input_channels = dims[0];
      cfg.input_height = dims[1];
      cfg.input_width = dims[2];
    } else if (kv.key == "stem_filters") {
      cfg.stem_filters = detail::parse_u64(kv.key, kv.value);
    } else if (kv.key == "block_filters") {
      cfg.block_filters = to_sizes(detail::parse_u64_list(kv.key, kv.value));
    } else if (kv.key == "kernel") {
      cfg.kernel = detail::parse_u64(kv.key, kv.value);
    } else if (kv.key == "dense_widths") {
      cfg.dense_widths = to_sizes(detail::parse_u64_list(kv.key, kv.value));
    } else if (kv.key == "dropout_rates") {
      cfg.dropout_rates = detail::parse_double_list(kv.key, kv.value);
    } else if (kv.key == "classes") {
      cfg.classes = detail::parse_u64(kv.key, kv.value);
    } else if (kv.key == "pool") {
      auto p = detail::parse_u64_list(kv.key, kv.value);
      if (p.size() != 2) throw ConfigError("key 'pool': expected window,stride");
      cfg.pool_window = p[0];
      cfg.pool_stride = p[1];
    } else if (kv.key == "bn_momentum") {
      cfg.bn_momentum = detail::parse_double(kv.key, kv.value);
    } else if (kv.key == "bn_epsilon") {
      cfg.bn_epsilon = detail::parse_double(kv.key, kv.value);
    } else if (kv.key == "adaptive") {
      cfg.adaptive = detail::parse_bool(kv.key, kv.value);
    } else {
      throw ConfigError("unknown model key '" + kv.key + "'");
    }
  }
  return cfg;
}

// ----------------------------------------------------------- shape walk

std::vector<LayerDesc> plan_layers(const DemnetConfig& config) {
  config.validate();
  std::vector<LayerDesc> plan;
  Shape shape{config.input_channels, config.input_height, config.input_width};
  const std::size_t pad = config.kernel / 2;

  auto push = [&](LayerDesc d) {
    d.input_shape = shape;
    switch (d.kind) {
      case LayerKind::kConv2d:
        d.output_shape = {d.conv.filters,
                          conv_output_extent(shape[1], d.conv.kernel_h, d.conv.stride, d.conv.pad),
                          conv_output_extent(shape[2], d.conv.kernel_w, d.conv.stride, d.conv.pad)};
        break;
      case LayerKind::kMaxPool:
        d.output_shape = {shape[0], pool_output_extent(shape[1], d.pool.window, d.pool.stride),
                          pool_output_extent(shape[2], d.pool.window, d.pool.stride)};
        break;
      case LayerKind::kFlatten: {
        std::size_t n = 1;
        for (auto s : shape) n *= s;
        d.output_shape = {n};
        break;
      }
      case LayerKind::kDense:
        d.output_shape = {d.units};
        break;
      default:
        d.output_shape = shape;
    }
    shape = d.output_shape;
    plan.push_back(std::move(d));
  };
  auto conv = [&](const std::string& name, std::size_t filters) {
    LayerDesc d;
    d.kind = LayerKind::kConv2d;
    d.name = name;
    d.conv = ConvSpec{filters, config.kernel, config.kernel, 1, pad};
    push(d);
    LayerDesc r;
    r.kind = LayerKind::kRelu;
    r.name = name + ".relu";
    push(r);
  };
  auto pool = [&](const std::string& name) {
    const std::size_t oh = pool_output_extent(shape[1], config.pool_window, config.pool_stride);
    const std::size_t ow = pool_output_extent(shape[2], config.pool_window, config.pool_stride);
    if (oh == 0 || ow == 0) {
      if (config.adaptive) return;
      throw ShapeError("stage " + name + ": max-pool window " + std::to_string(config.pool_window) +
                       " stride " + std::to_string(config.pool_stride) + " on " +
                       std::to_string(shape[1]) + "x" + std::to_string(shape[2]) +
                       " input yields an output extent < 1");
    }
    LayerDesc d;
    d.kind = LayerKind::kMaxPool;
    d.name = name;
    d.pool = PoolSpec{config.pool_window, config.pool_stride};
    push(d);
  };
  auto dense = [&](const std::string& name, std::size_t units, bool relu) {
    LayerDesc d;
    d.kind = LayerKind::kDense;
    d.name = name;
    d.units = units;
    push(d);
    if (relu) {
      LayerDesc r;
      r.kind = LayerKind::kRelu;
      r.name = name + ".relu";
      push(r);
    }
  };
  auto dropout = [&](const std::string& name, double rate) {
    LayerDesc d;
    d.kind = LayerKind::kDropout;
    d.name = name;
    d.dropout_rate = rate;
    push(d);
  };

  conv("stem.conv1", config.stem_filters);
  conv("stem.conv2", config.stem_filters);
  pool("stem.pool");
  for (std::size_t b = 0; b < config.block_filters.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b + 1);
    conv(prefix + ".conv1", config.block_filters[b]);
    conv(prefix + ".conv2", config.block_filters[b]);
    LayerDesc bn;
    bn.kind = LayerKind::kBatchNorm;
    bn.name = prefix + ".bn";
    push(bn);
    pool(prefix + ".pool");
  }
  LayerDesc flat;
  flat.kind = LayerKind::kFlatten;
  flat.name = "flatten";
  push(flat);
  dropout("dropout1", config.dropout_rates[0]);
  dense("dense1", config.dense_widths[0], true);
  dense("dense2", config.dense_widths[1], true);
  dropout("dropout2", config.dropout_rates[1]);
  dense("dense3", config.dense_widths[2], true);
  dense("head", config.classes, false);
  return plan;
}

// ---------------------------------------------------------------- model

template <typename T>
Model<T> Model<T>::build(const DemnetConfig& config, std::uint64_t init_seed) {
  Model model;
  model.config_ = config;
  model.descs_ = plan_layers(config);
  RngState rng(init_seed);
  for (const auto& d : model.descs_) {
    Stage stage;
    stage.desc = d;
    if (d.kind == LayerKind::kConv2d) {
      const std::size_t cin = d.input_shape[0];
      const std::size_t fan_in = cin * d.conv.kernel_h * d.conv.kernel_w;
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      stage.params.push_back(BasicTensor<T>::uniform(
          {d.conv.filters, cin, d.conv.kernel_h, d.conv.kernel_w}, rng, -limit, limit));
      stage.params.push_back(BasicTensor<T>::zeros({d.conv.filters}));
    } else if (d.kind == LayerKind::kDense) {
      const std::size_t fan_in = d.input_shape[0];
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      stage.params.push_back(BasicTensor<T>::uniform({fan_in, d.units}, rng, -limit, limit));
      stage.params.push_back(BasicTensor<T>::zeros({d.units}));
    } else if (d.kind == LayerKind::kBatchNorm) {
      stage.bn = BatchNormState<T>::create(d.input_shape[0], config.bn_momentum, config.bn_epsilon);
    }
    model.stages_.push_back(std::move(stage));
  }
  return model;
}

template <typename T>
const std::vector<LayerDesc>& Model<T>::layers() const {
  return descs_;
}

template <typename T>
Shape Model<T>::input_shape() const {
  return {config_.input_channels, config_.input_height, config_.input_width};
}

template <typename T>
std::vector<BasicTensor<T>*> Model<T>::parameters() {
  std::vector<BasicTensor<T>*> out;
  for (auto& s : stages_) {
    for (auto& p : s.params) out.push_back(&p);
    if (s.desc.kind == LayerKind::kBatchNorm) {
      out.push_back(&s.bn.gamma);
      out.push_back(&s.bn.beta);
    }
  }
  return out;
}

template <typename T>
std::vector<const BasicTensor<T>*> Model<T>::parameters() const {
  std::vector<const BasicTensor<T>*> out;
  for (auto* p : const_cast<Model*>(this)->parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<std::string> Model<T>::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& s : stages_) {
    if (s.desc.kind == LayerKind::kConv2d || s.desc.kind == LayerKind::kDense) {
      out.push_back(s.desc.name + ".weight");
      out.push_back(s.desc.name + ".bias");
    } else if (s.desc.kind == LayerKind::kBatchNorm) {
      out.push_back(s.desc.name + ".gamma");
      out.push_back(s.desc.name + ".beta");
    }
  }
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

template <typename T>
std::vector<BasicTensor<T>*> Model<T>::buffers() {
  std::vector<BasicTensor<T>*> out;
  for (auto& s : stages_) {
    if (s.desc.kind == LayerKind::kBatchNorm) {
      out.push_back(&s.bn.running_mean);
      out.push_back(&s.bn.running_var);
    }
  }
  return out;
}

template <typename T>
std::vector<const BasicTensor<T>*> Model<T>::buffers() const {
  std::vector<const BasicTensor<T>*> out;
  for (auto* p : const_cast<Model*>(this)->buffers()) out.push_back(p);
  return out;
}

template <typename T>
BasicTensor<T> Model<T>::normalize_batch(const BasicTensor<T>& batch) const {
  const Shape expected = input_shape();
  if (batch.rank() == 4 && batch.dim(1) == expected[0] && batch.dim(2) == expected[1] &&
      batch.dim(3) == expected[2]) {
    return batch;
  }
  // Pooled feature vectors [N, D] feed a D x 1 x 1 input.
  if (batch.rank() == 2 && expected[1] == 1 && expected[2] == 1 && batch.dim(1) == expected[0]) {
    return batch.reshaped({batch.dim(0), expected[0], 1, 1});
  }
  throw ShapeError("batch shape " + shape_to_string(batch.shape()) +
                   " does not match model input [N," + std::to_string(expected[0]) + "," +
                   std::to_string(expected[1]) + "," + std::to_string(expected[2]) + "]");
}

template <typename T>
ForwardResult<T> Model<T>::forward(const BasicTensor<T>& batch,
                                   const std::vector<std::size_t>* labels,
                                   RngState* dropout_rng) {
  BasicTensor<T> x = normalize_batch(batch);
  for (auto& s : stages_) {
    const auto& d = s.desc;
    switch (d.kind) {
      case LayerKind::kConv2d:
        x = conv2d_forward(x, s.params[0], s.params[1], d.conv,
                           s.cache.template emplace<ConvCache<T>>());
        break;
      case LayerKind::kRelu:
        x = relu_forward(x, s.cache.template emplace<ReluCache<T>>());
        break;
      case LayerKind::kMaxPool:
        x = maxpool_forward(x, d.pool, s.cache.template emplace<PoolCache<T>>());
        break;
      case LayerKind::kBatchNorm:
        x = batchnorm_forward(x, s.bn, mode_, s.cache.template emplace<BatchNormCache<T>>());
        break;
      case LayerKind::kDropout: {
        if (mode_ == Mode::kTrain && d.dropout_rate > 0.0 && dropout_rng == nullptr) {
          throw ValueError("train-mode forward with dropout needs an RngState");
        }
        RngState unused(0);
        x = dropout_forward(x, d.dropout_rate, dropout_rng ? *dropout_rng : unused, mode_,
                            s.cache.template emplace<DropoutCache<T>>());
        break;
      }
      case LayerKind::kFlatten:
        x = flatten_forward(x, s.cache.template emplace<FlattenCache<T>>());
        break;
      case LayerKind::kDense:
        x = dense_forward(x, s.params[0], s.params[1], s.cache.template emplace<DenseCache<T>>());
        break;
    }
  }
  ForwardResult<T> result;
  if (labels) {
    auto sx = softmax_xent_forward(x, *labels, head_cache_);
    result.probs = std::move(sx.probs);
    result.loss = sx.loss;
  } else {
    head_cache_.fresh = false;
    result.probs = softmax(x);
  }
  result.logits = std::move(x);
  return result;
}

template <typename T>
std::vector<BasicTensor<T>> Model<T>::backward() {
  if (!head_cache_.fresh) {
    throw StaleCacheError("model backward requires a preceding forward pass with labels");
  }
  auto head = softmax_xent_backward(head_cache_, 1.0);
  return backward(head.input);
}

template <typename T>
std::vector<BasicTensor<T>> Model<T>::backward(const BasicTensor<T>& logits_grad) {
  head_cache_.fresh = false;
  std::vector<std::vector<BasicTensor<T>>> per_stage(stages_.size());
  BasicTensor<T> grad = logits_grad;
  for (std::size_t i = stages_.size(); i-- > 0;) {
    auto g = layer_backward(stages_[i].cache, grad);
    grad = std::move(g.input);
    per_stage[i] = std::move(g.params);
  }
  std::vector<BasicTensor<T>> out;
  for (auto& ps : per_stage)
    for (auto& p : ps) out.push_back(std::move(p));
  return out;
}

template <typename T>
BasicTensor<T> Model<T>::infer_logits(const BasicTensor<T>& batch) const {
  BasicTensor<T> x = normalize_batch(batch);
  RngState unused(0);
  for (const auto& s : stages_) {
    const auto& d = s.desc;
    switch (d.kind) {
      case LayerKind::kConv2d: {
        ConvCache<T> c;
        x = conv2d_forward(x, s.params[0], s.params[1], d.conv, c);
        break;
      }
      case LayerKind::kRelu: {
        ReluCache<T> c;
        x = relu_forward(x, c);
        break;
      }
      case LayerKind::kMaxPool: {
        PoolCache<T> c;
        x = maxpool_forward(x, d.pool, c);
        break;
      }
      case LayerKind::kBatchNorm: {
        BatchNormState<T> bn = s.bn;
        BatchNormCache<T> c;
        x = batchnorm_forward(x, bn, Mode::kInfer, c);
        break;
      }
      case LayerKind::kDropout:
        break;
      case LayerKind::kFlatten: {
        FlattenCache<T> c;
        x = flatten_forward(x, c);
        break;
      }
      case LayerKind::kDense: {
        DenseCache<T> c;
        x = dense_forward(x, s.params[0], s.params[1], c);
        break;
      }
    }
  }
  return x;
}

template <typename T>
std::vector<std::size_t> Model<T>::predict(const BasicTensor<T>& batch) const {
  return argmax_rows(softmax(infer_logits(batch)));
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out;
  out.config_ = config_;
  out.descs_ = descs_;
  out.mode_ = mode_;
  for (const auto& s : stages_) {
    typename Model<U>::Stage stage;
    stage.desc = s.desc;
    for (const auto& p : s.params) stage.params.push_back(p.template cast<U>());
    if (s.desc.kind == LayerKind::kBatchNorm) {
      stage.bn.gamma = s.bn.gamma.template cast<U>();
      stage.bn.beta = s.bn.beta.template cast<U>();
      stage.bn.running_mean = s.bn.running_mean.template cast<U>();
      stage.bn.running_var = s.bn.running_var.template cast<U>();
      stage.bn.momentum = s.bn.momentum;
      stage.bn.epsilon = s.bn.epsilon;
    }
    out.stages_.push_back(std::move(stage));
  }
  return out;
}

template <typename T>
std::vector<std::size_t> argmax_rows(const BasicTensor<T>& scores) {
  if (scores.rank() != 2) throw ShapeError("argmax_rows expects [N,K] scores");
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  std::vector<std::size_t> out(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (scores[s * k + j] > scores[s * k + best]) best = j;
    out[s] = best;
  }
  return out;
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template std::vector<std::size_t> argmax_rows(const BasicTensor<float>&);
template std::vector<std::size_t> argmax_rows(const BasicTensor<double>&);

}  // namespace demnet
