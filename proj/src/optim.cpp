#include "demnet/optim.hpp"

#include <cmath>
#include <numeric>

#include "demnet/errors.hpp"

namespace demnet {

template <typename T>
RmsPropState<T> RmsPropState<T>::create(std::span<const BasicTensor<T>* const> params,
                                        double learning_rate, double rho, double epsilon) {
  RmsPropState state;
  state.learning_rate = learning_rate;
  state.rho = rho;
  state.epsilon = epsilon;
  state.validate();
  for (const auto* p : params) state.accumulators.push_back(BasicTensor<T>::zeros(p->shape()));
  return state;
}

template <typename T>
void RmsPropState<T>::validate() const {
  if (!(rho >= 0.0 && rho < 1.0)) throw ValueError("RMSProp rho must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ValueError("RMSProp epsilon must be positive");
  if (!(learning_rate > 0.0)) throw ValueError("learning rate must be positive");
}

namespace {

template <typename T>
void check_aligned(std::span<BasicTensor<T>* const> params, std::span<const BasicTensor<T>> grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("optimizer: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape()) {
      throw ShapeError("optimizer: parameter " + std::to_string(i) + " has shape " +
                       shape_to_string(params[i]->shape()) + ", gradient " +
                       shape_to_string(grads[i].shape()));
    }
  }
}

}  // namespace

template <typename T>
void rmsprop_step(std::span<BasicTensor<T>* const> params, std::span<const BasicTensor<T>> grads,
                  RmsPropState<T>& state) {
  check_aligned(params, grads);
  state.validate();
  if (state.accumulators.empty()) {
    for (const auto* p : params) state.accumulators.push_back(BasicTensor<T>::zeros(p->shape()));
  }
  if (state.accumulators.size() != params.size()) {
    throw ShapeError("optimizer: accumulator count does not match parameter count");
  }
  const double rho = state.rho, lr = state.learning_rate, eps = state.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = *params[i];
    auto& v = state.accumulators[i];
    const auto& g = grads[i];
    if (v.shape() != theta.shape()) {
      throw ShapeError("optimizer: accumulator " + std::to_string(i) + " shape mismatch");
    }
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = g[j];
      const double vj = rho * static_cast<double>(v[j]) + (1.0 - rho) * gj * gj;
      v[j] = static_cast<T>(vj);
      theta[j] = static_cast<T>(static_cast<double>(theta[j]) - lr * gj / (std::sqrt(vj) + eps));
    }
  }
}

template <typename T>
void sgd_step(std::span<BasicTensor<T>* const> params, std::span<const BasicTensor<T>> grads,
              double learning_rate) {
  check_aligned(params, grads);
  if (!(learning_rate > 0.0)) throw ValueError("learning rate must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = *params[i];
    for (std::size_t j = 0; j < theta.size(); ++j)
      theta[j] = static_cast<T>(static_cast<double>(theta[j]) -
                                learning_rate * static_cast<double>(grads[i][j]));
  }
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ValueError("epochs must be >= 1");
  if (batch_size == 0) throw ValueError("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValueError("learning rate must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw ValueError("RMSProp rho must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ValueError("RMSProp epsilon must be positive");
}

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                              std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size)
    out.emplace_back(start, std::min(n, start + batch_size));
  if (out.size() >= 2 && out.back().second - out.back().first == 1) {
    out.pop_back();
    out.back().second = n;
  }
  return out;
}

Tensor gather_rows(const Tensor& samples, std::span<const std::size_t> indices) {
  const std::size_t n = samples.dim(0);
  const std::size_t row = samples.size() / n;
  Shape shape = samples.shape();
  shape[0] = indices.size();
  std::vector<float> data(indices.size() * row);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= n) throw ValueError("gather_rows: index out of range");
    std::copy_n(samples.raw() + indices[i] * row, row, data.data() + i * row);
  }
  return Tensor::from_data(std::move(shape), std::move(data));
}

EvalResult evaluate(const Model<float>& model, const LabeledDataset& ds, std::size_t batch_size) {
  if (ds.size() == 0) throw DataError("cannot evaluate on an empty dataset");
  EvalResult result;
  result.predictions.reserve(ds.size());
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t end = std::min(ds.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor batch = gather_rows(ds.samples, idx);
    const std::vector<std::size_t> labels(ds.labels.begin() + static_cast<std::ptrdiff_t>(start),
                                          ds.labels.begin() + static_cast<std::ptrdiff_t>(end));
    SoftmaxXentCache<float> cache;
    const auto sx = softmax_xent_forward(model.infer_logits(batch), labels, cache);
    loss_sum += sx.loss * static_cast<double>(end - start);
    const auto pred = argmax_rows(sx.probs);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      correct += pred[i] == labels[i];
      result.predictions.push_back(pred[i]);
    }
  }
  result.loss = loss_sum / static_cast<double>(ds.size());
  result.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
  return result;
}

std::vector<EpochRecord> fit(Model<float>& model, const LabeledDataset& train,
                             const LabeledDataset& validation, const TrainConfig& config,
                             const EpochCallback& on_epoch) {
  config.validate();
  if (train.size() == 0) throw DataError("training set is empty");
  if (validation.size() == 0) throw DataError("validation set is empty");
  train.validate();
  validation.validate();

  RngState shuffle_rng(stage_seed(config.seed, seed_offset::kShuffle));
  RngState dropout_rng(stage_seed(config.seed, seed_offset::kDropout));
  RmsPropState<float> rms;
  rms.learning_rate = config.learning_rate;
  rms.rho = config.rho;
  rms.epsilon = config.epsilon;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto ranges = batch_ranges(train.size(), config.batch_size);

  std::vector<EpochRecord> history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) shuffle_indices(order, shuffle_rng);
    model.set_mode(Mode::kTrain);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < ranges.size(); ++b) {
      const auto [start, end] = ranges[b];
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Tensor batch = gather_rows(train.samples, idx);
      std::vector<std::size_t> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = train.labels[idx[i]];

      const auto out = model.forward(batch, &labels, &dropout_rng);
      if (!std::isfinite(*out.loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(b + 1));
      }
      loss_sum += *out.loss * static_cast<double>(idx.size());
      const auto pred = argmax_rows(out.probs);
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];

      const auto grads = model.backward();
      const auto params = model.parameters();
      if (config.optimizer == OptimizerKind::kRmsProp) {
        rmsprop_step<float>(params, grads, rms);
      } else {
        sgd_step<float>(params, grads, config.learning_rate);
      }
    }
    model.set_mode(Mode::kInfer);
    const auto val = evaluate(model, validation, config.batch_size);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    rec.val_loss = val.loss;
    rec.val_accuracy = val.accuracy;
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  model.set_mode(Mode::kInfer);
  return history;
}

template struct RmsPropState<float>;
template struct RmsPropState<double>;
template void rmsprop_step(std::span<BasicTensor<float>* const>, std::span<const BasicTensor<float>>,
                           RmsPropState<float>&);
template void rmsprop_step(std::span<BasicTensor<double>* const>,
                           std::span<const BasicTensor<double>>, RmsPropState<double>&);
template void sgd_step(std::span<BasicTensor<float>* const>, std::span<const BasicTensor<float>>,
                       double);
template void sgd_step(std::span<BasicTensor<double>* const>, std::span<const BasicTensor<double>>,
                       double);

}  // namespace demnet
