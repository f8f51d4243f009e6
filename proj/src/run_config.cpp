#include "demnet/run_config.hpp"

#include "binary_io.hpp"
#include "demnet/errors.hpp"
#include "text_util.hpp"

namespace demnet {

namespace {

std::vector<std::size_t> to_sizes(const std::vector<std::uint64_t>& v) {
  return {v.begin(), v.end()};
}

const char* mode_name(InputMode m) {
  return m == InputMode::kRawImage ? "raw-image" : "hybrid-features";
}

const char* optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::kRmsProp ? "rmsprop" : "sgd";
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "run.seed") {
    seed = parse_u64(key, value);
  } else if (key == "run.out") {
    out_dir = value;
  } else if (key == "run.mode") {
    if (value == "raw-image") {
      mode = InputMode::kRawImage;
    } else if (value == "hybrid-features") {
      mode = InputMode::kHybridFeatures;
    } else {
      throw ConfigError("key 'run.mode': expected raw-image or hybrid-features, got '" + value + "'");
    }
  } else if (key == "data.root") {
    data_root = value;
  } else if (key == "data.features") {
    features = value;
  } else if (key == "data.image_size") {
    const auto dims = parse_u64_list(key, value);
    if (dims.size() == 1) {
      image_height = image_width = dims[0];
    } else if (dims.size() == 2) {
      image_height = dims[0];
      image_width = dims[1];
    } else {
      throw ConfigError("key 'data.image_size': expected N or H,W");
    }
  } else if (key == "smote.enabled") {
    smote = parse_bool(key, value);
  } else if (key == "smote.k") {
    k_neighbors = parse_u64(key, value);
  } else if (key == "smote.replicate") {
    replicate = parse_bool(key, value);
  } else if (key == "smote.leak_free") {
    leak_free = parse_bool(key, value);
  } else if (key == "split.train") {
    split_train = parse_double(key, value);
  } else if (key == "split.validation") {
    split_validation = parse_double(key, value);
  } else if (key == "split.test") {
    split_test = parse_double(key, value);
  } else if (key == "split.stratified") {
    stratified = parse_bool(key, value);
  } else if (key == "model.stem_filters") {
    model.stem_filters = parse_u64(key, value);
  } else if (key == "model.block_filters") {
    model.block_filters = to_sizes(parse_u64_list(key, value));
  } else if (key == "model.kernel") {
    model.kernel = parse_u64(key, value);
  } else if (key == "model.dense_widths") {
    model.dense_widths = to_sizes(parse_u64_list(key, value));
  } else if (key == "model.dropout_rates") {
    model.dropout_rates = parse_double_list(key, value);
  } else if (key == "model.pool") {
    const auto p = parse_u64_list(key, value);
    if (p.size() != 2) throw ConfigError("key 'model.pool': expected window,stride");
    model.pool_window = p[0];
    model.pool_stride = p[1];
  } else if (key == "model.bn_momentum") {
    model.bn_momentum = parse_double(key, value);
  } else if (key == "model.bn_epsilon") {
    model.bn_epsilon = parse_double(key, value);
  } else if (key == "model.adaptive") {
    model.adaptive = parse_bool(key, value);
  } else if (key == "train.epochs") {
    train.epochs = parse_u64(key, value);
  } else if (key == "train.batch_size") {
    train.batch_size = parse_u64(key, value);
  } else if (key == "train.lr") {
    train.learning_rate = parse_double(key, value);
  } else if (key == "train.optimizer") {
    if (value == "rmsprop") {
      train.optimizer = OptimizerKind::kRmsProp;
    } else if (value == "sgd") {
      train.optimizer = OptimizerKind::kSgd;
    } else {
      throw ConfigError("key 'train.optimizer': expected rmsprop or sgd, got '" + value + "'");
    }
  } else if (key == "train.rho") {
    train.rho = parse_double(key, value);
  } else if (key == "train.epsilon") {
    train.epsilon = parse_double(key, value);
  } else if (key == "train.shuffle") {
    train.shuffle = parse_bool(key, value);
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

std::string RunConfig::to_text() const {
  using detail::format_double;
  using detail::join;
  auto b = [](bool v) { return v ? "true" : "false"; };
  std::string s;
  s += "[run]\n";
  s += "seed = " + std::to_string(seed) + "\n";
  s += "out = " + out_dir.string() + "\n";
  s += std::string("mode = ") + mode_name(mode) + "\n";
  s += "[data]\n";
  s += "root = " + data_root.string() + "\n";
  s += "features = " + features.string() + "\n";
  s += "image_size = " + std::to_string(image_height) + "," + std::to_string(image_width) + "\n";
  s += "[smote]\n";
  s += std::string("enabled = ") + b(smote) + "\n";
  s += "k = " + std::to_string(k_neighbors) + "\n";
  s += std::string("replicate = ") + b(replicate) + "\n";
  s += std::string("leak_free = ") + b(leak_free) + "\n";
  s += "[split]\n";
  s += "train = " + format_double(split_train) + "\n";
  s += "validation = " + format_double(split_validation) + "\n";
  s += "test = " + format_double(split_test) + "\n";
  s += std::string("stratified = ") + b(stratified) + "\n";
  s += "[model]\n";
  s += "stem_filters = " + std::to_string(model.stem_filters) + "\n";
  s += "block_filters = " + join(model.block_filters) + "\n";
  s += "kernel = " + std::to_string(model.kernel) + "\n";
  s += "dense_widths = " + join(model.dense_widths) + "\n";
  s += "dropout_rates = " + join(model.dropout_rates) + "\n";
  s += "pool = " + std::to_string(model.pool_window) + "," + std::to_string(model.pool_stride) + "\n";
  s += "bn_momentum = " + format_double(model.bn_momentum) + "\n";
  s += "bn_epsilon = " + format_double(model.bn_epsilon) + "\n";
  s += std::string("adaptive = ") + b(model.adaptive) + "\n";
  s += "[train]\n";
  s += "epochs = " + std::to_string(train.epochs) + "\n";
  s += "batch_size = " + std::to_string(train.batch_size) + "\n";
  s += "lr = " + format_double(train.learning_rate) + "\n";
  s += std::string("optimizer = ") + optimizer_name(train.optimizer) + "\n";
  s += "rho = " + format_double(train.rho) + "\n";
  s += "epsilon = " + format_double(train.epsilon) + "\n";
  s += std::string("shuffle = ") + b(train.shuffle) + "\n";
  return s;
}

void RunConfig::validate() const {
  if (!data_root.empty() && !features.empty()) {
    throw ConfigError("data.root and data.features are mutually exclusive");
  }
  if (mode == InputMode::kHybridFeatures && !data_root.empty()) {
    throw ConfigError("run.mode hybrid-features reads data.features, not data.root");
  }
  if (!smote && leak_free) throw ConfigError("smote.leak_free requires smote.enabled");
  if (k_neighbors == 0) throw ConfigError("key 'smote.k': must be >= 1");
  if (image_height == 0 || image_width == 0) throw ConfigError("key 'data.image_size': must be >= 1");
  try {
    split_spec().validate();
  } catch (const ValueError& e) {
    throw ConfigError(std::string("split: ") + e.what());
  }
  try {
    train_config().validate();
  } catch (const ValueError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  try {
    model.validate();
  } catch (const ValueError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

SplitSpec RunConfig::split_spec() const {
  SplitSpec s;
  s.train = split_train;
  s.validation = split_validation;
  s.test = split_test;
  s.stratified = stratified;
  s.seed = stage_seed(seed, seed_offset::kSplit);
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

RunConfig load_config(const std::string& file_text,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  for (const auto& kv : detail::parse_key_values(file_text)) {
    try {
      cfg.set(kv.key, kv.value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(kv.line) + ": " + e.what());
    }
  }
  for (const auto& [key, value] : overrides) cfg.set(key, value);
  if (cfg.mode == InputMode::kRawImage && !cfg.features.empty()) cfg.mode = InputMode::kHybridFeatures;
  cfg.validate();
  return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  return load_config(detail::read_file(path), overrides);
}

}  // namespace demnet
