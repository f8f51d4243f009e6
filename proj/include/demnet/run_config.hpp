#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "demnet/dataio.hpp"
#include "demnet/model.hpp"
#include "demnet/optim.hpp"

namespace demnet {

enum class InputMode { kRawImage, kHybridFeatures };

/// Every setting of a pipeline run. Text form is `key = value` lines grouped
/// under [run], [data], [smote], [split], [model] and [train] headers; a key
/// may also be written fully qualified (`train.epochs = 2`).
///
///   [run]   seed (42), out (runs/demnet), mode (raw-image | hybrid-features)
///   [data]  root, features, image_size (128 or H,W)
///   [smote] enabled (true), k (5), replicate (false), leak_free (false)
///   [split] train (0.8), validation (0.1), test (0.1), stratified (false)
///   [model] stem_filters, block_filters, kernel, dense_widths,
///           dropout_rates, pool, bn_momentum, bn_epsilon, adaptive
///   [train] epochs (50), batch_size (128), lr (0.001),
///           optimizer (rmsprop | sgd), rho (0.9), epsilon (1e-8), shuffle (true)
///
/// Stage seeds derive from run.seed: SMOTE seed, split seed + 1, weight
/// init seed + 2, shuffling seed + 3, dropout seed + 4.
struct RunConfig {
  std::uint64_t seed = 42;
  std::filesystem::path out_dir = "runs/demnet";
  InputMode mode = InputMode::kRawImage;

  std::filesystem::path data_root;
  std::filesystem::path features;
  std::size_t image_height = 128;
  std::size_t image_width = 128;

  bool smote = true;
  std::size_t k_neighbors = 5;
  bool replicate = false;
  bool leak_free = false;

  double split_train = 0.8;
  double split_validation = 0.1;
  double split_test = 0.1;
  bool stratified = false;

  /// Input shape fields are ignored; the data decides them.
  DemnetConfig model;
  TrainConfig train;

  /// Applies one fully qualified key. Throws ConfigError naming the key.
  void set(const std::string& key, const std::string& value);
  /// Resolved settings, one `key = value` per line, stable order.
  std::string to_text() const;
  /// Cross-field checks (conflicting settings, ranges).
  void validate() const;

  SplitSpec split_spec() const;
  TrainConfig train_config() const;
};

/// Defaults, then `file_text` (may be empty), then `overrides` in order.
RunConfig load_config(const std::string& file_text,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});
RunConfig load_config_file(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace demnet
