#pragma once

#include <exception>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "demnet/run_config.hpp"

namespace demnet {

/// Layout under RunConfig::out_dir:
///
///   prepared/{all,train,validation,test}.ftc, sources.txt, splits.csv
///   balanced/{train,validation,test}.ftc, splits.csv, class_counts.csv
///   model.dmnt, history.csv
///   confusion.csv, metrics.json, report.txt
///   predictions.csv
///   manifests/<command>.json, run.log
///
/// Training reads balanced/ when SMOTE is enabled and prepared/ otherwise.
struct CommandOutcome {
  std::vector<std::filesystem::path> outputs;
  std::filesystem::path manifest;
};

/// Loads images (or a feature container in hybrid mode), splits them and
/// writes the prepared/ tree.
CommandOutcome run_prepare(const RunConfig& config);

/// SMOTE on prepared/all.ftc followed by a fresh split, or, when
/// smote.leak_free is set, SMOTE on prepared/train.ftc only with the
/// validation and test parts copied unchanged.
CommandOutcome run_balance(const RunConfig& config);

CommandOutcome run_train(const RunConfig& config);

struct EvaluateOptions {
  /// Defaults to <out>/model.dmnt.
  std::filesystem::path checkpoint;
  /// train, validation or test.
  std::string split = "test";
};
CommandOutcome run_evaluate(const RunConfig& config, const EvaluateOptions& options = {});

struct PredictOptions {
  std::filesystem::path checkpoint;
  /// A directory of images, or a feature container file.
  std::filesystem::path input;
};
CommandOutcome run_predict(const RunConfig& config, const PredictOptions& options);

/// Process exit status for an exception escaping a command:
/// 2 configuration, 3 I/O, 4 file format, 5 shape or checkpoint/data
/// incompatibility, 6 data content, 7 training divergence, 1 anything else.
int exit_code_for(const std::exception& error);

std::string sha256_hex(std::string_view bytes);

}  // namespace demnet
