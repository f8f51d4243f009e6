// demnet: prepare, balance, train, evaluate and predict from the shell.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "demnet/errors.hpp"
#include "demnet/pipeline.hpp"
#include "demnet/run_config.hpp"

namespace {

struct CommonFlags {
  std::string config_file;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<std::string> features;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::string> lr;
  std::optional<std::size_t> k_neighbors;
  std::optional<std::string> image_size;
  bool no_smote = false;
  bool leak_free = false;
  bool adaptive = false;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "Run configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--data", f.data, "Image root with one folder per class");
  cmd->add_option("--features", f.features, "Feature container (hybrid-features mode)");
  cmd->add_option("--seed", f.seed, "Root seed");
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--batch-size", f.batch_size, "Mini-batch size");
  cmd->add_option("--lr", f.lr, "Learning rate");
  cmd->add_option("--k-neighbors", f.k_neighbors, "SMOTE neighbourhood size");
  cmd->add_option("--image-size", f.image_size, "Resize target, N or H,W");
  cmd->add_flag("--no-smote", f.no_smote, "Skip class balancing");
  cmd->add_flag("--leak-free", f.leak_free, "Balance the training split only");
  cmd->add_flag("--adaptive", f.adaptive, "Skip pooling stages that no longer fit");
  cmd->add_option("--set", f.sets, "Extra key=value override, repeatable (e.g. model.block_filters=16,32)");
}

demnet::RunConfig resolve(const CommonFlags& f) {
  if (f.no_smote && f.leak_free) throw demnet::ConfigError("--no-smote conflicts with --leak-free");
  if (f.no_smote && f.k_neighbors) throw demnet::ConfigError("--no-smote conflicts with --k-neighbors");
  if (f.data && f.features) throw demnet::ConfigError("--data conflicts with --features");

  std::vector<std::pair<std::string, std::string>> ov;
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw demnet::ConfigError("--set expects key=value, got '" + s + "'");
    ov.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (f.out) ov.emplace_back("run.out", *f.out);
  if (f.data) ov.emplace_back("data.root", *f.data);
  if (f.features) {
    ov.emplace_back("data.features", *f.features);
    ov.emplace_back("run.mode", "hybrid-features");
  }
  if (f.seed) ov.emplace_back("run.seed", std::to_string(*f.seed));
  if (f.epochs) ov.emplace_back("train.epochs", std::to_string(*f.epochs));
  if (f.batch_size) ov.emplace_back("train.batch_size", std::to_string(*f.batch_size));
  if (f.lr) ov.emplace_back("train.lr", *f.lr);
  if (f.k_neighbors) ov.emplace_back("smote.k", std::to_string(*f.k_neighbors));
  if (f.image_size) ov.emplace_back("data.image_size", *f.image_size);
  if (f.no_smote) ov.emplace_back("smote.enabled", "false");
  if (f.leak_free) ov.emplace_back("smote.leak_free", "true");
  if (f.adaptive) ov.emplace_back("model.adaptive", "true");

  if (f.config_file.empty()) return demnet::load_config("", ov);
  return demnet::load_config_file(f.config_file, ov);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DEMNET dementia MRI classification pipeline"};
  app.require_subcommand(1);

  CommonFlags flags;
  demnet::EvaluateOptions eval_opts;
  demnet::PredictOptions pred_opts;
  std::string pred_input;

  auto* prepare = app.add_subcommand("prepare", "Load images, split, write feature containers");
  auto* balance = app.add_subcommand("balance", "SMOTE-balance the prepared data");
  auto* train = app.add_subcommand("train", "Train the network and write a checkpoint");
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a split");
  auto* predict = app.add_subcommand("predict", "Classify images with a checkpoint");
  for (auto* cmd : {prepare, balance, train, evaluate, predict}) add_common(cmd, flags);

  evaluate->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint (default <out>/model.dmnt)");
  evaluate->add_option("--split", eval_opts.split, "train, validation or test")->capture_default_str();
  predict->add_option("--checkpoint", pred_opts.checkpoint, "Checkpoint (default <out>/model.dmnt)");
  predict->add_option("--input", pred_input, "Image directory or feature container")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto config = resolve(flags);
    if (prepare->parsed()) demnet::run_prepare(config);
    if (balance->parsed()) demnet::run_balance(config);
    if (train->parsed()) demnet::run_train(config);
    if (evaluate->parsed()) {
      demnet::run_evaluate(config, eval_opts);
      std::cout << std::ifstream(config.out_dir / "report.txt").rdbuf();
    }
    if (predict->parsed()) {
      pred_opts.input = pred_input;
      demnet::run_predict(config, pred_opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "demnet: error: " << e.what() << "\n";
    return demnet::exit_code_for(e);
  }
  return 0;
}
