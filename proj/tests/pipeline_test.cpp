#include <filesystem>
#include <fstream>
#include <sstream>

#include "demnet/checkpoint.hpp"
#include "demnet/errors.hpp"
#include "demnet/pipeline.hpp"
#include "doctest.h"
#include "json.hpp"
#include "synthetic.hpp"

using namespace demnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("demnet_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig small_run(const fs::path& out, const fs::path& data) {
  return load_config("", {{"run.out", out.string()},
                          {"data.root", data.string()},
                          {"data.image_size", "16"},
                          {"model.stem_filters", "4"},
                          {"model.block_filters", "4,8"},
                          {"model.dense_widths", "8,8,8"},
                          {"train.epochs", "2"},
                          {"train.batch_size", "8"}});
}

}  // namespace

TEST_CASE("image pipeline end to end") {
  const auto root = scratch("images");
  testing::SyntheticSpec spec;
  spec.counts = {12, 8, 6, 4};
  spec.height = spec.width = 20;
  testing::write_synthetic_images(root / "data", spec);
  const auto cfg = small_run(root / "out", root / "data");

  const auto prep = run_prepare(cfg);
  CHECK(fs::exists(root / "out/prepared/all.ftc"));
  CHECK(fs::exists(root / "out/prepared/sources.txt"));
  const auto all = feature_container_read(root / "out/prepared/all.ftc");
  CHECK(all.samples.shape() == Shape{30, 1, 16, 16});

  run_balance(cfg);
  CHECK(slurp(root / "out/balanced/class_counts.csv") ==
        "class,before,after\nMildDemented,12,12\nModerateDemented,8,12\nNonDemented,6,12\n"
        "VeryMildDemented,4,12\n");

  run_train(cfg);
  const auto first_ckpt = slurp(root / "out/model.dmnt");
  const auto first_hist = slurp(root / "out/history.csv");
  CHECK(std::count(first_hist.begin(), first_hist.end(), '\n') == 3);
  run_train(cfg);
  CHECK(slurp(root / "out/model.dmnt") == first_ckpt);
  CHECK(slurp(root / "out/history.csv") == first_hist);

  run_evaluate(cfg);
  const auto metrics = nlohmann::json::parse(slurp(root / "out/metrics.json"));
  CHECK(metrics["total"].get<int>() == 4);
  CHECK(slurp(root / "out/report.txt").find("VMD") != std::string::npos);
  CHECK_THROWS_AS(run_evaluate(cfg, EvaluateOptions{{}, "holdout"}), ConfigError);

  PredictOptions po;
  po.input = root / "data" / "NonDemented";
  run_predict(cfg, po);
  const auto preds = slurp(root / "out/predictions.csv");
  CHECK(preds.rfind("filename,class\n", 0) == 0);
  CHECK(std::count(preds.begin(), preds.end(), '\n') == 7);

  // Manifest hashes match the files on disk.
  const auto manifest = nlohmann::json::parse(slurp(prep.manifest));
  CHECK(manifest["command"] == "prepare");
  CHECK(manifest["seed"].get<int>() == 42);
  for (const auto& e : manifest["outputs"]) {
    const auto path = root / "out" / e["path"].get<std::string>();
    CHECK(e["sha256"].get<std::string>() == sha256_hex(slurp(path)));
  }
  CHECK(fs::exists(root / "out/run.log"));
  fs::remove_all(root);
}

TEST_CASE("balance on feature vectors reaches the majority count") {
  const auto root = scratch("features");
  feature_container_write(testing::synthetic_features({896, 3200, 2240, 64}, 16, 5), root / "f.ftc");
  auto cfg = load_config("", {{"run.out", (root / "out").string()}, {"data.features", (root / "f.ftc").string()}});
  run_prepare(cfg);
  run_balance(cfg);
  CHECK(slurp(root / "out/balanced/class_counts.csv") ==
        "class,before,after\nMildDemented,896,3200\nModerateDemented,3200,3200\n"
        "NonDemented,2240,3200\nVeryMildDemented,64,3200\n");
  const auto train = feature_container_read(root / "out/balanced/train.ftc");
  CHECK(train.size() == 12800 - 1280 - 1280);

  cfg.leak_free = true;
  run_balance(cfg);
  const auto lf_train = feature_container_read(root / "out/balanced/train.ftc");
  const auto lf_test = feature_container_read(root / "out/balanced/test.ftc");
  const auto prep_test = feature_container_read(root / "out/prepared/test.ftc");
  CHECK(bitwise_equal(lf_test.samples, prep_test.samples));
  const auto counts = lf_train.class_counts();
  CHECK(counts[0] == counts[1]);
  CHECK(counts[2] == counts[3]);

  cfg.leak_free = false;
  cfg.smote = false;
  CHECK_THROWS_AS(run_balance(cfg), ConfigError);
  fs::remove_all(root);
}

TEST_CASE("exit codes and incompatible inputs") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(IoError("x")) == 3);
  CHECK(exit_code_for(FormatError(FormatErrorKind::kTruncated, "x")) == 4);
  CHECK(exit_code_for(ShapeError("x")) == 5);
  CHECK(exit_code_for(DataError("x")) == 6);
  CHECK(exit_code_for(TrainingError("x")) == 7);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);

  const auto root = scratch("compat");
  auto cfg = small_run(root / "out", root / "missing");
  CHECK_THROWS_AS(run_prepare(cfg), IoError);
  CHECK_THROWS_AS(run_train(cfg), IoError);

  // A checkpoint built for 8x8 input cannot score 16x16 samples.
  LabeledDataset ds = testing::synthetic_dataset(testing::SyntheticSpec{{2, 2, 2, 2}, 16, 16, 0.05, 1});
  fs::create_directories(root / "out/balanced");
  feature_container_write(ds, root / "out/balanced/test.ftc");
  DemnetConfig mc;
  mc.input_height = mc.input_width = 8;
  mc.stem_filters = 4;
  mc.block_filters = {4, 8};
  mc.dense_widths = {8, 8, 8};
  save_checkpoint(Model<float>::build(mc, 1), root / "out/model.dmnt", 42, 0);
  CHECK_THROWS_AS(run_evaluate(cfg), ShapeError);
  fs::remove_all(root);
}

TEST_CASE("sha256 digests") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
