#include "demnet/pipeline.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "binary_io.hpp"
#include "demnet/checkpoint.hpp"
#include "demnet/errors.hpp"
#include "demnet/metrics.hpp"
#include "demnet/smote.hpp"
#include "json.hpp"
#include "text_util.hpp"

namespace demnet {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const ConfigError*>(&error) || dynamic_cast<const ValueError*>(&error)) return 2;
  if (dynamic_cast<const IoError*>(&error)) return 3;
  if (dynamic_cast<const FormatError*>(&error)) return 4;
  if (dynamic_cast<const ShapeError*>(&error)) return 5;
  if (dynamic_cast<const DataError*>(&error)) return 6;
  if (dynamic_cast<const TrainingError*>(&error)) return 7;
  return 1;
}

namespace {

/// Collects inputs and outputs for a command's manifest and appends its
/// progress lines to run.log.
class CommandRecord {
 public:
  CommandRecord(const RunConfig& config, std::string command)
      : config_(config), command_(std::move(command)) {
    fs::create_directories(config_.out_dir);
    log_.open(config_.out_dir / "run.log", std::ios::app);
    if (!log_) throw IoError("cannot open '" + (config_.out_dir / "run.log").string() + "'");
    log("begin");
    std::string text = config_.to_text();
    for (const auto& line : detail::split(text, '\n'))
      if (!line.empty()) log_ << "[" << command_ << "]   " << line << "\n";
  }

  void log(const std::string& msg) {
    log_ << "[" << command_ << "] " << msg << "\n";
    log_.flush();
    std::cerr << "[" << command_ << "] " << msg << "\n";
  }

  void input(const fs::path& p) { inputs_.push_back(p); }

  void write(const fs::path& p, const std::string& bytes) {
    detail::write_file(p, bytes);
    outputs_.push_back(p);
  }

  void write_dataset(const fs::path& p, const LabeledDataset& ds) {
    write(p, serialize_feature_container(ds));
  }

  CommandOutcome finish() {
    nlohmann::ordered_json doc;
    doc["command"] = command_;
    doc["seed"] = config_.seed;
    doc["config"] = config_.to_text();
    auto files = [&](const std::vector<fs::path>& list) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& p : list) {
        nlohmann::ordered_json e;
        e["path"] = display(p);
        e["sha256"] = sha256_hex(detail::read_file(p));
        arr.push_back(e);
      }
      return arr;
    };
    doc["inputs"] = files(inputs_);
    doc["outputs"] = files(outputs_);
    CommandOutcome outcome;
    outcome.outputs = outputs_;
    outcome.manifest = config_.out_dir / "manifests" / (command_ + ".json");
    detail::write_file(outcome.manifest, doc.dump(2) + "\n");
    log("done, " + std::to_string(outputs_.size()) + " outputs");
    return outcome;
  }

 private:
  std::string display(const fs::path& p) const {
    const auto rel = p.lexically_relative(config_.out_dir);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
  }

  const RunConfig& config_;
  std::string command_;
  std::ofstream log_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

fs::path prepared_dir(const RunConfig& c) { return c.out_dir / "prepared"; }
fs::path balanced_dir(const RunConfig& c) { return c.out_dir / "balanced"; }
fs::path training_dir(const RunConfig& c) { return c.smote ? balanced_dir(c) : prepared_dir(c); }

LabeledDataset read_dataset(CommandRecord& rec, const fs::path& p) {
  if (!fs::exists(p)) throw IoError("missing input '" + p.string() + "'");
  rec.input(p);
  return feature_container_read(p);
}

std::string counts_line(const std::vector<std::size_t>& counts) {
  return detail::join(counts, "/");
}

/// Per-sample shape [C, H, W] the network sees for a [N, ...] tensor.
std::array<std::size_t, 3> network_input(const Shape& s) {
  if (s.size() == 4) return {s[1], s[2], s[3]};
  if (s.size() == 2) return {s[1], 1, 1};
  throw ShapeError("samples " + shape_to_string(s) +
                   " are neither [N, C, H, W] images nor [N, D] feature vectors");
}

void check_compatible(const Model<float>& model, const LabeledDataset& ds, const fs::path& what) {
  const auto in = network_input(ds.samples.shape());
  const auto expect = model.input_shape();
  if (Shape{in[0], in[1], in[2]} != expect) {
    throw ShapeError("checkpoint expects per-sample input " + shape_to_string(expect) + " but '" +
                     what.string() + "' holds " + shape_to_string(ds.samples.shape()));
  }
}

std::string split_part_name(const std::string& split) {
  if (split == "train" || split == "validation" || split == "test") return split;
  throw ConfigError("unknown split '" + split + "' (expected train, validation or test)");
}

std::vector<std::string> read_sources(const fs::path& p, std::size_t expect) {
  if (!fs::exists(p)) return {};
  auto lines = detail::split(detail::read_file(p), '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() != expect) return {};
  return lines;
}

}  // namespace

CommandOutcome run_prepare(const RunConfig& config) {
  config.validate();
  CommandRecord rec(config, "prepare");
  LabeledDataset all;
  if (config.mode == InputMode::kHybridFeatures) {
    if (config.features.empty()) throw ConfigError("hybrid-features mode needs data.features (--features)");
    all = read_dataset(rec, config.features);
  } else {
    if (config.data_root.empty()) throw ConfigError("raw-image mode needs data.root (--data)");
    all = load_image_dataset(config.data_root, config.image_height, config.image_width);
  }
  rec.log("loaded " + std::to_string(all.size()) + " samples " + shape_to_string(all.samples.shape()) +
          ", class counts " + counts_line(all.class_counts()));

  const auto splits = split_dataset(all, config.split_spec());
  rec.log("split train/validation/test " + std::to_string(splits.train.size()) + "/" +
          std::to_string(splits.validation.size()) + "/" + std::to_string(splits.test.size()));

  const auto dir = prepared_dir(config);
  rec.write_dataset(dir / "all.ftc", all);
  rec.write_dataset(dir / "train.ftc", splits.train);
  rec.write_dataset(dir / "validation.ftc", splits.validation);
  rec.write_dataset(dir / "test.ftc", splits.test);
  if (!all.sources.empty()) rec.write(dir / "sources.txt", detail::join(all.sources, "\n") + "\n");
  rec.write(dir / "splits.csv", split_manifest_csv(splits));
  return rec.finish();
}

CommandOutcome run_balance(const RunConfig& config) {
  config.validate();
  if (!config.smote) throw ConfigError("balance: SMOTE is disabled (smote.enabled = false)");
  CommandRecord rec(config, "balance");
  SmoteConfig sc;
  sc.k = config.k_neighbors;
  sc.seed = stage_seed(config.seed, seed_offset::kSmote);
  sc.replicate = config.replicate;

  const auto in = prepared_dir(config);
  const auto out = balanced_dir(config);
  std::vector<std::size_t> before;
  std::vector<std::size_t> after;
  std::vector<std::string> names;
  if (config.leak_free) {
    auto train = read_dataset(rec, in / "train.ftc");
    auto val = read_dataset(rec, in / "validation.ftc");
    auto test = read_dataset(rec, in / "test.ftc");
    before = train.class_counts();
    auto balanced = smote_balance_dataset(train, sc);
    after = balanced.class_counts();
    names = balanced.class_names;
    rec.log("leak-free: SMOTE on the training part only, " + counts_line(before) + " -> " +
            counts_line(after));
    rec.write_dataset(out / "train.ftc", balanced);
    rec.write_dataset(out / "validation.ftc", val);
    rec.write_dataset(out / "test.ftc", test);
    DatasetSplits splits{std::move(balanced), std::move(val), std::move(test), {}};
    rec.write(out / "splits.csv", split_manifest_csv(splits));
  } else {
    auto all = read_dataset(rec, in / "all.ftc");
    all.sources = read_sources(in / "sources.txt", all.size());
    if (!all.sources.empty()) rec.input(in / "sources.txt");
    before = all.class_counts();
    auto balanced = smote_balance_dataset(all, sc);
    after = balanced.class_counts();
    names = balanced.class_names;
    rec.log("SMOTE before split, " + counts_line(before) + " -> " + counts_line(after));
    const auto splits = split_dataset(balanced, config.split_spec());
    rec.log("split train/validation/test " + std::to_string(splits.train.size()) + "/" +
            std::to_string(splits.validation.size()) + "/" + std::to_string(splits.test.size()));
    rec.write_dataset(out / "train.ftc", splits.train);
    rec.write_dataset(out / "validation.ftc", splits.validation);
    rec.write_dataset(out / "test.ftc", splits.test);
    rec.write(out / "splits.csv", split_manifest_csv(splits));
  }
  std::string csv = "class,before,after\n";
  for (std::size_t c = 0; c < names.size(); ++c)
    csv += names[c] + "," + std::to_string(before[c]) + "," + std::to_string(after[c]) + "\n";
  rec.write(out / "class_counts.csv", csv);
  return rec.finish();
}

CommandOutcome run_train(const RunConfig& config) {
  config.validate();
  CommandRecord rec(config, "train");
  const auto dir = training_dir(config);
  const auto train = read_dataset(rec, dir / "train.ftc");
  const auto val = read_dataset(rec, dir / "validation.ftc");

  DemnetConfig mc = config.model;
  const auto in = network_input(train.samples.shape());
  mc.input_channels = in[0];
  mc.input_height = in[1];
  mc.input_width = in[2];
  auto model = Model<float>::build(mc, stage_seed(config.seed, seed_offset::kInit));
  rec.log("model with " + std::to_string(model.parameter_count()) + " parameters, input " +
          shape_to_string(model.input_shape()) + ", " + std::to_string(train.size()) +
          " training samples");

  const auto tc = config.train_config();
  const auto history = fit(model, train, val, tc, [&](const EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof(line),
                  "epoch %zu/%zu loss %.4f acc %.4f val_loss %.4f val_acc %.4f", r.epoch,
                  tc.epochs, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy);
    rec.log(line);
  });

  std::string csv = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& r : history) {
    csv += std::to_string(r.epoch) + "," + detail::format_double(r.train_loss) + "," +
           detail::format_double(r.train_accuracy) + "," + detail::format_double(r.val_loss) +
           "," + detail::format_double(r.val_accuracy) + "\n";
  }
  rec.write(config.out_dir / "model.dmnt", serialize_checkpoint(model, config.seed, history.size()));
  rec.write(config.out_dir / "history.csv", csv);
  return rec.finish();
}

CommandOutcome run_evaluate(const RunConfig& config, const EvaluateOptions& options) {
  config.validate();
  CommandRecord rec(config, "evaluate");
  const auto ckpt_path = options.checkpoint.empty() ? config.out_dir / "model.dmnt" : options.checkpoint;
  if (!fs::exists(ckpt_path)) throw IoError("missing checkpoint '" + ckpt_path.string() + "'");
  rec.input(ckpt_path);
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto data_path = training_dir(config) / (split_part_name(options.split) + ".ftc");
  const auto ds = read_dataset(rec, data_path);
  check_compatible(ckpt.model, ds, data_path);

  const auto result = evaluate(ckpt.model, ds, config.train.batch_size);
  const auto cm = confusion_matrix(ds.labels, result.predictions);
  const auto report = compute_metrics(cm);
  std::vector<std::string> abbrev(kClassAbbreviations.begin(), kClassAbbreviations.end());
  if (ds.class_names != default_class_names()) abbrev = ds.class_names;
  const auto table = render_report_table(report, abbrev);
  rec.log("accuracy " + detail::format_double(report.accuracy) + " on " +
          std::to_string(report.total) + " " + options.split + " samples");
  if (report.any_undefined) rec.log("warning: some per-class metrics have a zero denominator");

  rec.write(config.out_dir / "confusion.csv", confusion_csv(cm, ds.class_names));
  rec.write(config.out_dir / "metrics.json", metrics_json(report, cm, ds.class_names));
  rec.write(config.out_dir / "report.txt", table);
  return rec.finish();
}

CommandOutcome run_predict(const RunConfig& config, const PredictOptions& options) {
  config.validate();
  CommandRecord rec(config, "predict");
  const auto ckpt_path = options.checkpoint.empty() ? config.out_dir / "model.dmnt" : options.checkpoint;
  if (!fs::exists(ckpt_path)) throw IoError("missing checkpoint '" + ckpt_path.string() + "'");
  rec.input(ckpt_path);
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto& model = ckpt.model;
  const auto expect = model.input_shape();

  if (options.input.empty()) throw ConfigError("predict needs an input (image directory or .ftc file)");
  if (!fs::exists(options.input)) throw IoError("missing input '" + options.input.string() + "'");

  Tensor samples;
  std::vector<std::string> names;
  std::vector<std::string> class_names = default_class_names();
  if (fs::is_directory(options.input)) {
    if (expect[0] != 1) {
      throw ShapeError("checkpoint expects " + std::to_string(expect[0]) +
                       " input channels; image input is single channel");
    }
    const auto files = list_images(options.input);
    if (files.empty()) throw DataError("no images in '" + options.input.string() + "'");
    for (const auto& f : files) {
      rec.input(f);
      names.push_back(f.filename().string());
    }
    samples = load_images(files, expect[1], expect[2]);
  } else {
    auto ds = read_dataset(rec, options.input);
    check_compatible(model, ds, options.input);
    for (std::size_t i = 0; i < ds.size(); ++i)
      names.push_back(ds.sources.empty() ? "row" + std::to_string(i) : ds.sources[i]);
    class_names = ds.class_names;
    samples = std::move(ds.samples);
  }

  std::string csv = "filename,class\n";
  const std::size_t n = samples.dim(0);
  for (const auto& [lo, hi] : batch_ranges(n, config.train.batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = lo; i < hi; ++i) idx.push_back(i);
    const auto pred = model.predict(gather_rows(samples, idx));
    for (std::size_t i = lo; i < hi; ++i) csv += names[i] + "," + class_names[pred[i - lo]] + "\n";
  }
  rec.log("predicted " + std::to_string(n) + " samples");
  rec.write(config.out_dir / "predictions.csv", csv);
  return rec.finish();
}

}  // namespace demnet
