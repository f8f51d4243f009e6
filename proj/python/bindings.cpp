#include <map>
#include <optional>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "demnet/checkpoint.hpp"
#include "demnet/dataio.hpp"
#include "demnet/errors.hpp"
#include "demnet/layers.hpp"
#include "demnet/metrics.hpp"
#include "demnet/model.hpp"
#include "demnet/optim.hpp"
#include "demnet/pipeline.hpp"
#include "demnet/rng.hpp"
#include "demnet/run_config.hpp"
#include "demnet/smote.hpp"

namespace py = pybind11;
using namespace demnet;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const F32Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  const float* p = a.data();
  return Tensor::from_data(shape, std::vector<float>(p, p + a.size()));
}

F32Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  F32Array out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

std::vector<std::size_t> to_labels(const py::array_t<std::int64_t, py::array::forcecast>& y) {
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(y.size()));
  const auto* p = y.data();
  for (py::ssize_t i = 0; i < y.size(); ++i) {
    if (p[i] < 0) throw ValueError("negative label at position " + std::to_string(i));
    out.push_back(static_cast<std::size_t>(p[i]));
  }
  return out;
}

py::array_t<std::int64_t> labels_array(const std::vector<std::size_t>& y) {
  py::array_t<std::int64_t> out(static_cast<py::ssize_t>(y.size()));
  auto* p = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) p[i] = static_cast<std::int64_t>(y[i]);
  return out;
}

LabeledDataset make_dataset(const F32Array& x, const py::array_t<std::int64_t, py::array::forcecast>& y,
                            std::vector<std::string> class_names) {
  LabeledDataset ds;
  ds.samples = to_tensor(x);
  ds.labels = to_labels(y);
  ds.class_names = class_names.empty() ? default_class_names() : std::move(class_names);
  ds.validate();
  return ds;
}

DemnetConfig config_from_kwargs(const py::dict& kw) {
  // Keys as in the [model] section, plus input="C,H,W"; lists may be Python sequences.
  RunConfig rc;
  DemnetConfig cfg;
  bool have_input = false;
  for (const auto& item : kw) {
    const auto key = py::str(item.first).cast<std::string>();
    std::string value;
    if (py::isinstance<py::list>(item.second) || py::isinstance<py::tuple>(item.second)) {
      for (const auto& v : item.second) {
        if (!value.empty()) value += ",";
        value += py::str(v).cast<std::string>();
      }
    } else if (py::isinstance<py::bool_>(item.second)) {
      value = item.second.cast<bool>() ? "true" : "false";
    } else {
      value = py::str(item.second).cast<std::string>();
    }
    if (key == "input") {
      std::vector<std::size_t> dims;
      std::size_t start = 0;
      while (start <= value.size()) {
        const auto comma = value.find(',', start);
        const auto part = value.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        dims.push_back(static_cast<std::size_t>(std::stoull(part)));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (dims.size() != 3) throw ConfigError("input: expected C,H,W");
      cfg.input_channels = dims[0];
      cfg.input_height = dims[1];
      cfg.input_width = dims[2];
      have_input = true;
    } else {
      rc.set("model." + key, value);
    }
  }
  DemnetConfig out = rc.model;
  if (have_input) {
    out.input_channels = cfg.input_channels;
    out.input_height = cfg.input_height;
    out.input_width = cfg.input_width;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "DEMNET core: tensors, layers, model, SMOTE, splits, metrics and the pipeline";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ValueError>(m, "ValueError", base.ptr());
  py::register_exception<StaleCacheError>(m, "StaleCacheError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  m.attr("CLASS_NAMES") = default_class_names();

  m.def("prng_uniform", [](std::uint64_t seed, std::size_t count) {
    RngState rng(seed);
    return prng_uniform(rng, count);
  }, py::arg("seed"), py::arg("count"), "First `count` U[0,1) draws of the stream for `seed`.");

  m.def("conv2d", [](const F32Array& x, const F32Array& w, const F32Array& b, std::size_t stride,
                     std::size_t pad) {
    const auto wt = to_tensor(w);
    if (wt.rank() != 4) throw ShapeError("conv2d: weights must be [F, C, kh, kw]");
    ConvSpec spec{wt.dim(0), wt.dim(2), wt.dim(3), stride, pad};
    ConvCache<float> cache;
    return to_array(conv2d_forward(to_tensor(x), wt, to_tensor(b), spec, cache));
  }, py::arg("x"), py::arg("weights"), py::arg("bias"), py::arg("stride") = 1, py::arg("pad") = 1);

  m.def("maxpool", [](const F32Array& x, std::size_t window, std::size_t stride) {
    PoolCache<float> cache;
    return to_array(maxpool_forward(to_tensor(x), PoolSpec{window, stride}, cache));
  }, py::arg("x"), py::arg("window") = 2, py::arg("stride") = 2);

  m.def("relu", [](const F32Array& x) {
    ReluCache<float> cache;
    return to_array(relu_forward(to_tensor(x), cache));
  });

  m.def("softmax", [](const F32Array& logits) { return to_array(softmax(to_tensor(logits))); });

  py::class_<Model<float>>(m, "Model")
      .def(py::init([](std::uint64_t init_seed, py::kwargs kw) {
             return Model<float>::build(config_from_kwargs(kw), init_seed);
           }), py::arg("init_seed") = 44,
           "Keyword arguments follow the configuration keys, e.g. input=\"1,32,32\".")
      .def_property_readonly("parameter_count", &Model<float>::parameter_count)
      .def_property_readonly("input_shape", &Model<float>::input_shape)
      .def_property_readonly("config_text", [](const Model<float>& mdl) { return mdl.config().to_text(); })
      .def("layer_names", [](const Model<float>& mdl) {
        std::vector<std::string> out;
        for (const auto& d : mdl.layers()) out.push_back(d.name);
        return out;
      })
      .def("parameter_names", &Model<float>::parameter_names)
      .def("logits", [](const Model<float>& mdl, const F32Array& x) {
        return to_array(mdl.infer_logits(to_tensor(x)));
      })
      .def("predict_proba", [](const Model<float>& mdl, const F32Array& x) {
        return to_array(softmax(mdl.infer_logits(to_tensor(x))));
      })
      .def("predict", [](const Model<float>& mdl, const F32Array& x) {
        return labels_array(mdl.predict(to_tensor(x)));
      })
      .def("fit", [](Model<float>& mdl, const F32Array& x, const py::array_t<std::int64_t, py::array::forcecast>& y,
                     const F32Array& vx, const py::array_t<std::int64_t, py::array::forcecast>& vy,
                     std::size_t epochs, std::size_t batch_size, double lr, std::uint64_t seed) {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.learning_rate = lr;
        tc.seed = seed;
        const auto history = fit(mdl, make_dataset(x, y, {}), make_dataset(vx, vy, {}), tc);
        py::list out;
        for (const auto& r : history) {
          py::dict d;
          d["epoch"] = r.epoch;
          d["train_loss"] = r.train_loss;
          d["train_acc"] = r.train_accuracy;
          d["val_loss"] = r.val_loss;
          d["val_acc"] = r.val_accuracy;
          out.append(d);
        }
        return out;
      }, py::arg("x"), py::arg("y"), py::arg("val_x"), py::arg("val_y"), py::arg("epochs") = 1,
         py::arg("batch_size") = 128, py::arg("lr") = 1e-3, py::arg("seed") = 42)
      .def("save", [](const Model<float>& mdl, const std::filesystem::path& p, std::uint64_t seed,
                      std::uint64_t epoch) { save_checkpoint(mdl, p, seed, epoch); },
           py::arg("path"), py::arg("seed") = 42, py::arg("epoch") = 0)
      .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p).model; });

  m.def("smote", [](const F32Array& x, const py::array_t<std::int64_t, py::array::forcecast>& y,
                    std::size_t k, std::uint64_t seed, std::optional<std::size_t> target,
                    bool replicate) {
    auto ds = make_dataset(x, y, {});
    SmoteConfig sc{k, target, seed, replicate};
    std::vector<SmoteWitness> witnesses;
    auto out = smote_balance_dataset(ds, sc, &witnesses);
    py::list w;
    for (const auto& s : witnesses) w.append(py::make_tuple(s.row, s.base, s.neighbor, s.lambda));
    return py::make_tuple(to_array(out.samples), labels_array(out.labels), w);
  }, py::arg("x"), py::arg("y"), py::arg("k") = 5, py::arg("seed") = 42,
     py::arg("target") = py::none(), py::arg("replicate") = false,
     "Returns (x, y, witnesses); each witness is (row, base, neighbor, lambda).");

  m.def("split_indices", [](const py::array_t<std::int64_t, py::array::forcecast>& y, double train,
                            double validation, double test, std::uint64_t seed, bool stratified) {
    SplitSpec spec{train, validation, test, seed, stratified};
    const auto s = split_indices(to_labels(y), kNumClasses, spec);
    return py::make_tuple(labels_array(s.train), labels_array(s.validation), labels_array(s.test));
  }, py::arg("y"), py::arg("train") = 0.8, py::arg("validation") = 0.1, py::arg("test") = 0.1,
     py::arg("seed") = 43, py::arg("stratified") = false);

  m.def("split_sizes", [](std::size_t n, double train, double validation, double test) {
    SplitSpec spec{train, validation, test, 0, false};
    const auto s = split_sizes(n, spec);
    return py::make_tuple(s[0], s[1], s[2]);
  }, py::arg("n"), py::arg("train") = 0.8, py::arg("validation") = 0.1, py::arg("test") = 0.1);

  m.def("metrics", [](const py::array_t<std::int64_t, py::array::forcecast>& y_true,
                      const py::array_t<std::int64_t, py::array::forcecast>& y_pred) {
    const auto cm = confusion_matrix(to_labels(y_true), to_labels(y_pred));
    const auto r = compute_metrics(cm);
    py::dict d;
    d["accuracy"] = r.accuracy;
    d["confusion"] = cm.counts;
    py::list classes;
    for (const auto& c : r.per_class) {
      py::dict e;
      e["precision"] = c.precision;
      e["recall"] = c.recall;
      e["f1"] = c.f1;
      e["binary_accuracy"] = c.binary_accuracy;
      e["support"] = c.support;
      e["undefined"] = c.undefined;
      classes.append(e);
    }
    d["classes"] = classes;
    return d;
  }, py::arg("y_true"), py::arg("y_pred"));

  m.def("write_features", [](const std::filesystem::path& p, const F32Array& x,
                             const py::array_t<std::int64_t, py::array::forcecast>& y,
                             std::vector<std::string> class_names) {
    feature_container_write(make_dataset(x, y, std::move(class_names)), p);
  }, py::arg("path"), py::arg("x"), py::arg("y"), py::arg("class_names") = std::vector<std::string>{});

  m.def("read_features", [](const std::filesystem::path& p) {
    const auto ds = feature_container_read(p);
    return py::make_tuple(to_array(ds.samples), labels_array(ds.labels), ds.class_names);
  }, py::arg("path"), "Returns (x, y, class_names).");

  m.def("run", [](const std::string& command, const std::string& config_text,
                  const std::map<std::string, std::string>& overrides,
                  const std::optional<std::filesystem::path>& checkpoint_arg,
                  const std::string& split,
                  const std::optional<std::filesystem::path>& input_arg) {
    // Optional rather than defaulted paths: an empty path round-trips through
    // pathlib as ".".
    const auto checkpoint = checkpoint_arg.value_or(std::filesystem::path{});
    const auto input = input_arg.value_or(std::filesystem::path{});
    std::vector<std::pair<std::string, std::string>> ov(overrides.begin(), overrides.end());
    const auto cfg = load_config(config_text, ov);
    CommandOutcome outcome;
    if (command == "prepare") {
      outcome = run_prepare(cfg);
    } else if (command == "balance") {
      outcome = run_balance(cfg);
    } else if (command == "train") {
      outcome = run_train(cfg);
    } else if (command == "evaluate") {
      outcome = run_evaluate(cfg, EvaluateOptions{checkpoint, split});
    } else if (command == "predict") {
      outcome = run_predict(cfg, PredictOptions{checkpoint, input});
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }
    std::vector<std::string> files;
    for (const auto& p : outcome.outputs) files.push_back(p.string());
    return files;
  }, py::arg("command"), py::arg("config_text") = "",
     py::arg("overrides") = std::map<std::string, std::string>{},
     py::arg("checkpoint") = py::none(), py::arg("split") = "test",
     py::arg("input") = py::none(),
     "Runs one pipeline command; overrides are fully qualified keys such as train.epochs.");

  m.def("sha256_hex", [](py::bytes b) { return sha256_hex(std::string(b)); });
}
