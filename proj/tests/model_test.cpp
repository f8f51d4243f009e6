#include <cmath>

#include "demnet/checkpoint.hpp"
#include "demnet/errors.hpp"
#include "demnet/model.hpp"
#include "doctest.h"

using namespace demnet;

namespace {

DemnetConfig tiny() {
  DemnetConfig cfg;
  cfg.input_height = cfg.input_width = 8;
  cfg.stem_filters = 4;
  cfg.block_filters = {4, 8};
  cfg.dense_widths = {8, 8, 8};
  return cfg;
}

}  // namespace

TEST_CASE("default shape walk") {
  const auto plan = plan_layers(DemnetConfig{});
  std::vector<std::size_t> pooled;
  for (const auto& d : plan)
    if (d.kind == LayerKind::kMaxPool) pooled.push_back(d.output_shape[1]);
  CHECK(pooled == std::vector<std::size_t>{64, 32, 16, 8, 4});
  for (const auto& d : plan) {
    if (d.name == "dense1") CHECK(d.input_shape == Shape{4096});
    if (d.name == "head") CHECK(d.output_shape == Shape{4});
  }
  // Counts from tests/oracles/shape_walk.py.
  CHECK(Model<float>::build(DemnetConfig{}, 44).parameter_count() == 3351284);
  CHECK(Model<float>::build(tiny(), 44).parameter_count() == 1640);
}

TEST_CASE("stage output feeds the next stage") {
  const auto plan = plan_layers(DemnetConfig{});
  for (std::size_t i = 1; i < plan.size(); ++i) CHECK(plan[i].input_shape == plan[i - 1].output_shape);
}

TEST_CASE("pooling underflow is a build error naming the stage") {
  DemnetConfig cfg;
  cfg.input_height = cfg.input_width = 8;  // stem + 4 blocks = 5 poolings
  try {
    Model<float>::build(cfg, 1);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("block3.pool") != std::string::npos);
  }
  cfg.adaptive = true;
  CHECK_NOTHROW(Model<float>::build(cfg, 1));
}

TEST_CASE("hybrid input from feature vectors") {
  DemnetConfig cfg;
  cfg.input_channels = 2048;
  cfg.input_height = cfg.input_width = 1;
  cfg.stem_filters = 4;
  cfg.block_filters = {4, 4};
  cfg.dense_widths = {8, 8, 8};
  CHECK_THROWS_AS(Model<float>::build(cfg, 1), ShapeError);
  cfg.adaptive = true;
  auto m = Model<float>::build(cfg, 1);
  RngState rng(1);
  const auto vecs = Tensor::uniform({3, 2048}, rng, 0, 1);
  CHECK(m.predict(vecs).size() == 3);
  CHECK(bitwise_equal(m.infer_logits(vecs), m.infer_logits(vecs.reshaped({3, 2048, 1, 1}))));
}

TEST_CASE("config validation") {
  DemnetConfig cfg;
  cfg.kernel = 2;
  CHECK_THROWS_AS(cfg.validate(), ValueError);
  cfg = DemnetConfig{};
  cfg.classes = 3;
  CHECK_THROWS_AS(cfg.validate(), ValueError);
  cfg = DemnetConfig{};
  cfg.dense_widths = {1, 2};
  CHECK_THROWS_AS(cfg.validate(), ValueError);
  cfg = DemnetConfig{};
  CHECK(DemnetConfig::from_text(cfg.to_text()) == cfg);
  CHECK_THROWS_AS(DemnetConfig::from_text(cfg.to_text() + "bogus=1\n"), ConfigError);
}

TEST_CASE("zero parameters give uniform probabilities") {
  auto m = Model<float>::build(tiny(), 1);
  for (auto* p : m.parameters()) p->fill(0.0f);
  m.set_mode(Mode::kInfer);
  const auto out = m.forward(Tensor::zeros({2, 1, 8, 8}));
  for (float p : out.probs.values()) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("forward is deterministic; dropout separates train from infer") {
  auto cfg = tiny();
  cfg.dropout_rates = {0.5, 0.5};
  auto m = Model<float>::build(cfg, 3);
  RngState rng(2);
  const auto x = Tensor::uniform({4, 1, 8, 8}, rng, 0, 1);
  m.set_mode(Mode::kInfer);
  const auto a = m.forward(x).logits;
  const auto b = m.forward(x).logits;
  CHECK(bitwise_equal(a, b));
  CHECK(bitwise_equal(a, m.infer_logits(x)));

  // Over repeated dropout draws train-mode logits differ from the infer-mode ones.
  m.set_mode(Mode::kTrain);
  RngState drop(5);
  std::size_t differing = 0;
  for (int t = 0; t < 10; ++t) {
    const auto tr = m.forward(x, nullptr, &drop).logits;
    differing += bitwise_equal(tr, a) ? 0 : 1;
  }
  CHECK(differing == 10);
  CHECK_THROWS_AS(m.forward(x), ValueError);
}

TEST_CASE("backward contract") {
  auto m = Model<float>::build(tiny(), 4);
  CHECK_THROWS_AS(m.backward(), StaleCacheError);
  m.set_mode(Mode::kTrain);
  RngState rng(3), drop(4);
  const auto x = Tensor::uniform({3, 1, 8, 8}, rng, 0, 1);
  const std::vector<std::size_t> labels{0, 1, 2};
  const auto out = m.forward(x, &labels, &drop);
  const auto zero = m.backward(Tensor::zeros(out.logits.shape()));
  const auto params = m.parameters();
  REQUIRE(zero.size() == params.size());
  for (std::size_t i = 0; i < zero.size(); ++i) {
    CHECK(zero[i].shape() == params[i]->shape());
    for (float v : zero[i].values()) CHECK(v == 0.0f);
  }
  CHECK_THROWS_AS(m.backward(), StaleCacheError);
  CHECK(m.parameter_names().size() == params.size());
}

TEST_CASE("predict") {
  CHECK(argmax_rows(Tensor::from_data({1, 4}, {0, 0, 0, 10})) == std::vector<std::size_t>{3});
  CHECK(argmax_rows(Tensor::from_data({1, 4}, {1, 1, 1, 1})) == std::vector<std::size_t>{0});
  auto m = Model<float>::build(tiny(), 6);
  RngState rng(7);
  for (int t = 0; t < 5; ++t) {
    const auto x = Tensor::uniform({5, 1, 8, 8}, rng, 0, 1);
    m.set_mode(Mode::kInfer);
    CHECK(m.predict(x) == argmax_rows(m.forward(x).probs));
  }
  CHECK_THROWS_AS(m.predict(Tensor::zeros({1, 1, 9, 8})), ShapeError);
}

TEST_CASE("checkpoint round trip") {
  auto cfg = tiny();
  cfg.block_filters = {6, 5};
  auto m = Model<float>::build(cfg, 9);
  RngState rng(8), drop(1);
  const auto x = Tensor::uniform({4, 1, 8, 8}, rng, 0, 1);
  const std::vector<std::size_t> labels{0, 1, 2, 3};
  m.set_mode(Mode::kTrain);
  m.forward(x, &labels, &drop);
  const auto golden = m.infer_logits(x);

  const auto first = serialize_checkpoint(m, 42, 3);
  const auto loaded = parse_checkpoint(first);
  CHECK(loaded.seed == 42);
  CHECK(loaded.epoch == 3);
  CHECK(loaded.model.config() == m.config());
  CHECK(serialize_checkpoint(loaded.model, 42, 3) == first);
  CHECK(bitwise_equal(loaded.model.infer_logits(x), golden));
  const auto pa = m.parameters();
  const auto pb = loaded.model.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(bitwise_equal(*pa[i], *pb[i]));
  const auto ba = m.buffers();
  const auto bb = loaded.model.buffers();
  for (std::size_t i = 0; i < ba.size(); ++i) CHECK(bitwise_equal(*ba[i], *bb[i]));
}

TEST_CASE("checkpoint errors") {
  const auto bytes = serialize_checkpoint(Model<float>::build(tiny(), 1), 42, 0);
  auto kind_of = [](std::string_view b) {
    try {
      parse_checkpoint(b);
    } catch (const FormatError& e) {
      return e.kind();
    }
    FAIL("expected FormatError");
    return FormatErrorKind::kMalformed;
  };
  std::string bad = bytes;
  bad[3] = 'X';
  CHECK(kind_of(bad) == FormatErrorKind::kBadMagic);
  std::string ver = bytes;
  ver[4] = 2;
  CHECK(kind_of(ver) == FormatErrorKind::kUnsupportedVersion);
  CHECK(kind_of(std::string_view(bytes).substr(0, bytes.size() - 1)) == FormatErrorKind::kTruncated);
  CHECK(kind_of(std::string_view(bytes).substr(0, 6)) == FormatErrorKind::kTruncated);
  CHECK(kind_of(bytes + "x") == FormatErrorKind::kTrailingData);
  CHECK_THROWS_AS(load_checkpoint("does/not/exist.dmnt"), IoError);
}

TEST_CASE("64-bit copy agrees with storage precision") {
  auto m = Model<float>::build(tiny(), 2);
  const auto m64 = m.cast<double>();
  RngState rng(5);
  const auto x = Tensor::uniform({2, 1, 8, 8}, rng, 0, 1);
  const auto a = m.infer_logits(x);
  const auto b = m64.infer_logits(x.cast<double>());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-4);
}
