#include <cmath>
#include <limits>
#include <numeric>

#include "checks.hpp"
#include "demnet/checkpoint.hpp"
#include "demnet/errors.hpp"
#include "demnet/optim.hpp"
#include "doctest.h"
#include "synthetic.hpp"

using namespace demnet;

namespace {

DemnetConfig small16() {
  DemnetConfig cfg;
  cfg.input_height = cfg.input_width = 16;
  cfg.stem_filters = 4;
  cfg.block_filters = {4, 8};
  cfg.dense_widths = {8, 8, 8};
  return cfg;
}

LabeledDataset toy(std::array<std::size_t, 4> counts, std::uint64_t seed) {
  testing::SyntheticSpec spec;
  spec.counts = counts;
  spec.height = spec.width = 16;
  spec.seed = seed;
  return testing::synthetic_dataset(spec);
}

}  // namespace

TEST_CASE("rmsprop scalar step") {
  const auto r = testing::check_rmsprop_unit();
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("rmsprop zero gradient decays the accumulator only") {
  Tensor64 theta = Tensor64::from_data({2}, {1.0, -2.0});
  auto st = RmsPropState<double>::create(std::vector<const Tensor64*>{&theta});
  st.accumulators[0] = Tensor64::from_data({2}, {0.5, 0.25});
  std::vector<Tensor64*> ps{&theta};
  std::vector<Tensor64> gs{Tensor64::zeros({2})};
  rmsprop_step<double>(ps, gs, st);
  CHECK(theta.values() == std::vector<double>{1.0, -2.0});
  CHECK(st.accumulators[0][0] == doctest::Approx(0.45));
  CHECK(st.accumulators[0][1] == doctest::Approx(0.225));
}

TEST_CASE("rmsprop invariants") {
  RngState rng(3);
  Tensor64 theta = Tensor64::uniform({16}, rng, -1, 1);
  const auto start = theta;
  RmsPropState<double> st;
  std::vector<Tensor64*> ps{&theta};
  const auto g = Tensor64::uniform({16}, rng, -2, 2);
  std::vector<Tensor64> gs{g};
  for (int i = 0; i < 20; ++i) {
    rmsprop_step<double>(ps, gs, st);
    for (double v : st.accumulators[0].values()) CHECK(v >= 0.0);
  }
  for (std::size_t i = 0; i < 16; ++i) {
    if (g[i] > 0) CHECK(theta[i] < start[i]);
    if (g[i] < 0) CHECK(theta[i] > start[i]);
  }
  std::vector<Tensor64> wrong{Tensor64::zeros({15})};
  CHECK_THROWS_AS(rmsprop_step<double>(ps, wrong, st), ShapeError);
  st.rho = 1.0;
  CHECK_THROWS_AS(rmsprop_step<double>(ps, gs, st), ValueError);
}

TEST_CASE("sgd step") {
  Tensor64 theta = Tensor64::filled({1}, 1.0);
  std::vector<Tensor64*> ps{&theta};
  std::vector<Tensor64> gs{Tensor64::filled({1}, 2.0)};
  sgd_step<double>(ps, gs, 0.1);
  CHECK(theta[0] == doctest::Approx(0.8));
}

TEST_CASE("batch ranges fold a single trailing sample") {
  using R = std::vector<std::pair<std::size_t, std::size_t>>;
  CHECK(batch_ranges(10, 4) == R{{0, 4}, {4, 8}, {8, 10}});
  CHECK(batch_ranges(9, 4) == R{{0, 4}, {4, 9}});
  CHECK(batch_ranges(3, 8) == R{{0, 3}});
  CHECK(batch_ranges(1, 8) == R{{0, 1}});
}

TEST_CASE("one epoch on one batch equals the manual composition") {
  const auto ds = toy({2, 2, 2, 2}, 1);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 16;
  tc.seed = 42;
  auto fitted = Model<float>::build(small16(), 44);
  auto manual = fitted;
  fit(fitted, ds, ds, tc);

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngState shuffle(stage_seed(42, seed_offset::kShuffle));
  shuffle_indices(order, shuffle);
  std::vector<std::size_t> labels;
  for (auto i : order) labels.push_back(ds.labels[i]);
  RngState dropout(stage_seed(42, seed_offset::kDropout));
  manual.set_mode(Mode::kTrain);
  manual.forward(gather_rows(ds.samples, order), &labels, &dropout);
  const auto grads = manual.backward();
  RmsPropState<float> st;
  rmsprop_step<float>(manual.parameters(), grads, st);
  manual.set_mode(Mode::kInfer);

  CHECK(serialize_checkpoint(fitted, 42, 1) == serialize_checkpoint(manual, 42, 1));
}

TEST_CASE("fit is deterministic and records every epoch") {
  const auto train = toy({6, 5, 4, 3}, 2);
  const auto val = toy({2, 2, 2, 2}, 3);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 5;
  auto a = Model<float>::build(small16(), 44);
  auto b = a;
  const auto ha = fit(a, train, val, tc);
  const auto hb = fit(b, train, val, tc);
  REQUIRE(ha.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ha[i].epoch == i + 1);
    CHECK(ha[i].train_loss == hb[i].train_loss);
    CHECK(ha[i].val_accuracy == hb[i].val_accuracy);
  }
  CHECK(serialize_checkpoint(a, 42, 3) == serialize_checkpoint(b, 42, 3));
  CHECK(a.mode() == Mode::kInfer);
  // Validation scores are infer-mode scores.
  const auto ev = evaluate(a, val);
  CHECK(ev.accuracy == ha.back().val_accuracy);
  CHECK(ev.loss == ha.back().val_loss);
}

TEST_CASE("fit errors") {
  auto m = Model<float>::build(small16(), 44);
  const auto ds = toy({2, 2, 2, 2}, 4);
  LabeledDataset empty;
  empty.class_names = default_class_names();
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(fit(m, empty, ds, tc), DataError);

  tc.learning_rate = std::numeric_limits<double>::infinity();
  tc.optimizer = OptimizerKind::kSgd;
  tc.batch_size = 4;
  tc.epochs = 3;
  try {
    fit(m, ds, ds, tc);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
  tc = TrainConfig{};
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), ValueError);
}

TEST_CASE("overfit sanity") {
  const auto r = testing::check_overfit_sanity();
  INFO(r.detail);
  CHECK(r.pass);
}
