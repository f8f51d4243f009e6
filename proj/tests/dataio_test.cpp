#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "checks.hpp"
#include "demnet/dataio.hpp"
#include "demnet/errors.hpp"
#include "demnet/model.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace demnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("demnet_dataio_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

GrayImage image(std::size_t h, std::size_t w, std::vector<float> px) { return GrayImage{h, w, std::move(px)}; }

FormatErrorKind kind_of(std::string_view bytes) {
  try {
    parse_feature_container(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("expected FormatError");
  return FormatErrorKind::kMalformed;
}

}  // namespace

TEST_CASE("class table") {
  CHECK(class_index("MildDemented") == 0);
  CHECK(class_index("VeryMildDemented") == 3);
  CHECK_THROWS_AS(class_index("Unknown"), DataError);
}

TEST_CASE("resize keeps constants and corners") {
  const auto c = resize_bilinear(image(5, 7, std::vector<float>(35, 0.25f)), 3, 9);
  CHECK(c.height == 3);
  CHECK(c.width == 9);
  for (float v : c.pixels) CHECK(v == doctest::Approx(0.25f));

  std::vector<float> board(8 * 8);
  std::vector<double> board64(64);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) board[y * 8 + x] = static_cast<float>(board64[y * 8 + x] = (x + y) % 2);
  for (auto [oh, ow] : {std::pair<std::size_t, std::size_t>{5, 5}, {13, 3}, {1, 4}, {16, 16}}) {
    const auto got = resize_bilinear(image(8, 8, board), oh, ow);
    const auto ref = oracle::bilinear(board64, 8, 8, oh, ow);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got.pixels[i] - ref[i]) <= 1e-5);
  }
  const auto same = resize_bilinear(image(8, 8, board), 8, 8);
  CHECK(same.pixels == board);
}

TEST_CASE("png round trip and folder loading order") {
  const auto root = scratch("folders");
  for (std::size_t c = 0; c < 4; ++c) {
    fs::create_directories(root / kClassNames[c]);
    for (int i = 0; i < 2; ++i) {
      const float level = static_cast<float>(c * 2 + i) / 10.0f;
      // Written out of name order on purpose.
      write_png(root / kClassNames[c] / ("f" + std::to_string(1 - i) + ".png"), image(4, 6, std::vector<float>(24, level)));
    }
  }
  const auto ds = load_image_dataset(root, 4, 6);
  REQUIRE(ds.size() == 8);
  CHECK(ds.samples.shape() == Shape{8, 1, 4, 6});
  CHECK(ds.labels == std::vector<std::size_t>{0, 0, 1, 1, 2, 2, 3, 3});
  for (std::size_t n = 0; n < 8; ++n) {
    const float want = static_cast<float>(n % 2 == 0 ? n + 1 : n - 1) / 10.0f;
    CHECK(ds.samples.at({n, 0, 2, 3}) == doctest::Approx(want).epsilon(0.01));
  }
  CHECK(fs::path(ds.sources[0]).filename() == "f0.png");

  // Brightness scaling maps 0 and 255 to the unit interval ends.
  write_png(root / "edge.png", image(1, 2, {0.0f, 1.0f}));
  const auto edge = decode_image(root / "edge.png");
  CHECK(edge.pixels == std::vector<float>{0.0f, 1.0f});

  fs::create_directories(root / "Extra");
  CHECK_THROWS_AS(load_image_dataset(root, 4, 6), DataError);
  CHECK_THROWS_AS(load_image_dataset(root / "missing", 4, 6), IoError);
  fs::remove_all(root);
}

TEST_CASE("undecodable image") {
  const auto root = scratch("broken");
  fs::create_directories(root / "NonDemented");
  std::ofstream(root / "NonDemented" / "x.png") << "not a png";
  CHECK_THROWS_AS(load_image_dataset(root, 4, 4), DataError);
  fs::remove_all(root);
}

TEST_CASE("split sizes and partitions") {
  const auto r = testing::check_split_sizes();
  INFO(r.detail);
  CHECK(r.pass);

  SplitSpec spec;
  CHECK(split_sizes(6400, spec) == std::array<std::size_t, 3>{5120, 640, 640});
  CHECK(split_sizes(7, spec) == std::array<std::size_t, 3>{7, 0, 0});

  std::vector<std::size_t> labels(103);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 4;
  for (bool stratified : {false, true}) {
    spec.stratified = stratified;
    const auto idx = split_indices(labels, 4, spec);
    std::set<std::size_t> all;
    for (const auto* part : {&idx.train, &idx.validation, &idx.test}) all.insert(part->begin(), part->end());
    CHECK(all.size() == labels.size());
    CHECK(idx.train.size() + idx.validation.size() + idx.test.size() == labels.size());
    const auto again = split_indices(labels, 4, spec);
    CHECK(again.train == idx.train);
    CHECK(again.test == idx.test);
    auto other = spec;
    other.seed = spec.seed + 1;
    CHECK(split_indices(labels, 4, other).train != idx.train);
  }
  spec.stratified = false;
  CHECK_THROWS_AS(split_indices(std::vector<std::size_t>(7, 0), 4, spec), DataError);
  spec.train = 0.9;
  CHECK_THROWS_AS(spec.validate(), ValueError);
}

TEST_CASE("split manifest") {
  auto ds = testing::synthetic_features({10, 10, 10, 10}, 3, 1);
  ds.sources.clear();
  for (std::size_t i = 0; i < ds.size(); ++i) ds.sources.push_back("s" + std::to_string(i));
  const auto splits = split_dataset(ds, SplitSpec{});
  const auto csv = split_manifest_csv(splits);
  CHECK(csv.rfind("filename,class,split\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);
  CHECK(splits.test.size() == 4);
}

TEST_CASE("feature container round trip") {
  RngState rng(4);
  LabeledDataset ds;
  ds.samples = Tensor::uniform({4, 3, 2, 2}, rng, -1, 1);
  ds.labels = {3, 0, 2, 1};
  ds.class_names = default_class_names();
  const auto bytes = serialize_feature_container(ds);
  CHECK(bytes.substr(0, 4) == "FTC1");
  CHECK(bytes.size() == 4 + 1 + 1 + 4 * 8 + 48 * 4 + 8 + 4 * 2 + 4 + (4 * 4 + 12 + 16 + 11 + 16));
  const auto back = parse_feature_container(bytes);
  CHECK(bitwise_equal(back.samples, ds.samples));
  CHECK(back.labels == ds.labels);
  CHECK(back.class_names == ds.class_names);
  CHECK(serialize_feature_container(back) == bytes);

  const auto dir = scratch("ftc");
  feature_container_write(ds, dir / "a.ftc");
  CHECK(bitwise_equal(feature_container_read(dir / "a.ftc").samples, ds.samples));
  CHECK_THROWS_AS(feature_container_read(dir / "none.ftc"), IoError);
  fs::remove_all(dir);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK(kind_of(bad) == FormatErrorKind::kBadMagic);
  bad = bytes;
  bad[4] = 7;
  CHECK(kind_of(bad) == FormatErrorKind::kUnknownDtype);
  CHECK(kind_of(std::string_view(bytes).substr(0, 100)) == FormatErrorKind::kTruncated);
  bad = bytes;
  bad[6 + 32 + 192] = 3;
  CHECK(kind_of(bad) == FormatErrorKind::kLabelCountMismatch);
  CHECK(kind_of(bytes + "z") == FormatErrorKind::kTrailingData);
  bad = bytes;
  bad[6 + 32 + 192 + 8] = 9;  // first label outside the class table
  CHECK(kind_of(bad) == FormatErrorKind::kMalformed);
}

TEST_CASE("hybrid feature vectors feed an adaptive model") {
  const auto ds = parse_feature_container(serialize_feature_container(testing::synthetic_features({3, 3, 3, 3}, 2048, 2)));
  CHECK(ds.samples.shape() == Shape{12, 2048});
  DemnetConfig cfg;
  cfg.input_channels = 2048;
  cfg.input_height = cfg.input_width = 1;
  cfg.stem_filters = 4;
  cfg.block_filters = {4};
  cfg.dense_widths = {8, 8, 8};
  cfg.adaptive = true;
  auto m = Model<float>::build(cfg, 1);
  CHECK(m.predict(ds.samples).size() == 12);
}

TEST_CASE("dataset helpers") {
  const auto a = testing::synthetic_features({2, 1, 1, 1}, 3, 1);
  const auto b = testing::synthetic_features({1, 1, 1, 1}, 3, 2);
  const auto c = concatenate({&a, &b});
  CHECK(c.size() == 9);
  CHECK(c.class_counts() == std::vector<std::size_t>{3, 2, 2, 2});
  const auto s = c.subset({8, 0});
  CHECK(s.labels == std::vector<std::size_t>{b.labels[3], a.labels[0]});
  const auto wide = testing::synthetic_features({1, 1, 1, 1}, 4, 3);
  CHECK_THROWS_AS(concatenate({&a, &wide}), DataError);
}
