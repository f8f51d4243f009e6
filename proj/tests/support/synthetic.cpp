#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace demnet::testing {

namespace {

struct Pattern {
  double cycles;   // across the image
  double degrees;  // stripe orientation
};

constexpr std::array<Pattern, 4> kPatterns{{{3.0, 0.0}, {3.0, 90.0}, {7.0, 45.0}, {7.0, 135.0}}};

}  // namespace

GrayImage synthetic_image(std::size_t cls, const SyntheticSpec& spec, RngState& rng) {
  const auto& pat = kPatterns.at(cls);
  const double theta = pat.degrees * std::numbers::pi / 180.0;
  const double phase = 2.0 * std::numbers::pi * rng.uniform();
  const double freq = pat.cycles * (0.9 + 0.2 * rng.uniform());
  GrayImage img{spec.height, spec.width, std::vector<float>(spec.height * spec.width)};
  for (std::size_t y = 0; y < spec.height; ++y) {
    for (std::size_t x = 0; x < spec.width; ++x) {
      const double u = (static_cast<double>(x) * std::cos(theta) + static_cast<double>(y) * std::sin(theta)) /
                       static_cast<double>(spec.width);
      double v = 0.5 + 0.35 * std::sin(2.0 * std::numbers::pi * freq * u + phase);
      v += spec.noise * (2.0 * rng.uniform() - 1.0);
      img.pixels[y * spec.width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return img;
}

LabeledDataset synthetic_dataset(const SyntheticSpec& spec) {
  RngState rng(spec.seed);
  std::size_t n = 0;
  for (auto c : spec.counts) n += c;
  std::vector<float> data;
  data.reserve(n * spec.height * spec.width);
  LabeledDataset ds;
  ds.class_names = default_class_names();
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < spec.counts[c]; ++i) {
      const auto img = synthetic_image(c, spec, rng);
      data.insert(data.end(), img.pixels.begin(), img.pixels.end());
      ds.labels.push_back(c);
    }
  }
  ds.samples = Tensor::from_data({n, 1, spec.height, spec.width}, std::move(data));
  return ds;
}

void write_synthetic_images(const std::filesystem::path& root, const SyntheticSpec& spec) {
  RngState rng(spec.seed);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto dir = root / kClassNames[c];
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < spec.counts[c]; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "img_%04zu.png", i);
      write_png(dir / name, synthetic_image(c, spec, rng));
    }
  }
}

LabeledDataset synthetic_features(const std::array<std::size_t, 4>& counts, std::size_t features,
                                  std::uint64_t seed) {
  RngState rng(seed);
  std::size_t n = 0;
  for (auto c : counts) n += c;
  std::vector<float> data;
  data.reserve(n * features);
  LabeledDataset ds;
  ds.class_names = default_class_names();
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      for (std::size_t f = 0; f < features; ++f)
        data.push_back(static_cast<float>(static_cast<double>(c) + 0.3 * (2.0 * rng.uniform() - 1.0)));
      ds.labels.push_back(c);
    }
  }
  ds.samples = Tensor::from_data({n, features}, std::move(data));
  return ds;
}

}  // namespace demnet::testing
