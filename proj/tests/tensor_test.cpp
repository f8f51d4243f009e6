#include <cstdint>

#include "demnet/errors.hpp"
#include "demnet/rng.hpp"
#include "demnet/tensor.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace demnet;

TEST_CASE("tensor factories") {
  CHECK(Tensor::zeros({2, 2}).values() == std::vector<float>{0, 0, 0, 0});
  CHECK_THROWS_AS(Tensor::from_data({3}, {1, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({}), ShapeError);

  RngState a(42), b(42);
  const auto x = Tensor::uniform({1000}, a, 0, 1);
  const auto y = Tensor::uniform({1000}, b, 0, 1);
  CHECK(bitwise_equal(x, y));
  CHECK(a.position() == 1000);
}

TEST_CASE("reshape round trip keeps the data") {
  RngState rng(3);
  const auto x = Tensor::uniform({2, 3, 4}, rng, -1, 1);
  const auto back = x.reshaped({6, 4}).reshaped({24}).reshaped({2, 3, 4});
  CHECK(bitwise_equal(x, back));
  CHECK_THROWS_AS(x.reshaped({5, 5}), ShapeError);
}

TEST_CASE("at uses row-major offsets") {
  auto t = Tensor::from_data({2, 3}, {0, 1, 2, 3, 4, 5});
  CHECK(t.at({1, 2}) == 5);
  CHECK(t.at({0, 1}) == 1);
  CHECK_THROWS_AS(t.at({2, 0}), ShapeError);
}

TEST_CASE("matmul") {
  const auto a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  const auto b = Tensor::from_data({2, 2}, {5, 6, 7, 8});
  CHECK(matmul(a, b).values() == std::vector<float>{19, 22, 43, 50});
  CHECK_THROWS_AS(matmul(a, Tensor::zeros({3, 2})), ShapeError);

  RngState rng(8);
  const auto r = Tensor::uniform({5, 3}, rng, -2, 2);
  CHECK(bitwise_equal(matmul(r, identity<float>(3)), r));

  const auto p = Tensor64::uniform({8, 8}, rng, -1, 1);
  const auto q = Tensor64::uniform({8, 8}, rng, -1, 1);
  const auto got = matmul(p, q);
  const auto ref = oracle::naive_matmul(p, q);
  for (std::size_t i = 0; i < 64; ++i) CHECK(std::abs(got[i] - ref[i]) <= 1e-12);

  // (A I) B = A B bitwise.
  const auto lhs = matmul(matmul(p, identity<double>(8)), q);
  CHECK(bitwise_equal(lhs, got));
}

TEST_CASE("transpose") {
  const auto a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(transpose(a).values() == std::vector<float>{1, 4, 2, 5, 3, 6});
  CHECK(transpose(a).shape() == Shape{3, 2});
}

TEST_CASE("prng golden stream for seed 42") {
  // Raw words from tests/oracles/prng_golden.py.
  const std::uint64_t words[8] = {0xBDD732262FEB6E95ULL, 0x28EFE333B266F103ULL, 0x47526757130F9F52ULL,
                                  0x581CE1FF0E4AE394ULL, 0x09BC585A244823F2ULL, 0xDE4431FA3C80DB06ULL,
                                  0x37E9671C45376D5DULL, 0xCCF635EE9E9E2FA4ULL};
  const double golden[8] = {0.7415648787718233, 0.1599103928769201, 0.27860113025513866,
                            0.34419071652363753, 0.03803016854024621, 0.8682280765465323,
                            0.21840519371218436, 0.8006318767135033};
  RngState raw(42);
  for (auto w : words) CHECK(raw.next_u64() == w);
  RngState rng(42);
  const auto v = prng_uniform(rng, 8);
  for (int i = 0; i < 8; ++i) CHECK(v[i] == golden[i]);
}

TEST_CASE("prng contract") {
  RngState rng(7);
  CHECK(prng_uniform(rng, 0).empty());
  CHECK(rng.position() == 0);
  const auto v = prng_uniform(rng, 10000);
  for (double x : v) {
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(rng.position() == 10000);

  // Output depends only on seed and position.
  RngState resumed(7, 5000);
  CHECK(prng_uniform(resumed, 1)[0] == v[5000]);

  RngState s1(123), s2(123);
  CHECK(prng_uniform(s1, 64) == prng_uniform(s2, 64));

  RngState idx(1);
  for (int i = 0; i < 1000; ++i) CHECK(idx.uniform_index(3) < 3);
  CHECK_THROWS_AS(idx.uniform_index(0), ValueError);
}

TEST_CASE("stage seeds") {
  CHECK(stage_seed(42, seed_offset::kSmote) == 42);
  CHECK(stage_seed(42, seed_offset::kSplit) == 43);
  CHECK(stage_seed(42, seed_offset::kInit) == 44);
  CHECK(stage_seed(42, seed_offset::kShuffle) == 45);
  CHECK(stage_seed(42, seed_offset::kDropout) == 46);
}
