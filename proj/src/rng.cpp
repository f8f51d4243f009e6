#include "demnet/rng.hpp"

#include "demnet/errors.hpp"

namespace demnet {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64_mix(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t RngState::next_u64() {
  ++position_;
  return splitmix64_mix(seed_ + position_ * kGolden);
}

double RngState::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t RngState::uniform_index(std::size_t n) {
  if (n == 0) throw ValueError("uniform_index: n must be positive");
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
  return static_cast<std::size_t>(wide >> 64);
}

RngState RngState::derive(std::uint64_t stream_offset) const {
  return RngState(splitmix64_mix(seed_ ^ splitmix64_mix(stream_offset + kGolden)));
}

std::vector<double> prng_uniform(RngState& state, std::size_t count) {
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(state.uniform());
  return out;
}

}  // namespace demnet
