#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "demnet/model.hpp"

namespace demnet {

/// Checkpoint layout (all integers little-endian):
///
///   "DMNT"                     4-byte magic
///   u32 version                currently 1
///   u32 length, bytes          UTF-8 key=value config block: the model
///                              configuration plus `seed=` and `epoch=`
///   per tensor, in order:      every parameter, then every batch-norm
///                              running mean/variance pair
///     u8 rank
///     rank x u64 dims
///     row-major f32 payload
///
/// The tensor list is implied by the configuration block.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model<float> model;
  std::uint64_t seed = 42;
  std::uint64_t epoch = 0;
};

std::string serialize_checkpoint(const Model<float>& model, std::uint64_t seed,
                                 std::uint64_t epoch);
/// Throws FormatError (bad magic, unsupported version, truncated payload,
/// malformed content, trailing data) or ConfigError for a bad config block.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Model<float>& model, const std::filesystem::path& path,
                     std::uint64_t seed, std::uint64_t epoch);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace demnet
