#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "demnet/tensor.hpp"

namespace demnet {

/// Fixed class table: folder name -> label index.
inline const std::array<std::string, 4> kClassNames{"MildDemented", "ModerateDemented",
                                                    "NonDemented", "VeryMildDemented"};
/// Short names used in reports, same order as kClassNames.
inline const std::array<std::string, 4> kClassAbbreviations{"MID", "MOD", "ND", "VMD"};

std::vector<std::string> default_class_names();

/// Label index of a class folder name, or throws DataError.
std::size_t class_index(std::string_view folder_name);

/// Samples with their labels. `samples` is [N, ...] (images are [N, C, H, W],
/// feature vectors [N, D]); `sources` names where each row came from and is
/// either empty or of length N.
struct LabeledDataset {
  Tensor samples;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;
  std::vector<std::string> sources;

  std::size_t size() const { return labels.size(); }
  /// Elements per sample.
  std::size_t sample_size() const;
  /// Throws DataError if the invariants do not hold.
  void validate() const;
  /// Rows `indices`, in that order.
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
  std::vector<std::size_t> class_counts() const;
};

/// Concatenate datasets that share sample shape and class table.
LabeledDataset concatenate(const std::vector<const LabeledDataset*>& parts);

// ------------------------------------------------------------- images

/// Grayscale image with values in [0, 1], row-major [height, width].
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;
};

/// Decodes PNG or JPEG (by signature) to one channel scaled to [0, 1].
/// Colour inputs are converted to luminance by the decoder.
GrayImage decode_image(const std::filesystem::path& path);

/// 8-bit grayscale PNG; values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const GrayImage& image);

/// Bilinear resize with corner-aligned sampling: output pixel (y, x) samples
/// the source at (y * (H - 1) / (H' - 1), x * (W - 1) / (W' - 1)); an output
/// extent of 1 samples source coordinate 0.
GrayImage resize_bilinear(const GrayImage& image, std::size_t height, std::size_t width);

/// Reads `<root>/<ClassName>/*.png|*.jpg|*.jpeg`. Class folders must be
/// members of the fixed class table; files are visited in lexicographic
/// order of class index, then file name. Each image is decoded, scaled to
/// [0, 1] and resized to `height` x `width`; samples are [N, 1, H, W].
LabeledDataset load_image_dataset(const std::filesystem::path& root, std::size_t height = 128,
                                  std::size_t width = 128);

/// Image files directly inside `dir`, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Loads a flat list of files (no labels) as [N, 1, H, W].
Tensor load_images(const std::vector<std::filesystem::path>& files, std::size_t height,
                   std::size_t width);

// -------------------------------------------------------------- splits

struct SplitSpec {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
  std::uint64_t seed = 43;
  bool stratified = false;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct DatasetSplits {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
  SplitIndices indices;
};

/// Sizes for n items: validation = floor(n * validation), test =
/// floor(n * test), the remainder goes to train.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec);

/// Seeded Fisher-Yates shuffle then partition (train, validation, test).
/// Stratified mode applies the same rule within each class, in class order,
/// and concatenates. Throws DataError if any part would be empty.
SplitIndices split_indices(const std::vector<std::size_t>& labels, std::size_t num_classes,
                           const SplitSpec& spec);

DatasetSplits split_dataset(const LabeledDataset& ds, const SplitSpec& spec);

/// In-place seeded Fisher-Yates shuffle.
void shuffle_indices(std::vector<std::size_t>& indices, RngState& rng);

/// CSV with header `filename,class,split`.
std::string split_manifest_csv(const DatasetSplits& splits);

// ---------------------------------------------------- feature container

/// FeatureContainer layout (all integers little-endian):
///
///   "FTC1"                   4-byte magic
///   u8 dtype                 1 = IEEE-754 float32
///   u8 rank, rank x u64      dimensions; dims[0] is the sample count
///   payload                  row-major, prod(dims) x 4 bytes
///   u64 label count, then that many u16 labels
///   u32 class count, then per class: u32 byte length + UTF-8 name
inline constexpr std::uint8_t kDtypeFloat32 = 1;

std::string serialize_feature_container(const LabeledDataset& ds);
/// Throws FormatError: bad magic, unknown dtype code, truncated payload,
/// label count mismatch, malformed content, trailing data.
LabeledDataset parse_feature_container(std::string_view bytes);

void feature_container_write(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset feature_container_read(const std::filesystem::path& path);

}  // namespace demnet
