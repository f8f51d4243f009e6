#include "demnet/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "demnet/errors.hpp"

namespace demnet {

namespace fs = std::filesystem;

std::vector<std::string> default_class_names() {
  return {kClassNames.begin(), kClassNames.end()};
}

std::size_t class_index(std::string_view folder_name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i)
    if (kClassNames[i] == folder_name) return i;
  throw DataError("unknown class folder '" + std::string(folder_name) + "'");
}

// ------------------------------------------------------------ dataset

std::size_t LabeledDataset::sample_size() const {
  if (samples.empty()) return 0;
  return samples.size() / samples.dim(0);
}

void LabeledDataset::validate() const {
  if (labels.empty()) throw DataError("dataset has no samples");
  if (samples.empty() || samples.dim(0) != labels.size()) {
    throw DataError("dataset has " + std::to_string(labels.size()) + " labels but sample tensor " +
                    shape_to_string(samples.shape()));
  }
  if (class_names.empty()) throw DataError("dataset has an empty class table");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_names.size()) {
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                      " does not index the class table");
    }
  }
  if (!sources.empty() && sources.size() != labels.size())
    throw DataError("dataset source list does not match the sample count");
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw DataError("cannot take an empty subset");
  const std::size_t row = sample_size();
  Shape shape = samples.shape();
  shape[0] = indices.size();
  std::vector<float> data(indices.size() * row);
  LabeledDataset out;
  out.class_names = class_names;
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= size()) throw DataError("subset index out of range");
    std::copy_n(samples.raw() + src * row, row, data.data() + i * row);
    out.labels.push_back(labels[src]);
    if (!sources.empty()) out.sources.push_back(sources[src]);
  }
  out.samples = Tensor::from_data(std::move(shape), std::move(data));
  return out;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (auto l : labels)
    if (l < counts.size()) ++counts[l];
  return counts;
}

LabeledDataset concatenate(const std::vector<const LabeledDataset*>& parts) {
  if (parts.empty()) throw DataError("nothing to concatenate");
  LabeledDataset out;
  out.class_names = parts.front()->class_names;
  Shape shape = parts.front()->samples.shape();
  std::vector<float> data;
  std::size_t n = 0;
  bool with_sources = true;
  for (const auto* p : parts) {
    p->validate();
    if (p->class_names != out.class_names) throw DataError("class tables differ");
    Shape s = p->samples.shape();
    s[0] = shape[0];
    if (s != shape) throw DataError("sample shapes differ");
    data.insert(data.end(), p->samples.data().begin(), p->samples.data().end());
    out.labels.insert(out.labels.end(), p->labels.begin(), p->labels.end());
    with_sources = with_sources && !p->sources.empty();
    n += p->size();
  }
  if (with_sources)
    for (const auto* p : parts) out.sources.insert(out.sources.end(), p->sources.begin(), p->sources.end());
  shape[0] = n;
  out.samples = Tensor::from_data(std::move(shape), std::move(data));
  return out;
}

// -------------------------------------------------------------- loading

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

void append_image(std::vector<float>& data, const fs::path& file, std::size_t height,
                  std::size_t width) {
  const GrayImage resized = resize_bilinear(decode_image(file), height, width);
  data.insert(data.end(), resized.pixels.begin(), resized.pixels.end());
}

}  // namespace

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

LabeledDataset load_image_dataset(const fs::path& root, std::size_t height, std::size_t width) {
  if (!fs::is_directory(root)) throw IoError("dataset root '" + root.string() + "' is not a directory");
  std::vector<std::pair<std::size_t, fs::path>> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    class_dirs.emplace_back(class_index(entry.path().filename().string()), entry.path());
  }
  if (class_dirs.empty()) throw DataError("dataset root '" + root.string() + "' has no class folders");
  std::sort(class_dirs.begin(), class_dirs.end());

  LabeledDataset ds;
  ds.class_names = default_class_names();
  std::vector<float> data;
  for (const auto& [label, dir] : class_dirs) {
    for (const auto& file : list_images(dir)) {
      append_image(data, file, height, width);
      ds.labels.push_back(label);
      ds.sources.push_back(dir.filename().string() + "/" + file.filename().string());
    }
  }
  if (ds.labels.empty()) throw DataError("dataset root '" + root.string() + "' contains no images");
  ds.samples = Tensor::from_data({ds.labels.size(), 1, height, width}, std::move(data));
  return ds;
}

Tensor load_images(const std::vector<fs::path>& files, std::size_t height, std::size_t width) {
  if (files.empty()) throw DataError("no images to load");
  std::vector<float> data;
  for (const auto& f : files) append_image(data, f, height, width);
  return Tensor::from_data({files.size(), 1, height, width}, std::move(data));
}

// --------------------------------------------------------------- splits

void SplitSpec::validate() const {
  for (double f : {train, validation, test})
    if (!(f > 0.0 && f < 1.0)) throw ValueError("split fractions must lie in (0, 1)");
  if (std::abs(train + validation + test - 1.0) > 1e-9)
    throw ValueError("split fractions must sum to 1");
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  // Products landing a few ulps below an integer still count as that integer.
  auto part = [n](double f) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9));
  };
  const std::size_t val = part(spec.validation);
  const std::size_t test = part(spec.test);
  return {n - val - test, val, test};
}

void shuffle_indices(std::vector<std::size_t>& indices, RngState& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(indices[i - 1], indices[j]);
  }
}

SplitIndices split_indices(const std::vector<std::size_t>& labels, std::size_t num_classes,
                           const SplitSpec& spec) {
  spec.validate();
  RngState rng(spec.seed);
  SplitIndices out;
  auto partition = [&](std::vector<std::size_t> idx) {
    shuffle_indices(idx, rng);
    const auto sizes = split_sizes(idx.size(), spec);
    auto it = idx.begin();
    out.train.insert(out.train.end(), it, it + static_cast<std::ptrdiff_t>(sizes[0]));
    it += static_cast<std::ptrdiff_t>(sizes[0]);
    out.validation.insert(out.validation.end(), it, it + static_cast<std::ptrdiff_t>(sizes[1]));
    it += static_cast<std::ptrdiff_t>(sizes[1]);
    out.test.insert(out.test.end(), it, idx.end());
  };
  if (spec.stratified) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == c) idx.push_back(i);
      partition(std::move(idx));
    }
  } else {
    std::vector<std::size_t> idx(labels.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    partition(std::move(idx));
  }
  if (out.train.empty()) throw DataError("split leaves the training set empty");
  if (out.validation.empty()) throw DataError("split leaves the validation set empty");
  if (out.test.empty()) throw DataError("split leaves the test set empty");
  return out;
}

DatasetSplits split_dataset(const LabeledDataset& ds, const SplitSpec& spec) {
  ds.validate();
  DatasetSplits out;
  out.indices = split_indices(ds.labels, ds.class_names.size(), spec);
  out.train = ds.subset(out.indices.train);
  out.validation = ds.subset(out.indices.validation);
  out.test = ds.subset(out.indices.test);
  return out;
}

std::string split_manifest_csv(const DatasetSplits& splits) {
  std::string out = "filename,class,split\n";
  auto emit = [&](const LabeledDataset& ds, const char* name) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::string src = ds.sources.empty() ? "row" + std::to_string(i) : ds.sources[i];
      out += src + "," + ds.class_names[ds.labels[i]] + "," + name + "\n";
    }
  };
  emit(splits.train, "train");
  emit(splits.validation, "validation");
  emit(splits.test, "test");
  return out;
}

// ---------------------------------------------------- feature container

namespace {
constexpr std::string_view kContainerMagic = "FTC1";
}

std::string serialize_feature_container(const LabeledDataset& ds) {
  ds.validate();
  detail::ByteWriter w;
  w.bytes(kContainerMagic);
  w.uint<std::uint8_t>(kDtypeFloat32);
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(ds.samples.rank()));
  for (auto d : ds.samples.shape()) w.uint<std::uint64_t>(d);
  for (float v : ds.samples.data()) w.f32(v);
  w.uint<std::uint64_t>(ds.labels.size());
  for (auto l : ds.labels) {
    if (l > 0xFFFF) throw DataError("label does not fit the 16-bit label section");
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(l));
  }
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(ds.class_names.size()));
  for (const auto& name : ds.class_names) {
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
  }
  return w.take();
}

LabeledDataset parse_feature_container(std::string_view bytes) {
  if (bytes.size() < kContainerMagic.size() || bytes.substr(0, kContainerMagic.size()) != kContainerMagic) {
    throw FormatError(FormatErrorKind::kBadMagic, "not an FTC1 feature container");
  }
  detail::ByteReader r(bytes, "feature container");
  r.bytes(kContainerMagic.size());
  const auto dtype = r.uint<std::uint8_t>();
  if (dtype != kDtypeFloat32) {
    throw FormatError(FormatErrorKind::kUnknownDtype, "dtype code " + std::to_string(dtype));
  }
  const auto rank = r.uint<std::uint8_t>();
  if (rank == 0) throw FormatError(FormatErrorKind::kMalformed, "rank 0 tensor");
  Shape shape(rank);
  for (auto& d : shape) {
    d = r.uint<std::uint64_t>();
    if (d == 0) throw FormatError(FormatErrorKind::kMalformed, "zero dimension");
  }
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  r.need(count * 4);
  std::vector<float> data(count);
  for (auto& v : data) v = r.f32();

  LabeledDataset ds;
  const auto label_count = r.uint<std::uint64_t>();
  if (label_count != shape[0]) {
    throw FormatError(FormatErrorKind::kLabelCountMismatch,
                      std::to_string(label_count) + " labels for " + std::to_string(shape[0]) +
                          " samples");
  }
  r.need(label_count * 2);
  ds.labels.resize(label_count);
  for (auto& l : ds.labels) l = r.uint<std::uint16_t>();
  const auto classes = r.uint<std::uint32_t>();
  for (std::uint32_t c = 0; c < classes; ++c) {
    const auto len = r.uint<std::uint32_t>();
    ds.class_names.emplace_back(r.bytes(len));
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatErrorKind::kTrailingData,
                      std::to_string(r.remaining()) + " bytes after the class table");
  }
  for (auto l : ds.labels) {
    if (l >= ds.class_names.size()) {
      throw FormatError(FormatErrorKind::kMalformed,
                        "label " + std::to_string(l) + " does not index the class table");
    }
  }
  ds.samples = Tensor::from_data(std::move(shape), std::move(data));
  return ds;
}

void feature_container_write(const LabeledDataset& ds, const fs::path& path) {
  detail::write_file(path, serialize_feature_container(ds));
}

LabeledDataset feature_container_read(const fs::path& path) {
  return parse_feature_container(detail::read_file(path));
}

}  // namespace demnet
