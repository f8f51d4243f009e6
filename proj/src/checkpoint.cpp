#include "demnet/checkpoint.hpp"

#include "binary_io.hpp"
#include "demnet/errors.hpp"
#include "text_util.hpp"

namespace demnet {

namespace {

constexpr std::string_view kMagic = "DMNT";

void write_tensor(detail::ByteWriter& w, const Tensor& t) {
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
  for (auto d : t.shape()) w.uint<std::uint64_t>(d);
  for (float v : t.data()) w.f32(v);
}

void read_tensor_into(detail::ByteReader& r, Tensor& target, const std::string& name) {
  const auto rank = r.uint<std::uint8_t>();
  Shape shape(rank);
  for (auto& d : shape) d = r.uint<std::uint64_t>();
  if (shape != target.shape()) {
    throw FormatError(FormatErrorKind::kMalformed,
                      "tensor " + name + " has shape " + shape_to_string(shape) +
                          ", configuration expects " + shape_to_string(target.shape()));
  }
  r.need(target.size() * 4);
  for (auto& v : target.data()) v = r.f32();
}

}  // namespace

std::string serialize_checkpoint(const Model<float>& model, std::uint64_t seed,
                                 std::uint64_t epoch) {
  std::string config = model.config().to_text();
  config += "seed=" + std::to_string(seed) + "\n";
  config += "epoch=" + std::to_string(epoch) + "\n";

  detail::ByteWriter w;
  w.bytes(kMagic);
  w.uint<std::uint32_t>(kCheckpointVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
  w.bytes(config);
  for (const auto* p : model.parameters()) write_tensor(w, *p);
  for (const auto* b : model.buffers()) write_tensor(w, *b);
  return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw FormatError(FormatErrorKind::kBadMagic, "not a DMNT checkpoint");
  }
  r.bytes(kMagic.size());
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorKind::kUnsupportedVersion,
                      "checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  const auto config_len = r.uint<std::uint32_t>();
  const std::string text(r.bytes(config_len));

  std::string model_text;
  std::uint64_t seed = 0, epoch = 0;
  bool have_seed = false, have_epoch = false;
  for (const auto& kv : detail::parse_key_values(text)) {
    if (kv.key == "seed") {
      seed = detail::parse_u64(kv.key, kv.value);
      have_seed = true;
    } else if (kv.key == "epoch") {
      epoch = detail::parse_u64(kv.key, kv.value);
      have_epoch = true;
    } else {
      model_text += kv.key + "=" + kv.value + "\n";
    }
  }
  if (!have_seed || !have_epoch) {
    throw FormatError(FormatErrorKind::kMalformed, "config block lacks seed or epoch");
  }

  Checkpoint ck;
  ck.seed = seed;
  ck.epoch = epoch;
  ck.model = Model<float>::build(DemnetConfig::from_text(model_text), seed);
  const auto names = ck.model.parameter_names();
  auto params = ck.model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) read_tensor_into(r, *params[i], names[i]);
  auto buffers = ck.model.buffers();
  for (std::size_t i = 0; i < buffers.size(); ++i)
    read_tensor_into(r, *buffers[i], "buffer " + std::to_string(i));
  if (r.remaining() != 0) {
    throw FormatError(FormatErrorKind::kTrailingData,
                      std::to_string(r.remaining()) + " bytes after the last tensor");
  }
  ck.model.set_mode(Mode::kInfer);
  return ck;
}

void save_checkpoint(const Model<float>& model, const std::filesystem::path& path,
                     std::uint64_t seed, std::uint64_t epoch) {
  detail::write_file(path, serialize_checkpoint(model, seed, epoch));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(detail::read_file(path));
}

}  // namespace demnet
