#include "../common/binary_io.hpp"
#include "factoreeg/error.hpp"
#include "factoreeg/net.hpp"

namespace factoreeg {

namespace {

constexpr std::string_view kMagic = "FBCICKPT";

}  // namespace

// Layout after magic and version: eight u64 geometry fields, dropout_p as f64,
// u32 tensor count, then per tensor: u32 name length, name, u32 rank, u64
// extents, f64 data. All little-endian.
void save_checkpoint(const FactorModel& model, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  const NetConfig& c = model.config;
  for (std::size_t v : {c.n_eeg_channels, c.n_timesamples, c.n_classes, c.n_feature_maps,
                        c.temporal_kernel, c.spatial_kernel, c.pool_kernel, c.pool_stride}) {
    w.put<std::uint64_t>(v);
  }
  w.put<double>(c.dropout_p);

  const auto params = model.named_parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t->rank()));
    for (std::size_t e : t->shape) w.put<std::uint64_t>(e);
    for (double v : t->data) w.put<double>(v);
  }
  w.write_file(path);
}

FactorModel load_checkpoint(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  if (r.remaining() < kMagic.size() || r.get_bytes(kMagic.size()) != kMagic) {
    throw MagicMismatchError(path.string() + ": not a checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw MalformedHeaderError(path.string() + ": unsupported checkpoint version " +
                               std::to_string(version));
  }
  NetConfig c;
  for (std::size_t* field : {&c.n_eeg_channels, &c.n_timesamples, &c.n_classes, &c.n_feature_maps,
                             &c.temporal_kernel, &c.spatial_kernel, &c.pool_kernel, &c.pool_stride}) {
    *field = static_cast<std::size_t>(r.get<std::uint64_t>());
  }
  c.dropout_p = r.get<double>();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw MalformedHeaderError(path.string() + ": " + e.what());
  }

  // Build a skeleton with the right shapes, then overwrite from the file.
  FactorModel model = build_model(c, 0);
  const auto expected = model.named_parameters();
  const auto count = r.get<std::uint32_t>();
  if (count != expected.size()) {
    throw MalformedHeaderError(path.string() + ": expected " + std::to_string(expected.size()) +
                               " tensors, header says " + std::to_string(count));
  }
  for (const auto& [name, target] : expected) {
    const auto name_len = r.get<std::uint32_t>();
    const std::string got = r.get_bytes(name_len);
    if (got != name) {
      throw MalformedHeaderError(path.string() + ": expected tensor '" + name + "', found '" + got + "'");
    }
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(r.get<std::uint64_t>());
    if (shape != target->shape) {
      throw MalformedHeaderError(path.string() + ": tensor '" + name + "' has shape " +
                                 shape_str(shape) + ", config implies " + shape_str(target->shape));
    }
    auto* dst = const_cast<Tensor*>(target);
    for (double& v : dst->data) v = r.get<double>();
  }
  if (r.remaining() != 0) {
    throw MalformedHeaderError(path.string() + ": trailing bytes after last tensor");
  }
  return model;
}

}  // namespace factoreeg
