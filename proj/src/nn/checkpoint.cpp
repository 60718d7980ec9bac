#include "bcr/nn/checkpoint.hpp"

#include "bcr/bytes.hpp"

#include <fstream>
#include <iterator>

namespace bcr::nn {

namespace {

constexpr std::uint32_t kVersion = 1;
// Guards against absurd allocations from corrupted headers.
constexpr std::uint32_t kMaxLayers = 64;

void write_arch(ByteWriter& w, const NetworkArch& arch) {
  w.u32(static_cast<std::uint32_t>(arch.layer_count()));
  for (int s : arch.layer_sizes) w.u32(static_cast<std::uint32_t>(s));
  for (Activation a : arch.activations) w.u8(static_cast<std::uint8_t>(a));
}

NetworkArch read_arch(ByteReader& r) {
  NetworkArch arch;
  const std::uint32_t layers = r.u32();
  if (layers == 0 || layers > kMaxLayers) throw FormatError("implausible layer count");
  for (std::uint32_t i = 0; i <= layers; ++i) {
    const std::uint32_t s = r.u32();
    if (s == 0 || s > (1u << 24)) throw FormatError("implausible layer size");
    arch.layer_sizes.push_back(static_cast<int>(s));
  }
  for (std::uint32_t i = 0; i < layers; ++i) {
    const std::uint8_t tag = r.u8();
    if (tag > 2) throw FormatError("unknown activation tag " + std::to_string(tag));
    arch.activations.push_back(static_cast<Activation>(tag));
  }
  return arch;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const PolicyParameters& params) {
  params.validate();
  ByteWriter w;
  w.raw(std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic)));
  w.u32(kVersion);
  write_arch(w, params.actor_arch);
  write_arch(w, params.critic_arch);
  w.u64(params.actor_weights.size());
  w.u64(params.critic_weights.size());
  for (double v : params.actor_weights) w.f64(v);
  for (double v : params.critic_weights) w.f64(v);
  return w.take();
}

PolicyParameters decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  if (r.raw(sizeof(kCheckpointMagic)) != std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw FormatError("bad checkpoint magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  PolicyParameters p;
  p.version = static_cast<int>(version);
  p.actor_arch = read_arch(r);
  p.critic_arch = read_arch(r);
  const std::uint64_t na = r.u64();
  const std::uint64_t nc = r.u64();
  if (na != p.actor_arch.parameter_count() || nc != p.critic_arch.parameter_count()) {
    throw FormatError("parameter counts disagree with architecture");
  }
  if (r.remaining() != 8 * (na + nc)) throw FormatError("checkpoint payload size mismatch");
  p.actor_weights.resize(na);
  p.critic_weights.resize(nc);
  for (double& v : p.actor_weights) v = r.f64();
  for (double& v : p.critic_weights) v = r.f64();
  try {
    p.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("invalid checkpoint: ") + e.what());
  }
  return p;
}

void write_checkpoint(const std::filesystem::path& path, const PolicyParameters& params) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

PolicyParameters read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace bcr::nn
