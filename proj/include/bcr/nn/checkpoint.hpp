#pragma once

// Checkpoint file layout (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "BCRCKPT\0"
//   8       4     u32 format version (currently 1)
//   12      ...   actor arch:  u32 L, (L+1) x u32 layer sizes, L x u8 activation tags
//   ...     ...   critic arch: same encoding
//   ...     8     u64 actor parameter count  Na
//   ...     8     u64 critic parameter count Nc
//   ...     8*Na  f64 actor parameters (IEEE-754 binary64, little-endian)
//   ...     8*Nc  f64 critic parameters
//
// Activation tags: 0 identity, 1 tanh, 2 relu.

#include "bcr/nn/network.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bcr::nn {

inline constexpr char kCheckpointMagic[8] = {'B', 'C', 'R', 'C', 'K', 'P', 'T', '\0'};

std::vector<std::uint8_t> encode_checkpoint(const PolicyParameters& params);
// Throws FormatError on bad magic, unsupported version, truncation or
// parameter counts that disagree with the arch.
PolicyParameters decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const PolicyParameters& params);
PolicyParameters read_checkpoint(const std::filesystem::path& path);

}  // namespace bcr::nn
