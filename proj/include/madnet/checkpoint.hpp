#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "madnet/network.hpp"

namespace madnet {

// Checkpoint layout, all little-endian:
//   "MADNN1\0"                          7 bytes
//   layer count                         u32
//   per layer: kind, outputs, side, filterSize, stride,
//              drop probability in parts per million, maxout pieces,
//              flags (bit 0: centered input)                          8 x u32
//   per parameterized layer, in layer order: weights then bias        f32 each
//   FNV-1a 64 of every preceding byte   u64

struct Checkpoint {
  NetworkSpec spec;
  NetworkState state;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_checkpoint(const NetworkSpec& spec, const NetworkState& state);
/// Throws DataError on a bad magic, checksum, truncation or inconsistent spec.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec, const NetworkState& state);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rounds every parameter through float32, the precision a checkpoint keeps.
NetworkState round_to_checkpoint_precision(const NetworkState& state);

}  // namespace madnet
