#pragma once

#include <filesystem>

#include "weakclr/network.hpp"

namespace weakclr {

// Checkpoint container, all integers little-endian:
//
//   "WCLRCKPT"              8-byte magic
//   u32 format version      (kCheckpointVersion)
//   u64 architecture hash   (architecture_hash())
//   u64 seed
//   u32 n, n bytes          provenance string
//   u32 tensor count
//   per tensor: u16 name length, name, u32 rank, u32 dims[rank], f32 values
//   u64 FNV-1a checksum of every preceding byte
//
// Identical states serialise to identical bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelState<float>& state, const std::filesystem::path& path);

// Throws Error with code "checksum_error" (truncated or corrupted file),
// "arch_mismatch", "format_error" or "missing_file". Never returns a partially
// filled state.
ModelState<float> load_checkpoint(const std::filesystem::path& path);

} // namespace weakclr
