#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lfm/model.hpp"

namespace lfm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian binary layout:
///
///   "LFM1" | u32 version | model config | u32 array count |
///   per array: u32 rank, u32 extents[rank], f32 values[] | u32 CRC-32 of all preceding bytes
///
/// Parameters are stored as 32-bit floats in LfmModel::parameters() order.
std::vector<std::uint8_t> encode_checkpoint(const LfmModel& model);
LfmModel decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const LfmModel& model, const std::filesystem::path& path);
LfmModel load_checkpoint(const std::filesystem::path& path);

/// Rounds every parameter through float, as a save/load cycle would.
LfmModel quantize_to_float(const LfmModel& model);

}  // namespace lfm
