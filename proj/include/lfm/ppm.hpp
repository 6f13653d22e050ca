#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lfm/tensor.hpp"

namespace lfm {

/// Binary PPM (P6, maxval 255) <-> [3 x H x W] tensors with values in [0, 1].
/// Decoding scales bytes by 1/255; encoding rounds to the nearest level.
Tensor decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const Tensor& image);

Tensor load_ppm(const std::filesystem::path& path);
void save_ppm(const Tensor& image, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace lfm
