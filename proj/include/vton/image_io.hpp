#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vton/types.hpp"

namespace vton {

/// 8-bit PNG in any color type, converted to RGB in [0,1].
RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);
std::vector<std::uint8_t> encode_png(const RgbImage& image);
RgbImage decode_png(const std::vector<std::uint8_t>& bytes);

/// Single-channel mask PNG: values >= 128 read as set; written as 0/255.
GrayMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const GrayMask& mask);

}  // namespace vton
