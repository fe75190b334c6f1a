#pragma once

#include "rf/core/image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace rf::synth {

// 8-bit RGB PNG; channel values stored as round(255 * clamp(v, 0, 1)).
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<std::uint8_t>& bytes);
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

// "RFD1", width u32, height u32, row-major f32; background is +Inf.
std::vector<std::uint8_t> encode_depth(const Map& depth);
Map decode_depth(const std::vector<std::uint8_t>& bytes);
void write_depth(const std::filesystem::path& path, const Map& depth);
Map read_depth(const std::filesystem::path& path);

} // namespace rf::synth
