#pragma once

#include <filesystem>

#include "soilgen/image.hpp"

namespace soilgen::png {

// 8-bit PNG codec. Stored byte = round(255 * v); decoded value = byte / 255.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);

// Grayscale mask, 0 = clean, 255 = opaque.
SoilingMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const SoilingMask& mask);

// Raw 8-bit codes, no value mapping.
ClassMap read_class_map(const std::filesystem::path& path);
void write_class_map(const std::filesystem::path& path, const ClassMap& map);

struct PngInfo {
  int height = 0;
  int width = 0;
  int channels = 0;
};

// Reads only the header.
PngInfo read_info(const std::filesystem::path& path);

std::uint8_t quantize(float value) noexcept;

}  // namespace soilgen::png
