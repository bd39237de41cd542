#include "soilgen/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

namespace soilgen::png {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct Raw {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> bytes;
};

struct ErrorSlot {
  char message[256] = {};
};

// libpng reports fatal errors by longjmp; the message is parked in the
// struct's error pointer and rethrown as an exception after setjmp returns.
[[noreturn]] void png_error_handler(png_structp png, png_const_charp message) {
  auto* slot = static_cast<ErrorSlot*>(png_get_error_ptr(png));
  if (slot) std::snprintf(slot->message, sizeof(slot->message), "%s", message);
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

Raw read_raw(const std::filesystem::path& path, bool header_only) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw FormatError("cannot open PNG '" + path.string() + "'");
  png_byte signature[8] = {};
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw FormatError("not a PNG file: '" + path.string() + "'");
  }
  ErrorSlot slot;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &slot, png_error_handler, png_warning_handler);
  if (!png) throw FormatError("png: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("png: cannot allocate info struct");
  }
  Raw raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: " + std::string(slot.message) + " in '" + path.string() + "'");
  }
  {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.channels = static_cast<int>(png_get_channels(png, info));
    if (!header_only) {
      const std::size_t stride = png_get_rowbytes(png, info);
      raw.bytes.resize(stride * static_cast<std::size_t>(raw.height));
      rows.resize(static_cast<std::size_t>(raw.height));
      for (int r = 0; r < raw.height; ++r) rows[static_cast<std::size_t>(r)] = raw.bytes.data() + stride * r;
      png_read_image(png, rows.data());
      png_read_end(png, nullptr);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

void write_raw(const std::filesystem::path& path, int height, int width, int channels,
               const std::vector<std::uint8_t>& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  FilePtr file(std::fopen(tmp.c_str(), "wb"));
  if (!file) throw WriteError("cannot open '" + tmp.string() + "' for writing");
  ErrorSlot slot;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &slot, png_error_handler, png_warning_handler);
  if (!png) throw WriteError("png: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw WriteError("png: cannot allocate info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    file.reset();
    std::filesystem::remove(tmp, ec);
    throw WriteError("png: " + std::string(slot.message) + " in '" + path.string() + "'");
  }
  {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    for (int r = 0; r < height; ++r) {
      png_write_row(png, const_cast<png_bytep>(bytes.data() + stride * r));
    }
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  const bool flushed = std::fflush(file.get()) == 0;
  file.reset();
  if (!flushed) {
    std::filesystem::remove(tmp, ec);
    throw WriteError("failed to flush '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw WriteError("cannot rename into '" + path.string() + "'");
  }
}

}  // namespace

std::uint8_t quantize(float value) noexcept {
  const float v = std::clamp(value, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(255.0f * v));
}

PngInfo read_info(const std::filesystem::path& path) {
  const Raw raw = read_raw(path, true);
  return {raw.height, raw.width, raw.channels};
}

Image read_image(const std::filesystem::path& path) {
  const Raw raw = read_raw(path, false);
  if (raw.channels != 1 && raw.channels != 3) throw FormatError("unsupported PNG channel layout");
  Image img(raw.height, raw.width, raw.channels);
  auto dst = img.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = raw.bytes[i] / 255.0f;
  return img;
}

void write_image(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> bytes(image.size());
  auto src = image.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize(src[i]);
  write_raw(path, image.height(), image.width(), image.channels(), bytes);
}

SoilingMask read_mask(const std::filesystem::path& path) {
  const Raw raw = read_raw(path, false);
  if (raw.channels != 1) throw FormatError("mask PNG must be single-channel: '" + path.string() + "'");
  SoilingMask mask(raw.height, raw.width);
  auto dst = mask.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = raw.bytes[i] / 255.0f;
  return mask;
}

void write_mask(const std::filesystem::path& path, const SoilingMask& mask) {
  std::vector<std::uint8_t> bytes(mask.size());
  auto src = mask.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize(src[i]);
  write_raw(path, mask.height(), mask.width(), 1, bytes);
}

ClassMap read_class_map(const std::filesystem::path& path) {
  const Raw raw = read_raw(path, false);
  if (raw.channels != 1) throw FormatError("label PNG must be single-channel: '" + path.string() + "'");
  ClassMap map(raw.height, raw.width);
  std::copy(raw.bytes.begin(), raw.bytes.end(), map.data().begin());
  return map;
}

void write_class_map(const std::filesystem::path& path, const ClassMap& map) {
  std::vector<std::uint8_t> bytes(map.data().begin(), map.data().end());
  write_raw(path, map.height(), map.width(), 1, bytes);
}

}  // namespace soilgen::png
