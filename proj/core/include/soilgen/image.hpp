#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "soilgen/error.hpp"

namespace soilgen {

// H x W x C raster with interleaved channels and values in [0,1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f)
      : height_(height), width_(width), channels_(channels) {
    if (height <= 0 || width <= 0) throw ShapeError("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw ShapeError("image channel count must be 1 or 3");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int row, int col, int ch = 0) { return data_[index(row, col, ch)]; }
  float at(int row, int col, int ch = 0) const { return data_[index(row, col, ch)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int row, int col, int ch) const noexcept {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// Per-pixel soiling alpha: 0 clean, 1 opaque, in-between semi-transparent.
class SoilingMask {
 public:
  SoilingMask() = default;
  SoilingMask(int height, int width, float fill = 0.0f) : height_(height), width_(width) {
    if (height <= 0 || width <= 0) throw ShapeError("mask dimensions must be positive");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int row, int col) { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  float at(int row, int col) const { return data_[static_cast<std::size_t>(row) * width_ + col]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_size(const SoilingMask& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool same_size(const Image& image) const noexcept {
    return height_ == image.height() && width_ == image.width();
  }
  friend bool operator==(const SoilingMask&, const SoilingMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

// Per-pixel integer class codes (segmentation labels and predictions).
class ClassMap {
 public:
  ClassMap() = default;
  ClassMap(int height, int width, std::uint8_t fill = 0) : height_(height), width_(width) {
    if (height < 0 || width < 0) throw ShapeError("class map dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::uint8_t& at(int row, int col) { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  std::uint8_t at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }

  friend bool operator==(const ClassMap&, const ClassMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

enum class PolygonClass { opaque, transparent };

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

// Weak annotation polygon in normalized image coordinates ([0,1]^2).
struct Polygon {
  std::vector<Point2> vertices;
  PolygonClass soiling_class = PolygonClass::opaque;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

std::string to_string(PolygonClass cls);
PolygonClass polygon_class_from_string(const std::string& text);

}  // namespace soilgen
