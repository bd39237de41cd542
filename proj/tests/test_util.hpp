#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "soilgen/image.hpp"

namespace testutil {

inline soilgen::Image random_image(int h, int w, int channels, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  soilgen::Image img(h, w, channels);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

// Values k/256 so that 1 - m is exact in float.
inline soilgen::SoilingMask random_dyadic_mask(int h, int w, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> k(0, 256);
  soilgen::SoilingMask m(h, w);
  for (auto& v : m.data()) v = static_cast<float>(k(rng)) / 256.0f;
  return m;
}

inline soilgen::SoilingMask random_mask(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  soilgen::SoilingMask m(h, w);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

inline soilgen::ClassMap random_classes(int h, int w, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> k(0, classes - 1);
  soilgen::ClassMap m(h, w);
  for (auto& v : m.data()) v = static_cast<std::uint8_t>(k(rng));
  return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("soilgen_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
