#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <new>
#include <span>
#include <vector>

#include "soilgen/error.hpp"

namespace soilgen::nn {

// Storage starts on a 64-byte boundary. Eigen peels unaligned heads off its
// vectorized loops, so with malloc alignment results would vary run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

// Dense NCHW tensor. Fully connected activations use shape (N, F, 1, 1).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w, T fill = T{0}) : shape_{n, c, h, w} {
    if (n < 0 || c < 0 || h < 0 || w < 0) throw ShapeError("tensor dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(n) * c * h * w, fill);
  }
  explicit Tensor(std::array<int, 4> shape, T fill = T{0})
      : Tensor(shape[0], shape[1], shape[2], shape[3], fill) {}

  int n() const noexcept { return shape_[0]; }
  int c() const noexcept { return shape_[1]; }
  int h() const noexcept { return shape_[2]; }
  int w() const noexcept { return shape_[3]; }
  const std::array<int, 4>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Elements of one sample, or of one (sample, channel) plane.
  std::size_t sample_size() const noexcept {
    return static_cast<std::size_t>(shape_[1]) * shape_[2] * shape_[3];
  }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(shape_[2]) * shape_[3]; }

  T& operator()(int n, int c, int h, int w) noexcept { return data_[offset(n, c, h, w)]; }
  T operator()(int n, int c, int h, int w) const noexcept { return data_[offset(n, c, h, w)]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  T operator[](std::size_t i) const noexcept { return data_[i]; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T* sample(int n) noexcept { return data_.data() + static_cast<std::size_t>(n) * sample_size(); }
  const T* sample(int n) const noexcept {
    return data_.data() + static_cast<std::size_t>(n) * sample_size();
  }

  Tensor reshaped(std::array<int, 4> shape) const {
    Tensor out = *this;
    out.reshape(shape);
    return out;
  }
  void reshape(std::array<int, 4> shape) {
    const std::size_t count = static_cast<std::size_t>(shape[0]) * shape[1] * shape[2] * shape[3];
    if (count != data_.size()) throw ShapeError("reshape changes element count");
    shape_ = shape;
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(int n, int c, int h, int w) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  std::array<int, 4> shape_{0, 0, 0, 0};
  Buffer<T> data_;
};

}  // namespace soilgen::nn
