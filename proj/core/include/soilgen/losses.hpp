#pragma once

#include <cstdint>
#include <vector>

#include "soilgen/tensor.hpp"

namespace soilgen::nn {

// A scalar loss together with its gradient w.r.t. the first argument.
template <typename T>
struct Loss {
  double value = 0.0;
  Tensor<T> grad;
};

inline constexpr double kBceEps = 1e-7;

// Mean absolute difference. The subgradient at a == b is 0.
template <typename T>
Loss<T> loss_l1(const Tensor<T>& a, const Tensor<T>& b);

// Mean of (d_out - target)^2.
template <typename T>
Loss<T> loss_lsgan(const Tensor<T>& d_out, double target);

enum class Reduction {
  mean,        // over every element
  sum_sample,  // summed within a sample, averaged over the batch
};

// Binary cross-entropy with pred clamped to [eps, 1 - eps]. The gradient is
// zero where the clamp is active.
template <typename T>
Loss<T> loss_bce(const Tensor<T>& pred, const Tensor<T>& target, Reduction reduction = Reduction::mean);

// Softmax cross-entropy over channels, averaged over pixels whose label is not
// `ignore`. labels holds one class index per (n, h, w) in row-major order.
template <typename T>
Loss<T> loss_softmax_ce(const Tensor<T>& logits, const std::vector<std::uint8_t>& labels, int ignore = -1);

}  // namespace soilgen::nn
