#pragma once

// Low-level forward/backward kernels shared by Network. All tensors are NCHW.

#include <vector>

#include "soilgen/arch.hpp"
#include "soilgen/tensor.hpp"

namespace soilgen::nn::kernels {

// Convolution geometry: input H x W sampled at out_h x out_w positions with
// origin (i * stride - pad_top, j * stride - pad_left).
struct ConvGeometry {
  int kernel = 1;
  int stride = 1;
  int pad_top = 0;
  int pad_left = 0;
  int out_h = 0;
  int out_w = 0;
};

// Zero padding (k-1)/2 before, k/2 after: out = ceil(in / stride).
ConvGeometry same_geometry(int in_h, int in_w, int kernel, int stride);
// No implicit padding (used after an explicit reflection pad).
ConvGeometry valid_geometry(int in_h, int in_w, int kernel, int stride);
// Geometry of the convolution whose adjoint maps in_h x in_w to
// (stride*in_h) x (stride*in_w); out_h/out_w hold the *input* size.
ConvGeometry transposed_geometry(int in_h, int in_w, int kernel, int stride);

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Buffer<T>& weight, const Buffer<T>& bias,
                    int out_channels, const ConvGeometry& g, Tensor<T>& y);

// Accumulates dW/db when the pointers are non-null; dx is overwritten when non-null.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Buffer<T>& weight, int out_channels,
                     const ConvGeometry& g, const Tensor<T>& dy, Tensor<T>* dx,
                     Buffer<T>* dweight, Buffer<T>* dbias);

// weight layout (in_channels, out_channels, k, k).
template <typename T>
void conv_transpose2d_forward(const Tensor<T>& x, const Buffer<T>& weight,
                              const Buffer<T>& bias, int out_channels, const ConvGeometry& g,
                              Tensor<T>& y);

template <typename T>
void conv_transpose2d_backward(const Tensor<T>& x, const Buffer<T>& weight, int out_channels,
                               const ConvGeometry& g, const Tensor<T>& dy, Tensor<T>* dx,
                               Buffer<T>* dweight, Buffer<T>* dbias);

// weight layout (out, in); x is (N, in, 1, 1).
template <typename T>
void dense_forward(const Tensor<T>& x, const Buffer<T>& weight, const Buffer<T>& bias,
                   int out_features, Tensor<T>& y);

template <typename T>
void dense_backward(const Tensor<T>& x, const Buffer<T>& weight, int out_features,
                    const Tensor<T>& dy, Tensor<T>* dx, Buffer<T>* dweight,
                    Buffer<T>* dbias);

template <typename T>
Tensor<T> reflection_pad_forward(const Tensor<T>& x, int pad);
template <typename T>
Tensor<T> reflection_pad_backward(const Tensor<T>& dy, int pad, int in_h, int in_w);

template <typename T>
Tensor<T> upsample_forward(const Tensor<T>& x, int scale);
template <typename T>
Tensor<T> upsample_backward(const Tensor<T>& dy, int scale);

template <typename T>
void activation_forward(arch::Activation act, Tensor<T>& x);
// dy is transformed in place into d(pre-activation), given the activation output y.
template <typename T>
void activation_backward(arch::Activation act, const Tensor<T>& y, Tensor<T>& dy);

// Normalization over groups. Instance norm: one group per (n, c) plane.
// Batch norm: one group per channel spanning the batch.
template <typename T>
struct NormCache {
  Tensor<T> xhat;
  Buffer<T> inv_std;  // one per group
  bool batch_statistics = true;
};

inline constexpr double kNormEps = 1e-5;
inline constexpr double kBatchMomentum = 0.1;

template <typename T>
void instance_norm_forward(const Tensor<T>& x, const Buffer<T>& scale, const Buffer<T>& offset,
                           Tensor<T>& y, NormCache<T>* cache);
template <typename T>
void instance_norm_backward(const NormCache<T>& cache, const Buffer<T>& scale, const Tensor<T>& dy,
                            Tensor<T>& dx, Buffer<T>* dscale, Buffer<T>* doffset);

// Training mode uses batch statistics and, when running stats are given,
// updates them; evaluation mode normalizes with the running statistics.
template <typename T>
void batch_norm_forward(const Tensor<T>& x, const Buffer<T>& scale, const Buffer<T>& offset,
                        Buffer<T>* running_mean, Buffer<T>* running_var, bool training,
                        Tensor<T>& y, NormCache<T>* cache);
template <typename T>
void batch_norm_backward(const NormCache<T>& cache, const Buffer<T>& scale, const Tensor<T>& dy,
                         Tensor<T>& dx, Buffer<T>* dscale, Buffer<T>* doffset);

}  // namespace soilgen::nn::kernels
