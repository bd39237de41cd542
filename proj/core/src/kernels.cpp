#include "kernels.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>

namespace soilgen::nn::kernels {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// cols is (C*k*k, out_h*out_w), row-major.
template <typename T>
void im2col(const T* img, int channels, int h, int w, const ConvGeometry& g, T* cols) {
  const int k = g.kernel;
  const int positions = g.out_h * g.out_w;
  for (int c = 0; c < channels; ++c) {
    const T* plane = img + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = cols + static_cast<std::size_t>((c * k + ki) * k + kj) * positions;
        for (int i = 0; i < g.out_h; ++i) {
          const int y = i * g.stride - g.pad_top + ki;
          T* dst = row + static_cast<std::size_t>(i) * g.out_w;
          if (y < 0 || y >= h) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(y) * w;
          for (int j = 0; j < g.out_w; ++j) {
            const int x = j * g.stride - g.pad_left + kj;
            dst[j] = (x >= 0 && x < w) ? src[x] : T{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col; accumulates into img.
template <typename T>
void col2im(const T* cols, int channels, int h, int w, const ConvGeometry& g, T* img) {
  const int k = g.kernel;
  const int positions = g.out_h * g.out_w;
  for (int c = 0; c < channels; ++c) {
    T* plane = img + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = cols + static_cast<std::size_t>((c * k + ki) * k + kj) * positions;
        for (int i = 0; i < g.out_h; ++i) {
          const int y = i * g.stride - g.pad_top + ki;
          if (y < 0 || y >= h) continue;
          T* dst = plane + static_cast<std::size_t>(y) * w;
          const T* src = row + static_cast<std::size_t>(i) * g.out_w;
          for (int j = 0; j < g.out_w; ++j) {
            const int x = j * g.stride - g.pad_left + kj;
            if (x >= 0 && x < w) dst[x] += src[j];
          }
        }
      }
    }
  }
}

template <typename T>
T clamp_open_unit(T v) {
  constexpr T lo = std::numeric_limits<T>::denorm_min();
  const T hi = std::nextafter(T{1}, T{0});
  return std::clamp(v, lo, hi);
}

template <typename T>
T clamp_open_sym(T v) {
  const T hi = std::nextafter(T{1}, T{0});
  return std::clamp(v, -hi, hi);
}

}  // namespace

ConvGeometry same_geometry(int in_h, int in_w, int kernel, int stride) {
  ConvGeometry g;
  g.kernel = kernel;
  g.stride = stride;
  g.pad_top = (kernel - 1) / 2;
  g.pad_left = (kernel - 1) / 2;
  g.out_h = (in_h + stride - 1) / stride;
  g.out_w = (in_w + stride - 1) / stride;
  return g;
}

ConvGeometry valid_geometry(int in_h, int in_w, int kernel, int stride) {
  if (in_h < kernel || in_w < kernel) throw ShapeError("convolution input smaller than its kernel");
  ConvGeometry g;
  g.kernel = kernel;
  g.stride = stride;
  g.out_h = (in_h - kernel) / stride + 1;
  g.out_w = (in_w - kernel) / stride + 1;
  return g;
}

ConvGeometry transposed_geometry(int in_h, int in_w, int kernel, int stride) {
  if (kernel < stride) throw ShapeError("transposed convolution needs kernel >= stride");
  ConvGeometry g;
  g.kernel = kernel;
  g.stride = stride;
  g.pad_top = (kernel - stride + 1) / 2;
  g.pad_left = g.pad_top;
  g.out_h = in_h;
  g.out_w = in_w;
  return g;
}

template <typename T>
void conv2d_forward(const Tensor<T>& x, const Buffer<T>& weight, const Buffer<T>& bias,
                    int out_channels, const ConvGeometry& g, Tensor<T>& y) {
  const int n = x.n(), c = x.c(), h = x.h(), w = x.w();
  const int ckk = c * g.kernel * g.kernel;
  const int positions = g.out_h * g.out_w;
  y = Tensor<T>(n, out_channels, g.out_h, g.out_w);
  Buffer<T> cols(static_cast<std::size_t>(ckk) * positions);
  ConstMatMap<T> wmat(weight.data(), out_channels, ckk);
  for (int s = 0; s < n; ++s) {
    im2col(x.sample(s), c, h, w, g, cols.data());
    ConstMatMap<T> cmat(cols.data(), ckk, positions);
    MatMap<T> ymat(y.sample(s), out_channels, positions);
    ymat.noalias() = wmat * cmat;
    for (int o = 0; o < out_channels; ++o) ymat.row(o).array() += bias[static_cast<std::size_t>(o)];
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Buffer<T>& weight, int out_channels,
                     const ConvGeometry& g, const Tensor<T>& dy, Tensor<T>* dx,
                     Buffer<T>* dweight, Buffer<T>* dbias) {
  const int n = x.n(), c = x.c(), h = x.h(), w = x.w();
  const int ckk = c * g.kernel * g.kernel;
  const int positions = g.out_h * g.out_w;
  Buffer<T> cols(static_cast<std::size_t>(ckk) * positions);
  Buffer<T> dcols(static_cast<std::size_t>(ckk) * positions);
  ConstMatMap<T> wmat(weight.data(), out_channels, ckk);
  if (dx) *dx = Tensor<T>(x.shape());
  for (int s = 0; s < n; ++s) {
    ConstMatMap<T> dymat(dy.sample(s), out_channels, positions);
    if (dweight) {
      im2col(x.sample(s), c, h, w, g, cols.data());
      ConstMatMap<T> cmat(cols.data(), ckk, positions);
      MatMap<T> dw(dweight->data(), out_channels, ckk);
      dw.noalias() += dymat * cmat.transpose();
    }
    if (dbias) {
      for (int o = 0; o < out_channels; ++o) (*dbias)[static_cast<std::size_t>(o)] += dymat.row(o).sum();
    }
    if (dx) {
      MatMap<T> dcmat(dcols.data(), ckk, positions);
      dcmat.noalias() = wmat.transpose() * dymat;
      col2im(dcols.data(), c, h, w, g, dx->sample(s));
    }
  }
}

template <typename T>
void conv_transpose2d_forward(const Tensor<T>& x, const Buffer<T>& weight,
                              const Buffer<T>& bias, int out_channels, const ConvGeometry& g,
                              Tensor<T>& y) {
  const int n = x.n(), c = x.c();
  const int positions = x.h() * x.w();
  const int okk = out_channels * g.kernel * g.kernel;
  const int out_h = x.h() * g.stride;
  const int out_w = x.w() * g.stride;
  y = Tensor<T>(n, out_channels, out_h, out_w);
  Buffer<T> cols(static_cast<std::size_t>(okk) * positions);
  ConstMatMap<T> wmat(weight.data(), c, okk);
  for (int s = 0; s < n; ++s) {
    ConstMatMap<T> xmat(x.sample(s), c, positions);
    MatMap<T> cmat(cols.data(), okk, positions);
    cmat.noalias() = wmat.transpose() * xmat;
    col2im(cols.data(), out_channels, out_h, out_w, g, y.sample(s));
    MatMap<T> ymat(y.sample(s), out_channels, out_h * out_w);
    for (int o = 0; o < out_channels; ++o) ymat.row(o).array() += bias[static_cast<std::size_t>(o)];
  }
}

template <typename T>
void conv_transpose2d_backward(const Tensor<T>& x, const Buffer<T>& weight, int out_channels,
                               const ConvGeometry& g, const Tensor<T>& dy, Tensor<T>* dx,
                               Buffer<T>* dweight, Buffer<T>* dbias) {
  const int n = x.n(), c = x.c();
  const int positions = x.h() * x.w();
  const int okk = out_channels * g.kernel * g.kernel;
  Buffer<T> dcols(static_cast<std::size_t>(okk) * positions);
  ConstMatMap<T> wmat(weight.data(), c, okk);
  if (dx) *dx = Tensor<T>(x.shape());
  for (int s = 0; s < n; ++s) {
    im2col(dy.sample(s), out_channels, dy.h(), dy.w(), g, dcols.data());
    ConstMatMap<T> dcmat(dcols.data(), okk, positions);
    if (dweight) {
      ConstMatMap<T> xmat(x.sample(s), c, positions);
      MatMap<T> dw(dweight->data(), c, okk);
      dw.noalias() += xmat * dcmat.transpose();
    }
    if (dbias) {
      ConstMatMap<T> dymat(dy.sample(s), out_channels, dy.h() * dy.w());
      for (int o = 0; o < out_channels; ++o) (*dbias)[static_cast<std::size_t>(o)] += dymat.row(o).sum();
    }
    if (dx) {
      MatMap<T> dxmat(dx->sample(s), c, positions);
      dxmat.noalias() = wmat * dcmat;
    }
  }
}

template <typename T>
void dense_forward(const Tensor<T>& x, const Buffer<T>& weight, const Buffer<T>& bias,
                   int out_features, Tensor<T>& y) {
  const int n = x.n();
  const int in = static_cast<int>(x.sample_size());
  y = Tensor<T>(n, out_features, 1, 1);
  ConstMatMap<T> xmat(x.data(), n, in);
  ConstMatMap<T> wmat(weight.data(), out_features, in);
  MatMap<T> ymat(y.data(), n, out_features);
  ymat.noalias() = xmat * wmat.transpose();
  for (int s = 0; s < n; ++s) {
    for (int o = 0; o < out_features; ++o) ymat(s, o) += bias[static_cast<std::size_t>(o)];
  }
}

template <typename T>
void dense_backward(const Tensor<T>& x, const Buffer<T>& weight, int out_features,
                    const Tensor<T>& dy, Tensor<T>* dx, Buffer<T>* dweight,
                    Buffer<T>* dbias) {
  const int n = x.n();
  const int in = static_cast<int>(x.sample_size());
  ConstMatMap<T> xmat(x.data(), n, in);
  ConstMatMap<T> wmat(weight.data(), out_features, in);
  ConstMatMap<T> dymat(dy.data(), n, out_features);
  if (dweight) {
    MatMap<T> dw(dweight->data(), out_features, in);
    dw.noalias() += dymat.transpose() * xmat;
  }
  if (dbias) {
    for (int o = 0; o < out_features; ++o) (*dbias)[static_cast<std::size_t>(o)] += dymat.col(o).sum();
  }
  if (dx) {
    *dx = Tensor<T>(x.shape());
    MatMap<T> dxmat(dx->data(), n, in);
    dxmat.noalias() = dymat * wmat;
  }
}

namespace {
int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}
}  // namespace

template <typename T>
Tensor<T> reflection_pad_forward(const Tensor<T>& x, int pad) {
  if (pad >= x.h() || pad >= x.w()) throw ShapeError("reflection pad must be smaller than the input");
  Tensor<T> y(x.n(), x.c(), x.h() + 2 * pad, x.w() + 2 * pad);
  for (int s = 0; s < x.n(); ++s) {
    for (int c = 0; c < x.c(); ++c) {
      for (int i = 0; i < y.h(); ++i) {
        const int si = reflect(i - pad, x.h());
        for (int j = 0; j < y.w(); ++j) y(s, c, i, j) = x(s, c, si, reflect(j - pad, x.w()));
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> reflection_pad_backward(const Tensor<T>& dy, int pad, int in_h, int in_w) {
  Tensor<T> dx(dy.n(), dy.c(), in_h, in_w);
  for (int s = 0; s < dy.n(); ++s) {
    for (int c = 0; c < dy.c(); ++c) {
      for (int i = 0; i < dy.h(); ++i) {
        const int si = reflect(i - pad, in_h);
        for (int j = 0; j < dy.w(); ++j) dx(s, c, si, reflect(j - pad, in_w)) += dy(s, c, i, j);
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> upsample_forward(const Tensor<T>& x, int scale) {
  Tensor<T> y(x.n(), x.c(), x.h() * scale, x.w() * scale);
  for (int s = 0; s < x.n(); ++s) {
    for (int c = 0; c < x.c(); ++c) {
      for (int i = 0; i < y.h(); ++i) {
        for (int j = 0; j < y.w(); ++j) y(s, c, i, j) = x(s, c, i / scale, j / scale);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample_backward(const Tensor<T>& dy, int scale) {
  Tensor<T> dx(dy.n(), dy.c(), dy.h() / scale, dy.w() / scale);
  for (int s = 0; s < dy.n(); ++s) {
    for (int c = 0; c < dy.c(); ++c) {
      for (int i = 0; i < dy.h(); ++i) {
        for (int j = 0; j < dy.w(); ++j) dx(s, c, i / scale, j / scale) += dy(s, c, i, j);
      }
    }
  }
  return dx;
}

template <typename T>
void activation_forward(arch::Activation act, Tensor<T>& x) {
  const T slope = static_cast<T>(arch::kLeakySlope);
  switch (act) {
    case arch::Activation::none:
      return;
    case arch::Activation::relu:
      for (T& v : x.values()) v = v > T{0} ? v : T{0};
      return;
    case arch::Activation::leaky_relu:
      for (T& v : x.values()) v = v > T{0} ? v : slope * v;
      return;
    case arch::Activation::tanh:
      for (T& v : x.values()) v = clamp_open_sym(std::tanh(v));
      return;
    case arch::Activation::sigmoid:
      for (T& v : x.values()) v = clamp_open_unit(T{1} / (T{1} + std::exp(-v)));
      return;
  }
}

template <typename T>
void activation_backward(arch::Activation act, const Tensor<T>& y, Tensor<T>& dy) {
  const T slope = static_cast<T>(arch::kLeakySlope);
  auto out = y.values();
  auto grad = dy.values();
  switch (act) {
    case arch::Activation::none:
      return;
    case arch::Activation::relu:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = out[i] > T{0} ? grad[i] : T{0};
      return;
    case arch::Activation::leaky_relu:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = out[i] > T{0} ? grad[i] : slope * grad[i];
      return;
    case arch::Activation::tanh:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= T{1} - out[i] * out[i];
      return;
    case arch::Activation::sigmoid:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= out[i] * (T{1} - out[i]);
      return;
  }
}

template <typename T>
void instance_norm_forward(const Tensor<T>& x, const Buffer<T>& scale, const Buffer<T>& offset,
                           Tensor<T>& y, NormCache<T>* cache) {
  const int n = x.n(), c = x.c();
  const std::size_t m = x.plane_size();
  y = Tensor<T>(x.shape());
  if (cache) {
    cache->xhat = Tensor<T>(x.shape());
    cache->inv_std.assign(static_cast<std::size_t>(n) * c, T{0});
    cache->batch_statistics = true;
  }
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * m;
      double mean = 0.0;
      for (std::size_t i = 0; i < m; ++i) mean += x[base + i];
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = x[base + i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(m);
      const double inv = 1.0 / std::sqrt(var + kNormEps);
      const T g = scale[static_cast<std::size_t>(ch)];
      const T b = offset[static_cast<std::size_t>(ch)];
      for (std::size_t i = 0; i < m; ++i) {
        const T xh = static_cast<T>((x[base + i] - mean) * inv);
        y[base + i] = g * xh + b;
        if (cache) cache->xhat[base + i] = xh;
      }
      if (cache) cache->inv_std[static_cast<std::size_t>(s) * c + ch] = static_cast<T>(inv);
    }
  }
}

template <typename T>
void instance_norm_backward(const NormCache<T>& cache, const Buffer<T>& scale, const Tensor<T>& dy,
                            Tensor<T>& dx, Buffer<T>* dscale, Buffer<T>* doffset) {
  const int n = dy.n(), c = dy.c();
  const std::size_t m = dy.plane_size();
  dx = Tensor<T>(dy.shape());
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * m;
      const T g = scale[static_cast<std::size_t>(ch)];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        sum_dy += dy[base + i];
        sum_dy_xhat += static_cast<double>(dy[base + i]) * cache.xhat[base + i];
      }
      if (dscale) (*dscale)[static_cast<std::size_t>(ch)] += static_cast<T>(sum_dy_xhat);
      if (doffset) (*doffset)[static_cast<std::size_t>(ch)] += static_cast<T>(sum_dy);
      const double inv = cache.inv_std[static_cast<std::size_t>(s) * c + ch];
      const double md = static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        const double dxhat = static_cast<double>(dy[base + i]) * g;
        dx[base + i] = static_cast<T>(inv / md *
                                      (md * dxhat - g * sum_dy - cache.xhat[base + i] * g * sum_dy_xhat));
      }
    }
  }
}

template <typename T>
void batch_norm_forward(const Tensor<T>& x, const Buffer<T>& scale, const Buffer<T>& offset,
                        Buffer<T>* running_mean, Buffer<T>* running_var, bool training,
                        Tensor<T>& y, NormCache<T>* cache) {
  const int n = x.n(), c = x.c();
  const std::size_t m = x.plane_size();
  const double count = static_cast<double>(m) * n;
  y = Tensor<T>(x.shape());
  if (cache) {
    cache->xhat = Tensor<T>(x.shape());
    cache->inv_std.assign(static_cast<std::size_t>(c), T{0});
    cache->batch_statistics = training;
  }
  for (int ch = 0; ch < c; ++ch) {
    double mean = 0.0, var = 0.0;
    if (training) {
      for (int s = 0; s < n; ++s) {
        const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * m;
        for (std::size_t i = 0; i < m; ++i) mean += x[base + i];
      }
      mean /= count;
      for (int s = 0; s < n; ++s) {
        const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * m;
        for (std::size_t i = 0; i < m; ++i) {
          const double d = x[base + i] - mean;
          var += d * d;
        }
      }
      var /= count;
      if (running_mean && running_var) {
        const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
        auto& rm = (*running_mean)[static_cast<std::size_t>(ch)];
        auto& rv = (*running_var)[static_cast<std::size_t>(ch)];
        rm = static_cast<T>((1.0 - kBatchMomentum) * rm + kBatchMomentum * mean);
        rv = static_cast<T>((1.0 - kBatchMomentum) * rv + kBatchMomentum * unbiased);
      }
    } else {
      mean = (*running_mean)[static_cast<std::size_t>(ch)];
      var = (*running_var)[static_cast<std::size_t>(ch)];
    }
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    const T g = scale[static_cast<std::size_t>(ch)];
    const T b = offset[static_cast<std::size_t>(ch)];
    for (int s = 0; s < n; ++s) {
      const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * m;
      for (std::size_t i = 0; i < m; ++i) {
        const T xh = static_cast<T>((x[base + i] - mean) * inv);
        y[base + i] = g * xh + b;
        if (cache) cache->xhat[base + i] = xh;
      }
    }
    if (cache) cache->inv_std[static_cast<std::size_t>(ch)] = static_cast<T>(inv);
  }
}

template <typename T>
void batch_norm_backward(const NormCache<T>& cache, const Buffer<T>& scale, const Tensor<T>& dy,
                         Tensor<T>& dx, Buffer<T>* dscale, Buffer<T>* doffset) {
  const int n = dy.n(), c = dy.c();
  const std::size_t m = dy.plane_size();
  const double count = static_cast<double>(m) * n;
  dx = Tensor<T>(dy.shape());
  for (int ch = 0; ch < c; ++ch) {
    const T g = scale[static_cast<std::size_t>(ch)];
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int s = 0; s < n; ++s) {
      const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * m;
      for (std::size_t i = 0; i < m; ++i) {
        sum_dy += dy[base + i];
        sum_dy_xhat += static_cast<double>(dy[base + i]) * cache.xhat[base + i];
      }
    }
    if (dscale) (*dscale)[static_cast<std::size_t>(ch)] += static_cast<T>(sum_dy_xhat);
    if (doffset) (*doffset)[static_cast<std::size_t>(ch)] += static_cast<T>(sum_dy);
    const double inv = cache.inv_std[static_cast<std::size_t>(ch)];
    for (int s = 0; s < n; ++s) {
      const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * m;
      for (std::size_t i = 0; i < m; ++i) {
        const double dxhat = static_cast<double>(dy[base + i]) * g;
        if (cache.batch_statistics) {
          dx[base + i] = static_cast<T>(inv / count *
                                        (count * dxhat - g * sum_dy - cache.xhat[base + i] * g * sum_dy_xhat));
        } else {
          dx[base + i] = static_cast<T>(dxhat * inv);
        }
      }
    }
  }
}

#define SOILGEN_INSTANTIATE_KERNELS(T)                                                                   \
  template void conv2d_forward<T>(const Tensor<T>&, const Buffer<T>&, const Buffer<T>&, int,   \
                                  const ConvGeometry&, Tensor<T>&);                                      \
  template void conv2d_backward<T>(const Tensor<T>&, const Buffer<T>&, int, const ConvGeometry&,    \
                                   const Tensor<T>&, Tensor<T>*, Buffer<T>*, Buffer<T>*);      \
  template void conv_transpose2d_forward<T>(const Tensor<T>&, const Buffer<T>&,                     \
                                            const Buffer<T>&, int, const ConvGeometry&, Tensor<T>&); \
  template void conv_transpose2d_backward<T>(const Tensor<T>&, const Buffer<T>&, int,               \
                                             const ConvGeometry&, const Tensor<T>&, Tensor<T>*,          \
                                             Buffer<T>*, Buffer<T>*);                          \
  template void dense_forward<T>(const Tensor<T>&, const Buffer<T>&, const Buffer<T>&, int,    \
                                 Tensor<T>&);                                                            \
  template void dense_backward<T>(const Tensor<T>&, const Buffer<T>&, int, const Tensor<T>&,        \
                                  Tensor<T>*, Buffer<T>*, Buffer<T>*);                         \
  template Tensor<T> reflection_pad_forward<T>(const Tensor<T>&, int);                                   \
  template Tensor<T> reflection_pad_backward<T>(const Tensor<T>&, int, int, int);                        \
  template Tensor<T> upsample_forward<T>(const Tensor<T>&, int);                                         \
  template Tensor<T> upsample_backward<T>(const Tensor<T>&, int);                                        \
  template void activation_forward<T>(arch::Activation, Tensor<T>&);                                     \
  template void activation_backward<T>(arch::Activation, const Tensor<T>&, Tensor<T>&);                  \
  template void instance_norm_forward<T>(const Tensor<T>&, const Buffer<T>&, const Buffer<T>&, \
                                         Tensor<T>&, NormCache<T>*);                                     \
  template void instance_norm_backward<T>(const NormCache<T>&, const Buffer<T>&, const Tensor<T>&,  \
                                          Tensor<T>&, Buffer<T>*, Buffer<T>*);                 \
  template void batch_norm_forward<T>(const Tensor<T>&, const Buffer<T>&, const Buffer<T>&,    \
                                      Buffer<T>*, Buffer<T>*, bool, Tensor<T>&, NormCache<T>*); \
  template void batch_norm_backward<T>(const NormCache<T>&, const Buffer<T>&, const Tensor<T>&,     \
                                       Tensor<T>&, Buffer<T>*, Buffer<T>*);

SOILGEN_INSTANTIATE_KERNELS(float)
SOILGEN_INSTANTIATE_KERNELS(double)

#undef SOILGEN_INSTANTIATE_KERNELS

}  // namespace soilgen::nn::kernels
