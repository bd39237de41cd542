#include "soilgen/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "soilgen/error.hpp"

namespace soilgen::nn {

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": operand shapes differ");
  if (a.empty()) throw ShapeError(std::string(what) + ": empty operands");
}

}  // namespace

template <typename T>
Loss<T> loss_l1(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "loss_l1");
  Loss<T> out{0.0, Tensor<T>(a.shape())};
  const double inv = 1.0 / static_cast<double>(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += std::abs(d);
    out.grad[i] = static_cast<T>(d > 0 ? inv : (d < 0 ? -inv : 0.0));
  }
  out.value = sum * inv;
  return out;
}

template <typename T>
Loss<T> loss_lsgan(const Tensor<T>& d_out, double target) {
  if (d_out.empty()) throw ShapeError("loss_lsgan: empty discriminator output");
  Loss<T> out{0.0, Tensor<T>(d_out.shape())};
  const double inv = 1.0 / static_cast<double>(d_out.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < d_out.size(); ++i) {
    const double d = static_cast<double>(d_out[i]) - target;
    sum += d * d;
    out.grad[i] = static_cast<T>(2.0 * d * inv);
  }
  out.value = sum * inv;
  return out;
}

template <typename T>
Loss<T> loss_bce(const Tensor<T>& pred, const Tensor<T>& target, Reduction reduction) {
  require_same_shape(pred, target, "loss_bce");
  Loss<T> out{0.0, Tensor<T>(pred.shape())};
  const double inv = reduction == Reduction::mean ? 1.0 / static_cast<double>(pred.size())
                                                  : 1.0 / static_cast<double>(pred.n());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double raw = static_cast<double>(pred[i]);
    const double p = std::clamp(raw, kBceEps, 1.0 - kBceEps);
    const double t = static_cast<double>(target[i]);
    sum -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    const bool clamped = raw <= kBceEps || raw >= 1.0 - kBceEps;
    out.grad[i] = clamped ? T{0} : static_cast<T>((p - t) / (p * (1.0 - p)) * inv);
  }
  out.value = sum * inv;
  return out;
}

template <typename T>
Loss<T> loss_softmax_ce(const Tensor<T>& logits, const std::vector<std::uint8_t>& labels, int ignore) {
  const int n = logits.n(), k = logits.c(), h = logits.h(), w = logits.w();
  const std::size_t plane = logits.plane_size();
  if (labels.size() != static_cast<std::size_t>(n) * plane) {
    throw ShapeError("loss_softmax_ce: label count does not match logits");
  }
  if (k < 2) throw ShapeError("loss_softmax_ce: need at least two classes");
  Loss<T> out{0.0, Tensor<T>(logits.shape())};
  std::size_t counted = 0;
  for (std::uint8_t l : labels) {
    if (l != ignore) {
      if (l >= k) throw ShapeError("loss_softmax_ce: label " + std::to_string(l) + " out of range");
      ++counted;
    }
  }
  if (counted == 0) return out;
  const double inv = 1.0 / static_cast<double>(counted);
  std::vector<double> prob(k);
  double sum = 0.0;
  for (int s = 0; s < n; ++s) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int label = labels[static_cast<std::size_t>(s) * plane + y * w + x];
        if (label == ignore) continue;
        double mx = -INFINITY;
        for (int c = 0; c < k; ++c) mx = std::max(mx, static_cast<double>(logits(s, c, y, x)));
        double z = 0.0;
        for (int c = 0; c < k; ++c) {
          prob[c] = std::exp(static_cast<double>(logits(s, c, y, x)) - mx);
          z += prob[c];
        }
        sum -= static_cast<double>(logits(s, label, y, x)) - mx - std::log(z);
        for (int c = 0; c < k; ++c) {
          out.grad(s, c, y, x) = static_cast<T>((prob[c] / z - (c == label ? 1.0 : 0.0)) * inv);
        }
      }
    }
  }
  out.value = sum * inv;
  return out;
}

#define SOILGEN_INSTANTIATE(T)                                                                \
  template Loss<T> loss_l1<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Loss<T> loss_lsgan<T>(const Tensor<T>&, double);                                    \
  template Loss<T> loss_bce<T>(const Tensor<T>&, const Tensor<T>&, Reduction);                 \
  template Loss<T> loss_softmax_ce<T>(const Tensor<T>&, const std::vector<std::uint8_t>&, int);
SOILGEN_INSTANTIATE(float)
SOILGEN_INSTANTIATE(double)
#undef SOILGEN_INSTANTIATE

}  // namespace soilgen::nn
