#include "soilgen/imaging.hpp"

#include <algorithm>
#include <cmath>

namespace soilgen {

std::string to_string(PolygonClass cls) {
  return cls == PolygonClass::opaque ? "opaque" : "transparent";
}

PolygonClass polygon_class_from_string(const std::string& text) {
  if (text == "opaque") return PolygonClass::opaque;
  if (text == "transparent") return PolygonClass::transparent;
  throw InvalidAnnotationError("unknown soiling class '" + text + "'");
}

}  // namespace soilgen

namespace soilgen::imaging {
namespace {

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

void check_factor(int factor) {
  if (factor < 1) throw ParameterError("resampling factor must be >= 1, got " + std::to_string(factor));
}

// Taps for one output coordinate of a 1-D resampler.
struct Taps {
  int index[4];
  double weight[4];
  int count;
};

double cubic_weight(double x) {
  // Keys kernel, a = -0.5.
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

std::vector<Taps> make_taps(int in_size, int out_size, ResampleMode mode) {
  std::vector<Taps> taps(static_cast<std::size_t>(out_size));
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    Taps& t = taps[static_cast<std::size_t>(o)];
    const double src = (o + 0.5) * scale - 0.5;
    switch (mode) {
      case ResampleMode::nearest: {
        t.count = 1;
        t.index[0] = clamp_index(static_cast<int>(std::floor((o + 0.5) * scale)), in_size);
        t.weight[0] = 1.0;
        break;
      }
      case ResampleMode::bilinear: {
        const double base = std::floor(src);
        const double frac = src - base;
        const int i0 = static_cast<int>(base);
        t.count = 2;
        t.index[0] = clamp_index(i0, in_size);
        t.index[1] = clamp_index(i0 + 1, in_size);
        t.weight[0] = 1.0 - frac;
        t.weight[1] = frac;
        break;
      }
      case ResampleMode::bicubic: {
        const double base = std::floor(src);
        const double frac = src - base;
        const int i0 = static_cast<int>(base);
        t.count = 4;
        double sum = 0.0;
        for (int k = 0; k < 4; ++k) {
          t.index[k] = clamp_index(i0 - 1 + k, in_size);
          t.weight[k] = cubic_weight(frac - (k - 1));
          sum += t.weight[k];
        }
        for (int k = 0; k < 4; ++k) t.weight[k] /= sum;
        break;
      }
    }
  }
  return taps;
}

// Separable resampling of a planar double buffer with `channels` interleaved.
std::vector<double> resample(std::span<const float> src, int h, int w, int channels, int out_h,
                             int out_w, ResampleMode mode) {
  const auto row_taps = make_taps(w, out_w, mode);
  const auto col_taps = make_taps(h, out_h, mode);
  std::vector<double> tmp(static_cast<std::size_t>(h) * out_w * channels, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      const Taps& t = row_taps[static_cast<std::size_t>(c)];
      for (int ch = 0; ch < channels; ++ch) {
        double acc = 0.0;
        for (int k = 0; k < t.count; ++k) {
          acc += t.weight[k] * src[(static_cast<std::size_t>(r) * w + t.index[k]) * channels + ch];
        }
        tmp[(static_cast<std::size_t>(r) * out_w + c) * channels + ch] = acc;
      }
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w * channels, 0.0);
  for (int r = 0; r < out_h; ++r) {
    const Taps& t = col_taps[static_cast<std::size_t>(r)];
    for (int c = 0; c < out_w; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        double acc = 0.0;
        for (int k = 0; k < t.count; ++k) {
          acc += t.weight[k] * tmp[(static_cast<std::size_t>(t.index[k]) * out_w + c) * channels + ch];
        }
        out[(static_cast<std::size_t>(r) * out_w + c) * channels + ch] = acc;
      }
    }
  }
  return out;
}

std::vector<double> box_reduce(std::span<const float> src, int h, int w, int channels, int factor) {
  const int out_h = h / factor;
  const int out_w = w / factor;
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w * channels, 0.0);
  const double norm = 1.0 / (static_cast<double>(factor) * factor);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        double acc = 0.0;
        for (int dr = 0; dr < factor; ++dr) {
          for (int dc = 0; dc < factor; ++dc) {
            acc += src[(static_cast<std::size_t>(r * factor + dr) * w + (c * factor + dc)) * channels + ch];
          }
        }
        out[(static_cast<std::size_t>(r) * out_w + c) * channels + ch] = acc * norm;
      }
    }
  }
  return out;
}

// Even-odd crossings of the horizontal line y with every edge of `poly`,
// using the half-open rule (y0 > y) != (y1 > y).
void row_crossings(const Polygon& poly, double y, std::vector<double>& xs) {
  xs.clear();
  const auto& v = poly.vertices;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    const Point2& a = v[i];
    const Point2& b = v[j];
    if ((a.y > y) != (b.y > y)) {
      xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
  }
  std::sort(xs.begin(), xs.end());
}

}  // namespace

nn::Tensor<float> to_network_range(const Image& image) {
  return to_network_range(std::span<const Image>(&image, 1));
}

nn::Tensor<float> to_network_range(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("empty image batch");
  const Image& first = images.front();
  nn::Tensor<float> out(static_cast<int>(images.size()), first.channels(), first.height(), first.width());
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    if (!img.same_shape(first)) throw ShapeError("images in a batch must share dimensions");
    for (int ch = 0; ch < img.channels(); ++ch) {
      for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) {
          out(static_cast<int>(n), ch, r, c) = 2.0f * img.at(r, c, ch) - 1.0f;
        }
      }
    }
  }
  return out;
}

nn::Tensor<float> to_network_range(const SoilingMask& mask) {
  nn::Tensor<float> out(1, 1, mask.height(), mask.width());
  auto src = mask.data();
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = 2.0f * src[i] - 1.0f;
  return out;
}

Image from_network_range(const nn::Tensor<float>& tensor, int sample) {
  if (sample < 0 || sample >= tensor.n()) throw ShapeError("sample index out of range");
  Image img(tensor.h(), tensor.w(), tensor.c());
  for (int ch = 0; ch < tensor.c(); ++ch) {
    for (int r = 0; r < tensor.h(); ++r) {
      for (int c = 0; c < tensor.w(); ++c) {
        img.at(r, c, ch) = std::clamp((tensor(sample, ch, r, c) + 1.0f) * 0.5f, 0.0f, 1.0f);
      }
    }
  }
  return img;
}

nn::Tensor<float> to_tensor(const SoilingMask& mask) {
  return to_tensor(std::span<const SoilingMask>(&mask, 1));
}

nn::Tensor<float> to_tensor(std::span<const SoilingMask> masks) {
  if (masks.empty()) throw ShapeError("empty mask batch");
  const SoilingMask& first = masks.front();
  nn::Tensor<float> out(static_cast<int>(masks.size()), 1, first.height(), first.width());
  for (std::size_t n = 0; n < masks.size(); ++n) {
    if (!masks[n].same_size(first)) throw ShapeError("masks in a batch must share dimensions");
    std::copy(masks[n].data().begin(), masks[n].data().end(), out.sample(static_cast<int>(n)));
  }
  return out;
}

SoilingMask mask_from_tensor(const nn::Tensor<float>& tensor, int sample, int channel) {
  if (sample < 0 || sample >= tensor.n() || channel < 0 || channel >= tensor.c()) {
    throw ShapeError("mask_from_tensor index out of range");
  }
  SoilingMask mask(tensor.h(), tensor.w());
  for (int r = 0; r < tensor.h(); ++r) {
    for (int c = 0; c < tensor.w(); ++c) {
      mask.at(r, c) = std::clamp(tensor(sample, channel, r, c), 0.0f, 1.0f);
    }
  }
  return mask;
}

void validate_polygon(const Polygon& polygon) {
  if (polygon.vertices.size() < 3) {
    throw InvalidAnnotationError("polygon needs at least 3 vertices, got " +
                                 std::to_string(polygon.vertices.size()));
  }
  for (const Point2& p : polygon.vertices) {
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
      throw InvalidAnnotationError("polygon vertex outside the unit square");
    }
  }
}

SoilingMask rasterize(std::span<const Polygon> polygons, int height, int width,
                      const RasterizeOptions& options) {
  for (const Polygon& p : polygons) validate_polygon(p);
  SoilingMask mask(height, width, 0.0f);
  std::vector<double> xs;
  for (const Polygon& poly : polygons) {
    const float value = poly.soiling_class == PolygonClass::opaque ? 1.0f : options.transparent_alpha;
    for (int r = 0; r < height; ++r) {
      const double y = (r + 0.5) / height;
      row_crossings(poly, y, xs);
      // A pixel center px is inside when an odd number of crossings lie
      // strictly to its right, i.e. px in [xs[2i], xs[2i+1]).
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        int c = std::max(0, static_cast<int>(std::floor(xs[k] * width - 0.5)));
        for (; c < width; ++c) {
          const double px = (c + 0.5) / width;
          if (px >= xs[k + 1]) break;
          if (px >= xs[k]) mask.at(r, c) = std::max(mask.at(r, c), value);
        }
      }
    }
  }
  return mask;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0)) throw ParameterError("gaussian sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : taps) v /= sum;
  return taps;
}

SoilingMask gaussian_smooth(const SoilingMask& mask, double sigma) {
  const auto taps = gaussian_kernel(sigma);
  if (taps.size() == 1) return mask;
  const int radius = static_cast<int>(taps.size() / 2);
  const int h = mask.height();
  const int w = mask.width();
  const auto [lo_it, hi_it] = std::minmax_element(mask.data().begin(), mask.data().end());
  const float lo = *lo_it;
  const float hi = *hi_it;

  std::vector<double> tmp(static_cast<std::size_t>(h) * w, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += taps[static_cast<std::size_t>(k + radius)] * mask.at(r, clamp_index(c + k, w));
      }
      tmp[static_cast<std::size_t>(r) * w + c] = acc;
    }
  }
  SoilingMask out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += taps[static_cast<std::size_t>(k + radius)] *
               tmp[static_cast<std::size_t>(clamp_index(r + k, h)) * w + c];
      }
      out.at(r, c) = std::clamp(static_cast<float>(acc), lo, hi);
    }
  }
  return out;
}

Image upscale(const Image& image, int factor, ResampleMode mode) {
  check_factor(factor);
  if (factor == 1) return image;
  const int out_h = image.height() * factor;
  const int out_w = image.width() * factor;
  const auto values = resample(image.data(), image.height(), image.width(), image.channels(), out_h, out_w, mode);
  Image out(out_h, out_w, image.channels());
  auto dst = out.data();
  for (std::size_t i = 0; i < values.size(); ++i) dst[i] = clamp01(values[i]);
  return out;
}

SoilingMask upscale(const SoilingMask& mask, int factor, ResampleMode mode) {
  check_factor(factor);
  if (factor == 1) return mask;
  const int out_h = mask.height() * factor;
  const int out_w = mask.width() * factor;
  const auto values = resample(mask.data(), mask.height(), mask.width(), 1, out_h, out_w, mode);
  SoilingMask out(out_h, out_w);
  auto dst = out.data();
  for (std::size_t i = 0; i < values.size(); ++i) dst[i] = clamp01(values[i]);
  return out;
}

Image downscale(const Image& image, int factor) {
  check_factor(factor);
  if (factor == 1) return image;
  if (image.height() % factor != 0 || image.width() % factor != 0) {
    throw ShapeError("image dimensions not divisible by downscale factor");
  }
  const auto values = box_reduce(image.data(), image.height(), image.width(), image.channels(), factor);
  Image out(image.height() / factor, image.width() / factor, image.channels());
  auto dst = out.data();
  for (std::size_t i = 0; i < values.size(); ++i) dst[i] = clamp01(values[i]);
  return out;
}

SoilingMask downscale(const SoilingMask& mask, int factor) {
  check_factor(factor);
  if (factor == 1) return mask;
  if (mask.height() % factor != 0 || mask.width() % factor != 0) {
    throw ShapeError("mask dimensions not divisible by downscale factor");
  }
  const auto values = box_reduce(mask.data(), mask.height(), mask.width(), 1, factor);
  SoilingMask out(mask.height() / factor, mask.width() / factor);
  auto dst = out.data();
  for (std::size_t i = 0; i < values.size(); ++i) dst[i] = clamp01(values[i]);
  return out;
}

SoilingMask resize(const SoilingMask& mask, int height, int width) {
  if (height == mask.height() && width == mask.width()) return mask;
  const auto values = resample(mask.data(), mask.height(), mask.width(), 1, height, width, ResampleMode::bilinear);
  SoilingMask out(height, width);
  auto dst = out.data();
  for (std::size_t i = 0; i < values.size(); ++i) dst[i] = clamp01(values[i]);
  return out;
}

Image resize(const Image& image, int height, int width) {
  if (height == image.height() && width == image.width()) return image;
  const auto values = resample(image.data(), image.height(), image.width(), image.channels(), height,
                               width, ResampleMode::bilinear);
  Image out(height, width, image.channels());
  auto dst = out.data();
  for (std::size_t i = 0; i < values.size(); ++i) dst[i] = clamp01(values[i]);
  return out;
}

Image blend(const Image& base, const Image& overlay, const SoilingMask& alpha) {
  if (!base.same_shape(overlay)) throw ShapeError("blend: base and overlay differ in shape");
  if (!alpha.same_size(base)) throw ShapeError("blend: alpha does not match image size");
  Image out = base;
  const int channels = base.channels();
  for (int r = 0; r < base.height(); ++r) {
    for (int c = 0; c < base.width(); ++c) {
      const float a = alpha.at(r, c);
      const float keep = 1.0f - a;
      for (int ch = 0; ch < channels; ++ch) {
        const float b = base.at(r, c, ch);
        const float o = overlay.at(r, c, ch);
        // Sum order is symmetric under (base, a) <-> (overlay, 1 - a).
        const float v = keep * b + a * o;
        out.at(r, c, ch) = std::clamp(v, std::min(b, o), std::max(b, o));
      }
    }
  }
  return out;
}

Composite compose(const Image& clean, const Image& soiled, const SoilingMask& mask, int factor,
                  const ComposeOptions& options) {
  check_factor(factor);
  if (!mask.same_size(soiled)) throw ShapeError("compose: mask and soiled image differ in size");
  if (soiled.channels() != clean.channels()) throw ShapeError("compose: channel count mismatch");
  if (clean.height() != soiled.height() * factor || clean.width() != soiled.width() * factor) {
    throw ShapeError("compose: clean image must be factor times the soiled image size");
  }
  Composite out;
  out.annotation = upscale(mask, factor, options.mask_mode);
  const Image upscaled = upscale(soiled, factor, options.image_mode);
  out.image = blend(clean, upscaled, out.annotation);
  return out;
}

SoilingMask binarize(const SoilingMask& mask, float threshold) {
  SoilingMask out(mask.height(), mask.width());
  auto src = mask.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > threshold ? 1.0f : 0.0f;
  return out;
}

Image to_grayscale(const Image& image) {
  if (image.channels() == 1) return image;
  Image out(image.height(), image.width(), 1);
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      out.at(r, c) = clamp01(0.299 * image.at(r, c, 0) + 0.587 * image.at(r, c, 1) + 0.114 * image.at(r, c, 2));
    }
  }
  return out;
}

Image flip_horizontal(const Image& image) {
  Image out = image;
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      for (int ch = 0; ch < image.channels(); ++ch) {
        out.at(r, c, ch) = image.at(r, image.width() - 1 - c, ch);
      }
    }
  }
  return out;
}

SoilingMask flip_horizontal(const SoilingMask& mask) {
  SoilingMask out = mask;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) out.at(r, c) = mask.at(r, mask.width() - 1 - c);
  }
  return out;
}

ClassMap flip_horizontal(const ClassMap& map) {
  ClassMap out = map;
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) out.at(r, c) = map.at(r, map.width() - 1 - c);
  }
  return out;
}

}  // namespace soilgen::imaging
