#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "soilgen/dataset.hpp"
#include "soilgen/error.hpp"
#include "soilgen/imaging.hpp"
#include "soilgen/seed.hpp"

namespace soilgen::dataset {

using namespace imaging;

void validate(const ProceduralSceneSpec& s) {
  auto fail = [](const std::string& what) { throw ParameterError("procedural spec: " + what); };
  if (s.height < 8 || s.width < 8) fail("image size must be at least 8x8");
  if (!(0.0 < s.horizon_min && s.horizon_min <= s.horizon_max && s.horizon_max < 1.0)) fail("horizon range");
  if (!(s.noise_amplitude >= 0.0 && s.noise_amplitude <= 0.5)) fail("noise_amplitude must lie in [0, 0.5]");
  if (s.min_shapes < 0 || s.max_shapes < s.min_shapes) fail("shape count range");
  if (!(0.0 < s.min_shape_size && s.min_shape_size <= s.max_shape_size && s.max_shape_size <= 1.0)) {
    fail("shape size range");
  }
  if (s.min_blobs < 0 || s.max_blobs < s.min_blobs) fail("blob count range");
  if (!(0.0 < s.min_blob_radius && s.min_blob_radius <= s.max_blob_radius && s.max_blob_radius <= 0.5)) {
    fail("blob radius range");
  }
  if (!(s.transparent_fraction >= 0.0 && s.transparent_fraction <= 1.0)) fail("transparent_fraction");
  if (!(s.transparent_alpha > 0.0 && s.transparent_alpha < 1.0)) fail("transparent_alpha must lie in (0, 1)");
  if (!(s.soil_sigma >= 0.0)) fail("soil_sigma must be non-negative");
}

std::string digest(const ProceduralSceneSpec& s) {
  std::ostringstream os;
  os.precision(17);
  os << "blob_radius=" << s.min_blob_radius << ":" << s.max_blob_radius << "\n"
     << "blobs=" << s.min_blobs << ":" << s.max_blobs << "\n"
     << "horizon=" << s.horizon_min << ":" << s.horizon_max << "\n"
     << "noise=" << s.noise_amplitude << "\n"
     << "seed=" << s.seed << "\n"
     << "shape_size=" << s.min_shape_size << ":" << s.max_shape_size << "\n"
     << "shapes=" << s.min_shapes << ":" << s.max_shapes << "\n"
     << "size=" << s.height << "x" << s.width << "\n"
     << "soil_sigma=" << s.soil_sigma << "\n"
     << "transparent=" << s.transparent_fraction << ":" << s.transparent_alpha << "\n";
  return hex_digest(fnv1a64(os.str()));
}

std::string procedural_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d", index);
  return buf;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

void render_scene(const ProceduralSceneSpec& s, Rng& rng, Image& img, ClassMap& labels) {
  const int h = s.height, w = s.width;
  const double horizon = uniform(rng, s.horizon_min, s.horizon_max) * h;
  const double sky_top[3] = {uniform(rng, 0.3, 0.5), uniform(rng, 0.5, 0.7), uniform(rng, 0.8, 0.95)};
  const double sky_low[3] = {0.85, 0.87, 0.9};
  const double road = uniform(rng, 0.3, 0.45);
  const double tint = uniform(rng, -0.03, 0.03);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (r + 0.5 < horizon) {
        const double t = (r + 0.5) / horizon;
        for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = clamp01(sky_top[ch] + (sky_low[ch] - sky_top[ch]) * t);
        labels.at(r, c) = kBackground;
      } else {
        const double depth = (r + 0.5 - horizon) / (h - horizon);
        const double v = road * (0.8 + 0.3 * depth);
        img.at(r, c, 0) = clamp01(v + tint);
        img.at(r, c, 1) = clamp01(v);
        img.at(r, c, 2) = clamp01(v - tint);
        labels.at(r, c) = kRoad;
      }
    }
  }
  const int shapes = uniform_int(rng, s.min_shapes, s.max_shapes);
  for (int i = 0; i < shapes; ++i) {
    const double bw = uniform(rng, s.min_shape_size, s.max_shape_size) * w;
    const double bh = bw * uniform(rng, 0.5, 1.2);
    const double x0 = uniform(rng, -0.2 * bw, w - 0.8 * bw);
    const double bottom = horizon + uniform(rng, -0.05, 0.3) * h;
    const double y0 = bottom - bh;
    const int hue = uniform_int(rng, 0, 5);
    const double hi = uniform(rng, 0.6, 0.95), lo = uniform(rng, 0.05, 0.3);
    const double color[3] = {(hue == 0 || hue == 3 || hue == 4) ? hi : lo, (hue == 1 || hue == 3 || hue == 5) ? hi : lo,
                             (hue == 2 || hue == 4 || hue == 5) ? hi : lo};
    for (int r = std::max(0, static_cast<int>(std::ceil(y0 - 0.5))); r < h; ++r) {
      if (r + 0.5 >= bottom) break;
      for (int c = std::max(0, static_cast<int>(std::ceil(x0 - 0.5))); c < w; ++c) {
        if (c + 0.5 >= x0 + bw) break;
        const double shade = 1.0 - 0.25 * (r + 0.5 - y0) / bh;
        for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = clamp01(color[ch] * shade);
        labels.at(r, c) = kObject;
      }
    }
  }
  if (s.noise_amplitude > 0) {
    for (float& v : img.data()) v = clamp01(v + uniform(rng, -s.noise_amplitude, s.noise_amplitude));
  }
}

struct Disc {
  double cx, cy, r;  // pixel units
};

struct Blob {
  std::vector<Disc> discs;
  PolygonClass cls;
};

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  if (pts.size() < 3) return pts;
  auto cross = [](const Point2& o, const Point2& a, const Point2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Coarse label: hull of eight points around each slightly inflated disc.
Polygon coarse_polygon(const Blob& blob, int h, int w) {
  std::vector<Point2> pts;
  for (const auto& d : blob.discs) {
    for (int k = 0; k < 8; ++k) {
      const double a = k * 3.14159265358979323846 / 4.0;
      const double rr = 1.1 * d.r;
      pts.push_back({std::clamp((d.cx + rr * std::cos(a)) / w, 0.0, 1.0),
                     std::clamp((d.cy + rr * std::sin(a)) / h, 0.0, 1.0)});
    }
  }
  return Polygon{convex_hull(std::move(pts)), blob.cls};
}

std::vector<Blob> draw_blobs(const ProceduralSceneSpec& s, Rng& rng) {
  std::vector<Blob> blobs(uniform_int(rng, s.min_blobs, s.max_blobs));
  for (auto& b : blobs) {
    b.cls = uniform(rng, 0.0, 1.0) < s.transparent_fraction ? PolygonClass::transparent : PolygonClass::opaque;
    const double r0 = uniform(rng, s.min_blob_radius, s.max_blob_radius) * s.width;
    const double cx = uniform(rng, 0.0, s.width), cy = uniform(rng, 0.0, s.height);
    b.discs.push_back({cx, cy, r0});
    const int extra = uniform_int(rng, 1, 3);
    for (int i = 0; i < extra; ++i) {
      const double a = uniform(rng, 0.0, 2.0 * 3.14159265358979323846);
      const double dist = uniform(rng, 0.3, 1.0) * r0;
      b.discs.push_back({cx + dist * std::cos(a), cy + dist * std::sin(a), r0 * uniform(rng, 0.4, 0.9)});
    }
  }
  return blobs;
}

}  // namespace

Image soil_texture(const Image& clean, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "soil.texture"));
  const int h = clean.height(), w = clean.width();
  const double base = uniform(rng, 0.6, 1.0);
  const double mud[3] = {0.30 * base, 0.23 * base, 0.15 * base};
  SoilingMask noise(h, w);
  for (float& v : noise.data()) v = static_cast<float>(uniform(rng, 0.0, 1.0));
  noise = gaussian_smooth(noise, 1.5);
  Image out(h, w, 3);
  std::vector<SoilingMask> blurred;
  for (int ch = 0; ch < 3; ++ch) {
    SoilingMask plane(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) plane.at(r, c) = clean.at(r, c, std::min(ch, clean.channels() - 1));
    blurred.push_back(gaussian_smooth(plane, 2.0));
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double n = 0.7 + 0.6 * noise.at(r, c);
      for (int ch = 0; ch < 3; ++ch) {
        out.at(r, c, ch) = clamp01(0.25 * blurred[ch].at(r, c) + 0.75 * mud[ch] * n);
      }
    }
  }
  return out;
}

ProceduralSample generate_procedural_sample(const ProceduralSceneSpec& spec, int index) {
  validate(spec);
  if (index < 0) throw ParameterError("procedural sample index must be non-negative");
  ProceduralSample out;
  out.id = procedural_id(index);
  const std::uint64_t seed = derive_seed(spec.seed, out.id);
  Rng scene_rng(derive_seed(seed, "scene"));
  const int h = spec.height, w = spec.width;
  out.clean = Image(h, w, 3);
  out.scene = ClassMap(h, w, kBackground);
  render_scene(spec, scene_rng, out.clean, out.scene);

  Rng soil_rng(derive_seed(seed, "soiling"));
  const auto blobs = draw_blobs(spec, soil_rng);
  SoilingMask raw(h, w);
  out.soiling = ClassMap(h, w, kClean);
  for (const auto& b : blobs) {
    const bool opaque = b.cls == PolygonClass::opaque;
    const float alpha = opaque ? 1.0f : static_cast<float>(spec.transparent_alpha);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        bool inside = false;
        for (const auto& d : b.discs) {
          const double dx = c + 0.5 - d.cx, dy = r + 0.5 - d.cy;
          inside = inside || dx * dx + dy * dy <= d.r * d.r;
        }
        if (!inside || raw.at(r, c) >= alpha) continue;
        raw.at(r, c) = alpha;
        out.soiling.at(r, c) = opaque ? kOpaque : kTransparent;
      }
    }
    out.polygons.push_back(coarse_polygon(b, h, w));
  }
  out.mask = gaussian_smooth(raw, spec.soil_sigma);
  out.soiled = compose(out.clean, soil_texture(out.clean, seed), out.mask, 1).image;
  return out;
}

std::vector<ProceduralSample> generate_procedural_corpus(const ProceduralSceneSpec& spec, int n) {
  if (n < 1) throw ParameterError("procedural corpus needs n >= 1");
  std::vector<ProceduralSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(generate_procedural_sample(spec, i));
  return out;
}

ClassMap degrade_labels(const ClassMap& scene, const SoilingMask& mask) {
  if (scene.height() != mask.height() || scene.width() != mask.width()) {
    throw ShapeError("scene labels and mask differ in size");
  }
  ClassMap out = scene;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask.data()[i] >= 0.25f) out.data()[i] = kBackground;
  }
  return out;
}

ClassMap soiling_labels(const SoilingMask& mask, int num_classes) {
  if (num_classes != 2 && num_classes != 3) throw ParameterError("soiling labels have 2 or 3 classes");
  ClassMap out(mask.height(), mask.width(), kClean);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float a = mask.data()[i];
    if (num_classes == 2) {
      out.data()[i] = a >= 0.25f ? 1 : 0;
    } else {
      out.data()[i] = a >= 0.75f ? kOpaque : (a >= 0.25f ? kTransparent : kClean);
    }
  }
  return out;
}

ClassMap binary_soiling(const ClassMap& soiling) {
  ClassMap out = soiling;
  for (auto& v : out.data()) v = v != kClean ? 1 : 0;
  return out;
}

}  // namespace soilgen::dataset
