#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "soilgen/error.hpp"
#include "soilgen/imaging.hpp"
#include "soilgen/png_io.hpp"
#include "test_util.hpp"

using namespace soilgen;
using namespace soilgen::imaging;

namespace {

// Crossing-number test written independently of the library.
bool inside_oracle(const std::vector<Point2>& v, double x, double y) {
  int crossings = 0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = v[i];
    const Point2& b = v[(i + 1) % n];
    if ((a.y > y) == (b.y > y)) continue;
    const double t = (y - a.y) / (b.y - a.y);
    if (a.x + t * (b.x - a.x) > x) ++crossings;
  }
  return crossings % 2 == 1;
}

Polygon rect(double x0, double y0, double x1, double y1, PolygonClass cls = PolygonClass::opaque) {
  return Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, cls};
}

}  // namespace

TEST(NetworkRange, Endpoints) {
  Image img(2, 2, 3);
  img.at(0, 0, 0) = 0.0f;
  img.at(0, 1, 1) = 1.0f;
  img.at(1, 0, 2) = 0.5f;
  const auto t = to_network_range(img);
  EXPECT_EQ(t(0, 0, 0, 0), -1.0f);
  EXPECT_EQ(t(0, 1, 0, 1), 1.0f);
  EXPECT_EQ(t(0, 2, 1, 0), 0.0f);
}

// The float tensor holds 2v - 1, so precision is bounded by the spacing of
// floats near 1, not near v.
TEST(NetworkRange, RoundTripWithinOneUlpOfUnitRange) {
  std::mt19937_64 rng(3);
  const Image img = testutil::random_image(16, 16, 3, rng);
  const Image back = from_network_range(to_network_range(img));
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float a = img.data()[i], b = back.data()[i];
    EXPECT_LE(std::fabs(a - b), std::numeric_limits<float>::epsilon()) << i;
  }
}

TEST(Rasterize, EmptyListIsClean) {
  const auto m = rasterize({}, 4, 4);
  for (float v : m.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Rasterize, FullCoverIsOpaque) {
  const std::vector<Polygon> p{rect(0, 0, 1, 1)};
  const auto m = rasterize(p, 5, 7);
  for (float v : m.data()) EXPECT_EQ(v, 1.0f);
}

TEST(Rasterize, LeftHalfRectangle) {
  const std::vector<Polygon> p{rect(0, 0, 0.5, 1)};
  const auto m = rasterize(p, 4, 4);
  int ones = 0;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const bool expect = (c + 0.5) / 4.0 < 0.5;
      EXPECT_EQ(m.at(r, c), expect ? 1.0f : 0.0f);
      ones += m.at(r, c) == 1.0f;
    }
  }
  EXPECT_EQ(ones, 8);
}

TEST(Rasterize, TransparentAlphaAndOpaquePrecedence) {
  const std::vector<Polygon> p{rect(0, 0, 1, 1, PolygonClass::transparent), rect(0, 0, 0.5, 0.5)};
  const auto m = rasterize(p, 4, 4, {0.3f});
  EXPECT_EQ(m.at(0, 0), 1.0f);
  EXPECT_EQ(m.at(3, 3), 0.3f);
}

TEST(Rasterize, TooFewVerticesRejected) {
  const std::vector<Polygon> p{Polygon{{{0, 0}, {1, 1}}, PolygonClass::opaque}};
  EXPECT_THROW(rasterize(p, 4, 4), InvalidAnnotationError);
}

TEST(Rasterize, OutOfRangeVertexRejected) {
  const std::vector<Polygon> p{Polygon{{{0, 0}, {1.5, 0}, {0, 1}}, PolygonClass::opaque}};
  EXPECT_THROW(rasterize(p, 4, 4), InvalidAnnotationError);
}

TEST(Rasterize, MatchesCrossingNumberOracle) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> nv(3, 9);
  for (int trial = 0; trial < 100; ++trial) {
    Polygon poly;
    const int n = nv(rng);
    for (int i = 0; i < n; ++i) poly.vertices.push_back({u(rng), u(rng)});
    const std::vector<Polygon> ps{poly};
    const auto m = rasterize(ps, 16, 16);
    for (int r = 0; r < 16; ++r) {
      for (int c = 0; c < 16; ++c) {
        const bool in = inside_oracle(poly.vertices, (c + 0.5) / 16.0, (r + 0.5) / 16.0);
        ASSERT_EQ(m.at(r, c), in ? 1.0f : 0.0f) << "trial " << trial << " pixel " << r << "," << c;
      }
    }
  }
}

TEST(GaussianSmooth, ConstantPreserved) {
  SoilingMask m(9, 7, 0.7f);
  for (double sigma : {0.5, 1.0, 2.5}) {
    const auto out = gaussian_smooth(m, sigma);
    for (float v : out.data()) EXPECT_NEAR(v, 0.7f, 1e-6f);
  }
}

TEST(GaussianSmooth, SigmaZeroIsIdentity) {
  std::mt19937_64 rng(1);
  const auto m = testutil::random_mask(6, 5, rng);
  EXPECT_EQ(gaussian_smooth(m, 0.0), m);
}

TEST(GaussianSmooth, DeltaCenterEqualsCentralWeightSquared) {
  SoilingMask m(5, 5);
  m.at(2, 2) = 1.0f;
  const auto out = gaussian_smooth(m, 1.0);
  // Direct 2-D convolution sum with the unnormalized Gaussian, normalized
  // over the truncated 7x7 support.
  double total = 0.0;
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) total += std::exp(-(dx * dx + dy * dy) / 2.0);
  EXPECT_NEAR(out.at(2, 2), 1.0 / total, 1e-6);
}

TEST(GaussianSmooth, KernelNormalizedWithRadius3Sigma) {
  const auto k = gaussian_kernel(1.3);
  EXPECT_EQ(k.size(), 2u * static_cast<std::size_t>(std::ceil(3 * 1.3)) + 1);
  double s = 0;
  for (double v : k) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(GaussianSmooth, NegativeSigmaRejected) {
  EXPECT_THROW(gaussian_smooth(SoilingMask(3, 3), -0.1), ParameterError);
}

TEST(GaussianSmooth, NeverWidensRange) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    auto m = testutil::random_mask(8, 11, rng);
    for (auto& v : m.data()) v = 0.2f + 0.5f * v;
    const auto out = gaussian_smooth(m, 0.3 + 0.1 * t);
    const auto [lo, hi] = std::minmax_element(m.data().begin(), m.data().end());
    for (float v : out.data()) {
      EXPECT_GE(v, *lo);
      EXPECT_LE(v, *hi);
    }
  }
}

TEST(Upscale, FactorOneIsIdentity) {
  std::mt19937_64 rng(2);
  const auto img = testutil::random_image(5, 4, 3, rng);
  for (auto mode : {ResampleMode::nearest, ResampleMode::bilinear, ResampleMode::bicubic}) {
    EXPECT_EQ(upscale(img, 1, mode), img);
  }
}

TEST(Upscale, ConstantStaysConstant) {
  const Image img(3, 4, 3, 0.4f);
  for (auto mode : {ResampleMode::nearest, ResampleMode::bilinear, ResampleMode::bicubic}) {
    const auto out = upscale(img, 3, mode);
    EXPECT_EQ(out.height(), 9);
    EXPECT_EQ(out.width(), 12);
    for (float v : out.data()) EXPECT_NEAR(v, 0.4f, 1e-6f);
  }
}

TEST(Upscale, NearestCheckerboard) {
  SoilingMask m(2, 2);
  m.at(0, 0) = m.at(1, 1) = 1.0f;
  const auto out = upscale(m, 2, ResampleMode::nearest);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(out.at(r, c), ((r / 2 + c / 2) % 2 == 0) ? 1.0f : 0.0f);
}

TEST(Upscale, BicubicStaysInUnitRange) {
  SoilingMask m(4, 4);
  m.at(1, 1) = 1.0f;
  const auto out = upscale(m, 4, ResampleMode::bicubic);
  for (float v : out.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Upscale, FactorBelowOneRejected) {
  EXPECT_THROW(upscale(Image(2, 2, 1), 0), ParameterError);
}

TEST(Compose, ZeroMaskReturnsClean) {
  std::mt19937_64 rng(8);
  const auto clean = testutil::random_image(8, 8, 3, rng);
  const auto soiled = testutil::random_image(8, 8, 3, rng);
  const auto c = compose(clean, soiled, SoilingMask(8, 8, 0.0f), 1);
  EXPECT_EQ(c.image, clean);
}

TEST(Compose, UnitMaskReturnsSoiled) {
  std::mt19937_64 rng(9);
  const auto clean = testutil::random_image(8, 8, 3, rng);
  const auto soiled = testutil::random_image(8, 8, 3, rng);
  EXPECT_EQ(compose(clean, soiled, SoilingMask(8, 8, 1.0f), 1).image, soiled);
}

TEST(Compose, ConvexMidpoint) {
  Image clean(1, 1, 1, 0.2f), soiled(1, 1, 1, 0.8f);
  EXPECT_FLOAT_EQ(compose(clean, soiled, SoilingMask(1, 1, 0.5f), 1).image.at(0, 0), 0.5f);
}

TEST(Compose, AnnotationIsUpscaledMask) {
  std::mt19937_64 rng(10);
  const auto clean = testutil::random_image(16, 16, 3, rng);
  const auto soiled = testutil::random_image(4, 4, 3, rng);
  const auto mask = testutil::random_mask(4, 4, rng);
  const auto c = compose(clean, soiled, mask, 4);
  EXPECT_EQ(c.annotation, upscale(mask, 4));
  EXPECT_EQ(c.image.height(), 16);
}

TEST(Compose, ShapeMismatch) {
  EXPECT_THROW(compose(Image(8, 8, 3), Image(4, 4, 3), SoilingMask(4, 4), 1), ShapeError);
  EXPECT_THROW(compose(Image(8, 8, 3), Image(4, 4, 3), SoilingMask(3, 4), 2), ShapeError);
}

TEST(Compose, PointwiseBounded) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const auto clean = testutil::random_image(8, 8, 3, rng);
    const auto soiled = testutil::random_image(4, 4, 3, rng);
    const auto mask = testutil::random_mask(4, 4, rng);
    const auto c = compose(clean, soiled, mask, 2);
    const auto up = upscale(soiled, 2);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      ASSERT_GE(c.image.data()[i], std::min(clean.data()[i], up.data()[i]));
      ASSERT_LE(c.image.data()[i], std::max(clean.data()[i], up.data()[i]));
    }
  }
}

TEST(Compose, SwapSymmetry) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 100; ++t) {
    const auto a = testutil::random_image(6, 6, 3, rng);
    const auto b = testutil::random_image(6, 6, 3, rng);
    const auto m = testutil::random_dyadic_mask(6, 6, rng);
    SoilingMask inv = m;
    for (auto& v : inv.data()) v = 1.0f - v;
    ASSERT_EQ(compose(a, b, m, 1).image, compose(b, a, inv, 1).image);
  }
}

TEST(Downscale, BoxAverage) {
  SoilingMask m(2, 2);
  m.at(0, 0) = 1.0f;
  EXPECT_FLOAT_EQ(downscale(m, 2).at(0, 0), 0.25f);
  EXPECT_THROW(downscale(SoilingMask(3, 3), 2), ShapeError);
}

TEST(Png, ImageRoundTripQuantized) {
  testutil::TempDir dir("png");
  std::mt19937_64 rng(13);
  const auto img = testutil::random_image(7, 5, 3, rng);
  png::write_image(dir / "a.png", img);
  const auto back = png::read_image(dir / "a.png");
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::fabs(back.data()[i] - img.data()[i]), 0.5f / 255.0f + 1e-7f);
}

TEST(Png, MaskRoundTripIsExactAfterQuantization) {
  testutil::TempDir dir("png");
  std::mt19937_64 rng(14);
  const auto m = testutil::random_mask(9, 4, rng);
  png::write_mask(dir / "m.png", m);
  const auto once = png::read_mask(dir / "m.png");
  png::write_mask(dir / "m2.png", once);
  EXPECT_EQ(png::read_mask(dir / "m2.png"), once);
}

TEST(Png, UnreadableFileIsFormatError) {
  testutil::TempDir dir("png");
  {
    std::FILE* f = std::fopen((dir / "bad.png").c_str(), "wb");
    std::fputs("not a png", f);
    std::fclose(f);
  }
  EXPECT_THROW(png::read_image(dir / "bad.png"), FormatError);
}
