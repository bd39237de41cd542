#pragma once

#include <span>
#include <utility>
#include <vector>

#include "soilgen/image.hpp"
#include "soilgen/tensor.hpp"

namespace soilgen::imaging {

// --- value range -----------------------------------------------------------

// Maps [0,1] storage values to the generators' tanh range [-1,1]; the batch
// tensor has one sample per image.
nn::Tensor<float> to_network_range(const Image& image);
nn::Tensor<float> to_network_range(std::span<const Image> images);
nn::Tensor<float> to_network_range(const SoilingMask& mask);

// Inverse of to_network_range for one sample; clamps to [0,1].
Image from_network_range(const nn::Tensor<float>& tensor, int sample = 0);

// Plain [0,1] tensors (no range change), used for masks fed to mask networks.
nn::Tensor<float> to_tensor(const SoilingMask& mask);
nn::Tensor<float> to_tensor(std::span<const SoilingMask> masks);
SoilingMask mask_from_tensor(const nn::Tensor<float>& tensor, int sample = 0, int channel = 0);

// --- rasterization ---------------------------------------------------------

struct RasterizeOptions {
  float transparent_alpha = 0.5f;
};

// Pixel (r, c) samples the polygon at ((c + 0.5) / W, (r + 0.5) / H) with the
// even-odd rule. Opaque coverage wins over transparent coverage.
SoilingMask rasterize(std::span<const Polygon> polygons, int height, int width,
                      const RasterizeOptions& options = {});

void validate_polygon(const Polygon& polygon);

// --- filtering and resampling ----------------------------------------------

// Normalized 1-D Gaussian taps, radius ceil(3 sigma). sigma == 0 gives {1}.
std::vector<double> gaussian_kernel(double sigma);

SoilingMask gaussian_smooth(const SoilingMask& mask, double sigma);

enum class ResampleMode { nearest, bilinear, bicubic };

Image upscale(const Image& image, int factor, ResampleMode mode = ResampleMode::bicubic);
SoilingMask upscale(const SoilingMask& mask, int factor, ResampleMode mode = ResampleMode::bilinear);

// Box-filter reduction by an integer factor; dimensions must be divisible.
Image downscale(const Image& image, int factor);
SoilingMask downscale(const SoilingMask& mask, int factor);

// Bilinear resize to arbitrary dimensions.
SoilingMask resize(const SoilingMask& mask, int height, int width);
Image resize(const Image& image, int height, int width);

// --- composition -----------------------------------------------------------

struct ComposeOptions {
  ResampleMode image_mode = ResampleMode::bicubic;
  ResampleMode mask_mode = ResampleMode::bilinear;
};

struct Composite {
  Image image;
  SoilingMask annotation;  // U(m), the alpha actually used
};

// out = (1 - U(m)) * clean + U(m) * U(soiled), with soiled and mask at
// 1/factor of the clean resolution.
Composite compose(const Image& clean, const Image& soiled, const SoilingMask& mask, int factor,
                  const ComposeOptions& options = {});

// Same-resolution convex blend; pixels with alpha 0 reproduce `base` exactly.
Image blend(const Image& base, const Image& overlay, const SoilingMask& alpha);

// --- small utilities -------------------------------------------------------

SoilingMask binarize(const SoilingMask& mask, float threshold);
Image to_grayscale(const Image& image);
Image flip_horizontal(const Image& image);
SoilingMask flip_horizontal(const SoilingMask& mask);
ClassMap flip_horizontal(const ClassMap& map);

}  // namespace soilgen::imaging
