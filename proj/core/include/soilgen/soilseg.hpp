#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "soilgen/arch.hpp"
#include "soilgen/checkpoint.hpp"
#include "soilgen/image.hpp"

namespace soilgen::seg {

// Soiling class codes: clean 0, opaque 1, transparent 2. The same model type
// also serves scene segmentation with arbitrary class counts.
struct SegModel {
  arch::MaskSegShape shape;
  ckpt::TrainableNet net;
  int working_size = 64;
  double transparent_alpha = 0.5;
  long steps = 0;
  bool trained = false;

  static SegModel create(const arch::MaskSegShape& shape, int working_size, std::uint64_t seed,
                         const nn::AdamConfig& adam = {1e-4});
  int num_classes() const noexcept { return shape.num_classes; }
};

// Brings an image (or label map) to the working resolution: box filter when
// the size divides evenly, bilinear otherwise; labels use nearest sampling.
Image to_working(const Image& image, int size);
ClassMap to_working(const ClassMap& labels, int size);
ClassMap resize_nearest(const ClassMap& labels, int height, int width);

struct TrainConfig {
  int steps = 1000;
  int batch = 8;
  bool augment = false;  // random horizontal flip + contrast jitter
  std::uint64_t seed = 0;
};

struct TrainTrace {
  std::vector<double> step_loss;
};

// Per-pixel softmax cross-entropy (binary cross-entropy for two classes),
// minimized with Adam. DataError for label codes >= num_classes or unpaired
// inputs; DivergenceError on a non-finite loss.
TrainTrace train_seg(SegModel& model, std::span<const Image> images, std::span<const ClassMap> labels,
                     const TrainConfig& config);

// Per-pixel logits at working resolution, (1, K, S, S).
nn::Tensor<float> logits(const SegModel& model, const Image& image);

// Argmax with ties resolved to the lowest code.
ClassMap argmax(const nn::Tensor<float>& logits, int sample = 0);

struct MaskPrediction {
  ClassMap class_map;  // at the input image resolution
  SoilingMask alpha;   // clean 0, opaque 1, transparent transparent_alpha
};

// Class-to-alpha mapping used by infer_mask. Two-class models map code 1 to 1.
SoilingMask class_alpha(const ClassMap& classes, int num_classes, double transparent_alpha);

// DependencyError for an untrained model.
MaskPrediction infer_mask(const SegModel& model, const Image& image);
ClassMap predict(const SegModel& model, const Image& image);

struct Refinement {
  SoilingMask alpha;
  double iou = 0.0;  // between {alpha > 0} and {polygon_mask > 0}
};
Refinement refine_weak_labels(const SegModel& model, const Image& image, const SoilingMask& polygon_mask);

// seg/net.ckpt, seg/model.json
void save(const SegModel& model, const std::filesystem::path& dir);
SegModel load(const std::filesystem::path& dir);

}  // namespace soilgen::seg
