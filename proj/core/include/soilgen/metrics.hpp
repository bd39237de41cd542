#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "soilgen/image.hpp"

namespace soilgen::metrics {

// Rows are ground truth, columns prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const noexcept { return num_classes_; }
  std::uint64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * num_classes_ + pred]; }
  std::uint64_t total() const noexcept;
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  friend void accumulate(ConfusionMatrix&, const ClassMap&, const ClassMap&);
  int num_classes_;
  std::vector<std::uint64_t> counts_;
};

// ShapeError for differing sizes, DataError for codes >= num_classes.
void accumulate(ConfusionMatrix& cm, const ClassMap& gt, const ClassMap& pred);

struct MiouResult {
  double miou = 0.0;
  // IoU per class; empty for classes absent from both ground truth and prediction.
  std::vector<std::optional<double>> per_class;
};

// Mean of TP / (TP + FP + FN) over classes present in gt or pred.
// UndefinedMetricError when nothing was accumulated.
MiouResult miou(const ConfusionMatrix& cm);

// IoU of {a > threshold} and {b > threshold}; 1 when both sets are empty.
double binary_iou(const SoilingMask& a, const SoilingMask& b, float threshold = 0.5f);

}  // namespace soilgen::metrics
