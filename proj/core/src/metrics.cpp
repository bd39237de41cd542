#include "soilgen/metrics.hpp"

#include <numeric>
#include <string>

#include "soilgen/error.hpp"

namespace soilgen::metrics {

ConfusionMatrix::ConfusionMatrix(int num_classes) : num_classes_(num_classes) {
  if (num_classes < 1 || num_classes > 256) throw ParameterError("confusion matrix needs 1..256 classes");
  counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw ShapeError("confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

void accumulate(ConfusionMatrix& cm, const ClassMap& gt, const ClassMap& pred) {
  if (gt.height() != pred.height() || gt.width() != pred.width()) {
    throw ShapeError("ground truth and prediction maps differ in size");
  }
  const auto g = gt.data();
  const auto p = pred.data();
  const int k = cm.num_classes_;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] >= k || p[i] >= k) {
      throw DataError("class code " + std::to_string(std::max(g[i], p[i])) + " outside 0.." + std::to_string(k - 1));
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) ++cm.counts_[static_cast<std::size_t>(g[i]) * k + p[i]];
}

MiouResult miou(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw UndefinedMetricError("mIoU of an empty confusion matrix");
  const int k = cm.num_classes();
  MiouResult out;
  out.per_class.resize(k);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    std::uint64_t row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t uni = row + col - tp;
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    out.per_class[c] = iou;
    sum += iou;
    ++present;
  }
  out.miou = sum / present;
  return out;
}

double binary_iou(const SoilingMask& a, const SoilingMask& b, float threshold) {
  if (!a.same_size(b)) throw ShapeError("binary_iou: masks differ in size");
  std::size_t inter = 0, uni = 0;
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool p = x[i] > threshold;
    const bool q = y[i] > threshold;
    inter += p && q;
    uni += p || q;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace soilgen::metrics
