#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "soilgen/arch.hpp"
#include "soilgen/dataset.hpp"
#include "soilgen/image.hpp"

namespace soilgen::eval {

struct ReportRow {
  std::string condition;
  std::string metric;
  double value = 0.0;
  int n_images = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

// Published numbers shown next to ours, in percent and kept as text so they
// are printed exactly as published.
struct ReferenceValue {
  std::string source;     // e.g. "WoodScape"
  std::string condition;  // matches ReportRow::condition
  std::string value;
};

enum class ReportKind { augmentation, degradation };

struct ExperimentReport {
  ReportKind kind = ReportKind::augmentation;
  std::vector<ReportRow> rows;
  std::vector<ReferenceValue> references;
};

// Finite values; (condition, metric, seed) unique; labels free of commas,
// quotes and newlines. ValidationError otherwise.
void validate(const ExperimentReport& report);

// Median over seeds; nullopt when no row matches.
std::optional<double> median_value(const ExperimentReport& report, const std::string& condition,
                                   const std::string& metric = "miou");

std::vector<ReferenceValue> augmentation_references();
std::vector<ReferenceValue> degradation_references();

// --- report output -------------------------------------------------------------

enum class ReportFormat { csv, markdown };
ReportFormat parse_report_format(const std::string& name);  // ParameterError for unknown names

// CSV: header "condition,metric,value,n_images,seed", values printed with 17
// significant digits. Markdown: median over seeds in percent beside the
// references; degradation reports render 2x2 Train\Test grids.
// ValidationError for an empty or invalid report.
std::string emit_report(const ExperimentReport& report, ReportFormat format);
std::vector<ReportRow> parse_report_csv(const std::string& text);  // FormatError

// --- experiments -----------------------------------------------------------------

struct SegSample {
  Image image;
  ClassMap labels;
};

struct SegBudget {
  arch::MaskSegShape shape;  // num_classes and width of the segmentation network
  int working_size = 64;
  int steps = 1000;
  int batch = 8;
  double lr = 1e-4;
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

inline const char* const kGeneratedOnly = "generated-only";
inline const char* const kRealOnly = "real-only";
inline const char* const kRealClassic = "real+classic";
inline const char* const kRealGenerated = "real+generated";

struct AugmentationData {
  std::vector<SegSample> real_train;
  std::vector<SegSample> real_test;
  std::vector<SegSample> generated;
};

// Soiling segmentation trained under four conditions with identical budgets,
// each scored by mIoU on real_test. Classic augmentation is random horizontal
// flip plus contrast jitter. DataError when a required set is empty.
ExperimentReport run_augmentation_experiment(const AugmentationData& data, const SegBudget& budget);

// Condition labels of the degradation grid.
std::string grid_condition(const std::string& train, const std::string& test);

struct DegradationData {
  std::vector<SegSample> clean_train;
  std::vector<SegSample> clean_test;
  std::vector<SegSample> soiled_train;
  std::vector<SegSample> soiled_test;
};

// Scene segmentation trained on clean and on soiled images, each evaluated on
// both test sets. Also reports each model on its own training split with
// test "train-split".
ExperimentReport run_degradation_experiment(const DegradationData& data, const SegBudget& budget);

// --- corpus adapters ---------------------------------------------------------------

// Real corpus: dirty images. Training labels are rasterized polygon
// annotations (weak), test labels the precise soiling maps. Generated corpus:
// dirty images labelled by their masks. Labels are collapsed to two classes
// when num_classes is 2. DataError when the split leaves a side empty.
AugmentationData augmentation_data(const dataset::Corpus& real, const dataset::Corpus& generated, int num_classes,
                                   double transparent_alpha = 0.5);

// Pairs clean images (scene labels) with their dirty counterparts, whose soiled
// pixels are relabelled as background. DataError for entries without a dirty
// image, mask or labels.
DegradationData degradation_data(const dataset::Corpus& corpus);

}  // namespace soilgen::eval
