#include "soilgen/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "soilgen/error.hpp"
#include "soilgen/imaging.hpp"
#include "soilgen/metrics.hpp"
#include "soilgen/seed.hpp"
#include "soilgen/soilseg.hpp"

namespace soilgen::eval {

namespace {

constexpr const char* kCsvHeader = "condition,metric,value,n_images,seed";

bool plain_label(const std::string& s) {
  return !s.empty() && s.find_first_of(",\"\n\r|") == std::string::npos;
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::vector<std::string> conditions_in_order(const ExperimentReport& report) {
  std::vector<std::string> out;
  for (const auto& r : report.rows) {
    if (std::find(out.begin(), out.end(), r.condition) == out.end()) out.push_back(r.condition);
  }
  // referenced conditions we did not run still get a row
  for (const auto& r : report.references) {
    if (std::find(out.begin(), out.end(), r.condition) == out.end()) out.push_back(r.condition);
  }
  return out;
}

std::vector<std::string> reference_sources(const ExperimentReport& report) {
  std::vector<std::string> out;
  for (const auto& r : report.references) {
    if (std::find(out.begin(), out.end(), r.source) == out.end()) out.push_back(r.source);
  }
  return out;
}

std::string reference_for(const ExperimentReport& report, const std::string& source, const std::string& condition) {
  for (const auto& r : report.references) {
    if (r.source == source && r.condition == condition) return r.value;
  }
  return "-";
}

std::string seed_list(const ExperimentReport& report) {
  std::set<std::uint64_t> seeds;
  for (const auto& r : report.rows) seeds.insert(r.seed);
  std::string out;
  for (auto s : seeds) out += (out.empty() ? "" : ", ") + std::to_string(s);
  return out;
}

std::string median_cell(const ExperimentReport& report, const std::string& condition) {
  const auto m = median_value(report, condition);
  return m ? percent(*m) : "-";
}

const char* const kDomains[2] = {"clean", "soiled"};

std::string grid_table(const std::string& title, const std::function<std::string(const std::string&)>& cell) {
  std::ostringstream out;
  out << "### " << title << "\n\n";
  out << "| Train\\Test | Clean | Soiled |\n|---|---|---|\n";
  for (const char* train : kDomains) {
    const std::string name = train;
    out << "| " << static_cast<char>(std::toupper(name[0])) << name.substr(1);
    for (const char* test : kDomains) out << " | " << cell(grid_condition(train, test));
    out << " |\n";
  }
  out << "\n";
  return out.str();
}

std::string markdown_augmentation(const ExperimentReport& report) {
  const auto sources = reference_sources(report);
  std::ostringstream out;
  out << "## Augmentation (mIoU %, median over seeds " << seed_list(report) << ")\n\n";
  out << "| Condition | Ours |";
  for (const auto& s : sources) out << " Reference (" << s << ") |";
  out << "\n|---|---|";
  for (std::size_t i = 0; i < sources.size(); ++i) out << "---|";
  out << "\n";
  for (const auto& c : conditions_in_order(report)) {
    out << "| " << c << " | " << median_cell(report, c) << " |";
    for (const auto& s : sources) out << " " << reference_for(report, s, c) << " |";
    out << "\n";
  }
  return out.str();
}

std::string markdown_degradation(const ExperimentReport& report) {
  std::ostringstream out;
  out << "## Degradation (mIoU %, median over seeds " << seed_list(report) << ")\n\n";
  out << grid_table("Ours", [&](const std::string& c) { return median_cell(report, c); });
  for (const auto& s : reference_sources(report)) {
    out << grid_table("Reference (" + s + ")", [&](const std::string& c) { return reference_for(report, s, c); });
  }
  return out.str();
}

// --- training helpers ---------------------------------------------------------

void split_samples(const std::vector<SegSample>& samples, std::vector<Image>& images, std::vector<ClassMap>& labels) {
  for (const auto& s : samples) {
    images.push_back(s.image);
    labels.push_back(s.labels);
  }
}

seg::SegModel train_model(const std::vector<SegSample>& train, const SegBudget& budget, bool augment,
                          std::uint64_t seed) {
  std::vector<Image> images;
  std::vector<ClassMap> labels;
  split_samples(train, images, labels);
  auto model = seg::SegModel::create(budget.shape, budget.working_size, derive_seed(seed, "init"),
                                     nn::AdamConfig{budget.lr});
  seg::TrainConfig cfg;
  cfg.steps = budget.steps;
  cfg.batch = budget.batch;
  cfg.augment = augment;
  cfg.seed = derive_seed(seed, "train");
  seg::train_seg(model, images, labels, cfg);
  model.trained = true;  // a zero-step budget still yields a usable (untrained) predictor
  return model;
}

double evaluate(const seg::SegModel& model, const std::vector<SegSample>& test) {
  metrics::ConfusionMatrix cm(model.num_classes());
  for (const auto& s : test) metrics::accumulate(cm, s.labels, seg::predict(model, s.image));
  return metrics::miou(cm).miou;
}

void check_budget(const SegBudget& budget) {
  if (budget.seeds.empty()) throw ParameterError("experiment needs at least one seed");
  if (budget.steps < 0 || budget.batch < 1) throw ParameterError("experiment needs steps >= 0 and batch >= 1");
}

std::vector<SegSample> concat(const std::vector<SegSample>& a, const std::vector<SegSample>& b) {
  std::vector<SegSample> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

ClassMap soiling_codes(const ClassMap& soiling, int num_classes) {
  return num_classes == 2 ? dataset::binary_soiling(soiling) : soiling;
}

}  // namespace

// --- reports ------------------------------------------------------------------------

void validate(const ExperimentReport& report) {
  std::set<std::tuple<std::string, std::string, std::uint64_t>> seen;
  for (const auto& r : report.rows) {
    if (!plain_label(r.condition) || !plain_label(r.metric)) {
      throw ValidationError("report label '" + r.condition + "/" + r.metric + "' is empty or contains , \" | or a newline");
    }
    if (!std::isfinite(r.value)) throw ValidationError("report value for '" + r.condition + "' is not finite");
    if (r.n_images < 0) throw ValidationError("negative image count in report");
    if (!seen.emplace(r.condition, r.metric, r.seed).second) {
      throw ValidationError("duplicate report row '" + r.condition + "/" + r.metric + "' for seed " +
                            std::to_string(r.seed));
    }
  }
}

std::optional<double> median_value(const ExperimentReport& report, const std::string& condition,
                                   const std::string& metric) {
  std::vector<double> v;
  for (const auto& r : report.rows) {
    if (r.condition == condition && r.metric == metric) v.push_back(r.value);
  }
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<ReferenceValue> augmentation_references() {
  return {{"WoodScape", kGeneratedOnly, "47.41"},
          {"WoodScape", kRealOnly, "73.95"},
          {"WoodScape", kRealClassic, "78.20"},
          {"WoodScape", kRealGenerated, "91.71"}};
}

std::vector<ReferenceValue> degradation_references() {
  return {{"WoodScape", grid_condition("clean", "clean"), "56.6"},
          {"WoodScape", grid_condition("clean", "soiled"), "34.8"},
          {"WoodScape", grid_condition("soiled", "clean"), "52.1"},
          {"WoodScape", grid_condition("soiled", "soiled"), "48.2"},
          {"Cityscapes", grid_condition("clean", "clean"), "38.1"},
          {"Cityscapes", grid_condition("clean", "soiled"), "26.6"},
          {"Cityscapes", grid_condition("soiled", "clean"), "35.5"},
          {"Cityscapes", grid_condition("soiled", "soiled"), "38.0"}};
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  throw ParameterError("unknown report format '" + name + "' (expected csv or markdown)");
}

std::string emit_report(const ExperimentReport& report, ReportFormat format) {
  if (report.rows.empty()) throw ValidationError("cannot emit an empty report");
  validate(report);
  switch (format) {
    case ReportFormat::csv: {
      std::string out = std::string(kCsvHeader) + "\n";
      for (const auto& r : report.rows) {
        out += r.condition + "," + r.metric + "," + format_g17(r.value) + "," + std::to_string(r.n_images) + "," +
               std::to_string(r.seed) + "\n";
      }
      return out;
    }
    case ReportFormat::markdown:
      return report.kind == ReportKind::degradation ? markdown_degradation(report) : markdown_augmentation(report);
  }
  throw ParameterError("unknown report format");
}

std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw FormatError("report CSV lacks the expected header");
  std::vector<ReportRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 5) throw FormatError("report CSV line " + std::to_string(lineno) + " has " +
                                         std::to_string(f.size()) + " fields");
    try {
      std::size_t used = 0;
      ReportRow r{f[0], f[1], std::stod(f[2], &used), 0, 0};
      if (used != f[2].size()) throw std::invalid_argument("trailing characters");
      r.n_images = std::stoi(f[3]);
      r.seed = std::stoull(f[4]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("report CSV line " + std::to_string(lineno) + " has a malformed number");
    }
  }
  return rows;
}

// --- experiments ----------------------------------------------------------------------

ExperimentReport run_augmentation_experiment(const AugmentationData& data, const SegBudget& budget) {
  check_budget(budget);
  if (data.real_train.empty() || data.real_test.empty()) {
    throw DataError("augmentation experiment needs non-empty real train and test splits");
  }
  if (data.generated.empty()) throw DataError("augmentation experiment needs a generated corpus");
  struct Condition {
    const char* name;
    std::vector<SegSample> train;
    bool augment;
  };
  const std::vector<Condition> conditions{{kGeneratedOnly, data.generated, false},
                                          {kRealOnly, data.real_train, false},
                                          {kRealClassic, data.real_train, true},
                                          {kRealGenerated, concat(data.real_train, data.generated), false}};
  ExperimentReport report;
  report.kind = ReportKind::augmentation;
  report.references = augmentation_references();
  for (auto seed : budget.seeds) {
    for (const auto& c : conditions) {
      const auto model = train_model(c.train, budget, c.augment, derive_seed(seed, std::string("aug.") + c.name));
      report.rows.push_back({c.name, "miou", evaluate(model, data.real_test), static_cast<int>(c.train.size()), seed});
    }
  }
  return report;
}

std::string grid_condition(const std::string& train, const std::string& test) {
  return "train-" + train + "/test-" + test;
}

ExperimentReport run_degradation_experiment(const DegradationData& data, const SegBudget& budget) {
  check_budget(budget);
  if (data.clean_train.empty() || data.clean_test.empty() || data.soiled_train.empty() || data.soiled_test.empty()) {
    throw DataError("degradation experiment needs clean and soiled train/test splits");
  }
  if (data.clean_train.size() != data.soiled_train.size() || data.clean_test.size() != data.soiled_test.size()) {
    throw DataError("clean and soiled splits are not paired");
  }
  ExperimentReport report;
  report.kind = ReportKind::degradation;
  report.references = degradation_references();
  for (auto seed : budget.seeds) {
    for (const char* train : kDomains) {
      const bool clean = std::string(train) == "clean";
      const auto& train_set = clean ? data.clean_train : data.soiled_train;
      const auto model = train_model(train_set, budget, false, derive_seed(seed, std::string("deg.") + train));
      const int n = static_cast<int>(train_set.size());
      report.rows.push_back({grid_condition(train, "clean"), "miou", evaluate(model, data.clean_test),
                             static_cast<int>(data.clean_test.size()), seed});
      report.rows.push_back({grid_condition(train, "soiled"), "miou", evaluate(model, data.soiled_test),
                             static_cast<int>(data.soiled_test.size()), seed});
      report.rows.push_back({grid_condition(train, "train-split"), "miou", evaluate(model, train_set), n, seed});
    }
  }
  return report;
}

// --- corpus adapters ---------------------------------------------------------------------

AugmentationData augmentation_data(const dataset::Corpus& real, const dataset::Corpus& generated, int num_classes,
                                   double transparent_alpha) {
  if (num_classes != 2 && num_classes != 3) throw ParameterError("soiling segmentation uses 2 or 3 classes");
  AugmentationData out;
  for (const auto* e : real.split(dataset::Split::train)) {
    const Image img = real.dirty(*e);
    const auto polygons = real.annotation(*e);
    const SoilingMask weak = imaging::rasterize(polygons, img.height(), img.width(),
                                                imaging::RasterizeOptions{static_cast<float>(transparent_alpha)});
    out.real_train.push_back({img, dataset::soiling_labels(weak, num_classes)});
  }
  for (const auto* e : real.split(dataset::Split::test)) {
    out.real_test.push_back({real.dirty(*e), soiling_codes(real.soiling(*e), num_classes)});
  }
  for (const auto& e : generated.manifest().entries) {
    out.generated.push_back({generated.dirty(e), dataset::soiling_labels(generated.mask(e), num_classes)});
  }
  if (out.real_train.empty() || out.real_test.empty()) {
    throw DataError("real corpus of " + std::to_string(real.manifest().entries.size()) +
                    " entries is too small for a train/test split");
  }
  return out;
}

DegradationData degradation_data(const dataset::Corpus& corpus) {
  DegradationData out;
  std::vector<std::string> unpaired;
  for (const auto& e : corpus.manifest().entries) {
    if (!e.dirty_path || !e.mask_path || !e.labels_path) {
      unpaired.push_back(e.id);
      continue;
    }
    const ClassMap labels = corpus.labels(e);
    SegSample clean{corpus.clean(e), labels};
    SegSample soiled{corpus.dirty(e), dataset::degrade_labels(labels, corpus.mask(e))};
    if (e.split == dataset::Split::train) {
      out.clean_train.push_back(std::move(clean));
      out.soiled_train.push_back(std::move(soiled));
    } else {
      out.clean_test.push_back(std::move(clean));
      out.soiled_test.push_back(std::move(soiled));
    }
  }
  if (!unpaired.empty()) {
    std::string ids;
    for (const auto& id : unpaired) ids += (ids.empty() ? "" : ", ") + id;
    throw DataError("entries without a dirty image, mask or labels: " + ids);
  }
  if (out.clean_train.empty() || out.clean_test.empty()) {
    throw DataError("corpus is too small for a train/test split");
  }
  return out;
}

}  // namespace soilgen::eval
