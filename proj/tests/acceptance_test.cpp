// Acceptance suite. Prints one PASS/FAIL line per criterion; exits nonzero
// when any criterion fails. Optional arguments pick criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "soilgen/arch.hpp"
#include "soilgen/cyclegan.hpp"
#include "soilgen/dataset.hpp"
#include "soilgen/error.hpp"
#include "soilgen/experiments.hpp"
#include "soilgen/gradcheck.hpp"
#include "soilgen/imaging.hpp"
#include "soilgen/metrics.hpp"
#include "soilgen/png_io.hpp"
#include "soilgen/seed.hpp"
#include "soilgen/soilseg.hpp"
#include "soilgen/vae.hpp"
#include "test_util.hpp"

using namespace soilgen;
namespace fs = std::filesystem;
namespace sa = soilgen::arch;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1: composition identities ----------------------------------------------

Outcome composition_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 12), fac(1, 4), ch(0, 1);
  int failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const int f = fac(rng), h = dim(rng), w = dim(rng), c = ch(rng) ? 3 : 1;
    const auto clean = testutil::random_image(h * f, w * f, c, rng);
    const auto soiled = testutil::random_image(h, w, c, rng);
    if (imaging::compose(clean, soiled, SoilingMask(h, w, 0.0f), f).image != clean) ++failures;
    if (imaging::compose(clean, soiled, SoilingMask(h, w, 1.0f), f).image != imaging::upscale(soiled, f)) ++failures;
    // m <-> 1 - m at equal resolution; dyadic alphas keep 1 - m exact
    const auto a = testutil::random_image(h, w, c, rng);
    const auto m = testutil::random_dyadic_mask(h, w, rng);
    SoilingMask inv = m;
    for (auto& v : inv.data()) v = 1.0f - v;
    if (imaging::compose(a, soiled, m, 1).image != imaging::compose(soiled, a, inv, 1).image) ++failures;
  }
  const double sec = seconds_since(t0);
  return {failures == 0 && sec < 60,
          std::to_string(failures) + " mismatches in 1000 cases, " + fmt("%.1f s", sec)};
}

// --- shared DirtyGAN pipeline (criteria 2, 8, 10) ---------------------------

struct Pipeline {
  testutil::TempDir dir{"acceptance"};
  fs::path real_root, source_root, generated_root;
  vae::VaeModel vae;
  seg::SegModel seg;
  gan::CycleGanModel gan;
  std::vector<SoilingMask> bank;  // VAE resolution
  static constexpr int kSize = 32;
  static constexpr int kFactor = 2;

  dataset::DirtGenerator generator() const {
    dataset::DirtGenerator g;
    g.config_digest = "acceptance-dirtygan";
    g.generate = [this](const Image& clean, std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      SoilingMask m = gan::sample_vae_mask(vae, bank, rng, vae.mask_size());
      m = imaging::resize(m, clean.height() / kFactor, clean.width() / kFactor);
      gan::GenerateOptions opts;
      opts.factor = kFactor;
      return gan::generate_soiled(gan, clean, m, opts);
    };
    return g;
  }
};

const Pipeline& pipeline() {
  static std::unique_ptr<Pipeline> p;
  if (p) return *p;
  const auto t0 = std::chrono::steady_clock::now();
  p = std::make_unique<Pipeline>();
  p->real_root = p->dir / "real";
  p->source_root = p->dir / "source";
  p->generated_root = p->dir / "generated";

  dataset::ProceduralSceneSpec spec;
  spec.height = spec.width = Pipeline::kSize;
  spec.seed = 11;
  dataset::write_procedural_corpus(spec, 60, p->real_root);
  spec.seed = 12;  // clean images to soil, disjoint from the real corpus
  dataset::write_procedural_corpus(spec, 60, p->source_root);
  const auto real = dataset::load_corpus(p->real_root);

  // Masks for the VAE and weak labels for M both come from the polygon annotations.
  std::vector<Image> clean, dirty;
  std::vector<ClassMap> weak;
  std::vector<SoilingMask> polygon_masks;
  for (const auto* e : real.split(dataset::Split::train)) {
    clean.push_back(real.clean(*e));
    dirty.push_back(real.dirty(*e));
    const auto m = imaging::rasterize(real.annotation(*e), Pipeline::kSize, Pipeline::kSize);
    polygon_masks.push_back(m);
    weak.push_back(dataset::soiling_labels(m, 3));
  }

  p->vae = vae::VaeModel::create({16, 16, 16, 16}, 1);
  for (const auto& m : polygon_masks) p->bank.push_back(vae::prepare_mask(p->vae, m));
  vae::TrainConfig vc;
  vc.steps = 600;
  vc.seed = 1;
  vae::train_vae(p->vae, p->bank, vc);

  p->seg = seg::SegModel::create({3, 3, 8, 1}, Pipeline::kSize, 1, {1e-3});
  seg::TrainConfig sc;
  sc.steps = 300;
  sc.batch = 4;
  sc.seed = 1;
  seg::train_seg(p->seg, dirty, weak, sc);

  p->gan = gan::CycleGanModel::create({{3, 16, 2}, {3, 16}, 50}, 1);
  gan::DirtyConfig gc;
  gc.steps = 500;
  gc.downscale = Pipeline::kFactor;
  gc.seed = 1;
  gan::train_dirtygan(p->gan, p->vae, p->seg, clean, dirty, p->bank, gc);

  dataset::write_dirty_dataset(dataset::load_corpus(p->source_root), p->generator(), 7, p->generated_root);
  std::printf("  (pipeline trained in %.1f s)\n", seconds_since(t0));
  return *p;
}

// --- 2: background locality -------------------------------------------------

Outcome background_locality() {
  const auto& p = pipeline();
  const auto source = dataset::load_corpus(p.source_root);
  const auto gen = p.generator();
  std::size_t background = 0, changed = 0, samples = 0;
  double worst = 0.0;
  for (int round = 0; samples < 100; ++round) {
    for (const auto& e : source.manifest().entries) {
      if (samples == 100) break;
      const Image clean = source.clean(e);
      const auto out = gen.generate(clean, derive_seed(round, e.id));
      for (int r = 0; r < clean.height(); ++r) {
        for (int c = 0; c < clean.width(); ++c) {
          if (out.annotation.at(r, c) != 0.0f) continue;
          ++background;
          for (int k = 0; k < clean.channels(); ++k) {
            const double d = std::abs(double(out.image.at(r, c, k)) - clean.at(r, c, k));
            worst = std::max(worst, d);
            changed += d != 0.0;
          }
        }
      }
      ++samples;
    }
  }
  // the masked translation itself, at the GAN resolution
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto x = testutil::random_image(16, 16, 3, rng);
    const auto m = gan::sample_vae_mask(p.vae, p.bank, rng, 16);
    const auto y = gan::masked_translate(p.gan.g_c2s.net, x, m);
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c)
        for (int k = 0; k < 3; ++k) changed += m.at(r, c) == 0.0f && y.at(r, c, k) != x.at(r, c, k);
  }
  return {changed == 0 && background > 0,
          std::to_string(samples) + " samples, " + std::to_string(background) +
              " background pixels, max |out - in| = " + fmt("%g", worst)};
}

// --- 3: gradient checks -----------------------------------------------------

nn::Tensor<double> random_tensor(std::array<int, 4> shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  nn::Tensor<double> t(shape);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    std::string name;
    sa::ArchDescriptor arch;
    std::array<int, 4> input;
  };
  std::vector<Case> cases;
  const auto single = [](std::vector<sa::LayerSpec> layers, int channels, int h, int w) {
    return sa::ArchDescriptor{"single", channels, h, w, std::move(layers)};
  };
  const auto token = [](const char* t) { return sa::parse_layer_spec(t); };
  // every layer kind, activation and normalization
  cases.push_back({"conv", single({token("c3s1-3")}, 2, 5, 5), {2, 2, 5, 5}});
  cases.push_back({"conv-stride2-leaky", single({token("c4s2-3-LR")}, 2, 6, 6), {2, 2, 6, 6}});
  cases.push_back({"conv-tanh", single({token("c7s1-2-T")}, 3, 8, 8), {1, 3, 8, 8}});
  cases.push_back({"conv-relu-instance", single({token("c3s2-2-R-IN")}, 2, 6, 6), {2, 2, 6, 6}});
  cases.push_back({"conv-sigmoid-batch", single({token("c3s1-3-S-BN")}, 2, 4, 4), {3, 2, 4, 4}});
  cases.push_back({"transposed-conv", single({token("tc3s2-2-R")}, 3, 3, 3), {2, 3, 3, 3}});
  cases.push_back({"transposed-conv-even", single({token("tc4s2-2")}, 2, 3, 3), {1, 2, 3, 3}});
  cases.push_back({"residual", single({token("r-3")}, 3, 4, 4), {1, 3, 4, 4}});
  cases.push_back({"residual-instance", single({token("r-3-IN")}, 3, 4, 4), {2, 3, 4, 4}});
  cases.push_back({"residual-batch", single({token("r-2-BN")}, 2, 4, 4), {3, 2, 4, 4}});
  cases.push_back({"upsample", single({token("up2")}, 2, 3, 3), {1, 2, 3, 3}});
  cases.push_back({"reflection-pad", single({token("rp-2")}, 2, 4, 5), {1, 2, 4, 5}});
  cases.push_back({"flatten-dense", single({sa::flatten(), token("d-5-S")}, 2, 3, 3), {2, 2, 3, 3}});
  cases.push_back(
      {"dense-reshape", single({sa::flatten(), token("d-8"), sa::reshape(2, 2, 2), token("c3s1-2")}, 2, 2, 2),
       {2, 2, 2, 2}});
  // builtins at small widths
  const sa::VaeShape vs{4, 8, 4, 4};
  cases.push_back({"generator", sa::generator({3, 4, 1}), {1, 3, 8, 8}});
  cases.push_back({"discriminator", sa::discriminator({3, 4}), {2, 3, 8, 8}});
  cases.push_back({"mask-segmentation", sa::mask_segmentation({3, 3, 4, 1}), {2, 3, 8, 8}});
  cases.push_back({"vae-encoder", sa::vae_encoder(vs), {2, 1, 8, 8}});
  cases.push_back({"vae-decoder", sa::vae_decoder(vs), {2, 4, 1, 1}});

  double worst = 0.0;
  std::string worst_case, failed;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const nn::Network<double> net(c.arch, nn::init_params<double>(c.arch, 17 + i, 0.3));
    nn::GradCheckOptions opt;
    opt.step = 1e-5;
    opt.seed = 7;
    const auto report = nn::gradient_check(net, random_tensor(c.input, 23 + i), opt);
    if (report.max_rel_error > worst) {
      worst = report.max_rel_error;
      worst_case = c.name + " " + report.worst;
    }
    if (!report.passed(1e-4)) failed += (failed.empty() ? "" : ", ") + c.name;
  }
  const double sec = seconds_since(t0);
  return {failed.empty() && sec < 300, std::to_string(cases.size()) + " networks, max rel error " +
                                           fmt("%.2e", worst) + " (" + worst_case + ")" +
                                           (failed.empty() ? "" : ", failed: " + failed) + fmt(", %.1f s", sec)};
}

// --- 4: metric oracle -------------------------------------------------------

Outcome metric_oracle() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto gt = testutil::random_classes(8, 8, 3, rng);
    const auto pred = testutil::random_classes(8, 8, 3, rng);
    metrics::ConfusionMatrix cm(3);
    metrics::accumulate(cm, gt, pred);
    double sum = 0;
    int present = 0;
    for (int k = 0; k < 3; ++k) {
      std::set<int> a, b;
      for (int i = 0; i < 64; ++i) {
        if (gt.data()[i] == k) a.insert(i);
        if (pred.data()[i] == k) b.insert(i);
      }
      std::set<int> inter, uni;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(inter, inter.end()));
      std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(uni, uni.end()));
      if (uni.empty()) continue;
      sum += double(inter.size()) / double(uni.size());
      ++present;
    }
    worst = std::max(worst, std::abs(metrics::miou(cm).miou - sum / present));
  }
  // all-A prediction against half A, half B
  ClassMap gt(2, 2), pred(2, 2, 0);
  gt.at(0, 0) = gt.at(0, 1) = 0;
  gt.at(1, 0) = gt.at(1, 1) = 1;
  metrics::ConfusionMatrix cm(2);
  metrics::accumulate(cm, gt, pred);
  const double example = metrics::miou(cm).miou;
  return {worst <= 1e-12 && example == 0.25,
          "max deviation " + fmt("%.1e", worst) + " over 200 maps, worked example " + fmt("%.17g", example)};
}

// --- 5: descriptor round trip -----------------------------------------------

sa::LayerSpec random_spec(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const sa::Activation acts[] = {sa::Activation::none, sa::Activation::relu, sa::Activation::leaky_relu,
                                 sa::Activation::tanh, sa::Activation::sigmoid};
  const sa::Norm norms[] = {sa::Norm::none, sa::Norm::instance, sa::Norm::batch};
  switch (pick(0, 7)) {
    case 0: return sa::conv(pick(1, 11), pick(1, 4), pick(1, 4096), acts[pick(0, 4)], norms[pick(0, 2)]);
    case 1: {
      const int s = pick(1, 4);
      return sa::transposed_conv(pick(s, 11), s, pick(1, 4096), acts[pick(0, 4)]);
    }
    case 2: return sa::reflection_pad(pick(1, 9));
    case 3: return sa::residual_block(pick(1, 1024), norms[pick(0, 2)]);
    case 4: return sa::upsample(pick(1, 8));
    case 5: return sa::flatten();
    case 6: return sa::dense(pick(1, 100000), acts[pick(0, 4)]);
    default: return sa::reshape(pick(1, 512), pick(1, 64), pick(1, 64));
  }
}

Outcome descriptor_round_trip() {
  std::mt19937_64 rng(505);
  int failures = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto s = random_spec(rng);
    const auto text = sa::canonical_format(s);
    if (!(sa::parse_layer_spec(text) == s) || sa::canonical_format(sa::parse_layer_spec(text)) != text) ++failures;
  }
  using A = sa::Activation;
  const std::pair<const char*, sa::LayerSpec> examples[] = {
      {"c7s1-32-R", sa::conv(7, 1, 32, A::relu)},
      {"c4s2-64-LR", sa::conv(4, 2, 64, A::leaky_relu)},
      {"tc3s2-256-R", sa::transposed_conv(3, 2, 256, A::relu)},
      {"rp-1", sa::reflection_pad(1)},
  };
  int example_failures = 0;
  for (const auto& [text, spec] : examples) {
    if (!(sa::parse_layer_spec(text) == spec) || sa::canonical_format(spec) != text) ++example_failures;
  }
  return {failures == 0 && example_failures == 0, std::to_string(failures) + " of 20000 random specs differ, " +
                                                      std::to_string(example_failures) + " of 4 example tokens"};
}

// --- 6: VAE fit -------------------------------------------------------------

Outcome vae_fit() {
  const auto t0 = std::chrono::steady_clock::now();
  dataset::ProceduralSceneSpec spec;
  spec.height = spec.width = 32;
  spec.seed = 1;
  std::vector<SoilingMask> masks;
  for (const auto& s : dataset::generate_procedural_corpus(spec, 50)) masks.push_back(s.mask);
  auto model = vae::VaeModel::create({}, 1, {1e-3});
  vae::TrainConfig cfg;
  cfg.steps = 2000;
  cfg.batch = 16;
  cfg.seed = 1;
  const auto trace = vae::train_vae(model, masks, cfg);
  const double sec = seconds_since(t0);

  const bool kl_ok = std::all_of(trace.step_kl.begin(), trace.step_kl.end(), [](double k) { return k >= 0.0; });
  double iou = 0, iou_low = 0;
  for (const auto& m : masks) {
    const auto r = vae::decode(model, vae::encode(model, m).mu);
    iou += metrics::binary_iou(r, m, 0.5f);
    iou_low += metrics::binary_iou(r, m, 0.25f);
  }
  iou /= masks.size();
  iou_low /= masks.size();

  const auto z1 = vae::encode(model, masks[0]).mu, z2 = vae::encode(model, masks[1]).mu;
  const bool endpoints = vae::interpolate(z1, z2, 1.0) == z1 && vae::interpolate(z1, z2, 0.0) == z2;
  const auto walk = vae::manifold_walk(model, masks[0], masks[1], 12);
  const bool layout = walk.size() == 12 && walk.front() == vae::decode(model, z1) && walk.back() == vae::decode(model, z2);

  return {iou >= 0.7 && kl_ok && endpoints && layout && sec <= 600,
          "mean IoU " + fmt("%.4f", iou) + " at 0.5 (" + fmt("%.4f", iou_low) + " at 0.25), KL >= 0 " +
              (kl_ok ? "throughout" : "violated") + ", endpoints " + (endpoints ? "exact" : "inexact") +
              ", 12-frame walk " + (layout ? "ok" : "wrong") + fmt(", %.1f s", sec)};
}

// --- 7: CycleGAN toy training -----------------------------------------------

Outcome cyclegan_toy() {
  std::string detail;
  bool pass = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto t0 = std::chrono::steady_clock::now();
    dataset::ProceduralSceneSpec spec;
    spec.noise_amplitude = 0;
    spec.min_shapes = spec.max_shapes = 0;
    spec.seed = seed;
    const auto corpus = dataset::generate_procedural_corpus(spec, 40);
    std::vector<Image> clean, soiled;
    for (int i = 0; i < 20; ++i) clean.push_back(corpus[i].clean);
    for (int i = 20; i < 40; ++i) soiled.push_back(corpus[i].soiled);
    auto model = gan::CycleGanModel::create({}, seed);
    gan::TrainConfig cfg;
    cfg.steps = 2000;
    cfg.downscale = 4;
    cfg.seed = seed;
    const auto trace = gan::train_cyclegan(model, clean, soiled, cfg);
    const double sec = seconds_since(t0);
    double first = 0, last = 0;
    for (int i = 0; i < 100; ++i) {
      first += trace.cycle(i) / 100;
      last += trace.cycle(cfg.steps - 100 + i) / 100;
    }
    const bool ok = last <= 0.5 * first && sec <= 1800;
    pass &= ok;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " " + fmt("%.4f", first) +
              " -> " + fmt("%.4f", last) + fmt(" (-%.1f%%", 100 * (1 - last / first)) + fmt(", %.0f s)", sec);
  }
  return {pass, detail};
}

// --- 8: augmentation trend --------------------------------------------------

bool contains_references(const std::string& markdown, const std::vector<eval::ReferenceValue>& refs) {
  return std::all_of(refs.begin(), refs.end(),
                     [&](const auto& r) { return markdown.find(r.value) != std::string::npos; });
}

Outcome augmentation_trend() {
  const auto& p = pipeline();
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = eval::augmentation_data(dataset::load_corpus(p.real_root),
                                            dataset::load_corpus(p.generated_root), 2);
  eval::SegBudget budget;
  budget.shape = {3, 2, 16, 1};
  budget.working_size = 32;
  budget.steps = 1500;  // long enough that the larger mixed set is not under-trained
  budget.batch = 4;
  budget.lr = 1e-3;
  const auto report = eval::run_augmentation_experiment(data, budget);
  const auto md = eval::emit_report(report, eval::ReportFormat::markdown);
  std::printf("%s", md.c_str());
  const double real = *eval::median_value(report, eval::kRealOnly);
  const double mixed = *eval::median_value(report, eval::kRealGenerated);
  const bool refs = contains_references(md, eval::augmentation_references());
  return {mixed >= real && refs, "median mIoU real+generated " + fmt("%.4f", mixed) + " vs real-only " +
                                     fmt("%.4f", real) + ", references " + (refs ? "present" : "missing") +
                                     fmt(", %.0f s", seconds_since(t0))};
}

// --- 9: degradation trend ---------------------------------------------------

Outcome degradation_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  testutil::TempDir dir("degradation");
  dataset::ProceduralSceneSpec spec;
  spec.height = spec.width = 32;
  spec.seed = 21;
  dataset::write_procedural_corpus(spec, 60, dir / "corpus");
  const auto data = eval::degradation_data(dataset::load_corpus(dir / "corpus"));
  eval::SegBudget budget;
  budget.shape = {3, dataset::kSceneClasses, 16, 1};
  budget.working_size = 32;
  budget.steps = 600;
  budget.batch = 4;
  budget.lr = 1e-3;
  const auto report = eval::run_degradation_experiment(data, budget);
  const auto md = eval::emit_report(report, eval::ReportFormat::markdown);
  std::printf("%s", md.c_str());
  const double cc = *eval::median_value(report, eval::grid_condition("clean", "clean"));
  const double cs = *eval::median_value(report, eval::grid_condition("clean", "soiled"));
  const bool grid = md.find("| Train\\Test | Clean | Soiled |") != std::string::npos;
  const bool refs = contains_references(md, eval::degradation_references());
  return {cc - cs >= 0.05 && grid && refs,
          "clean-trained median mIoU " + fmt("%.4f", cc) + " on clean vs " + fmt("%.4f", cs) + " on soiled (" +
              fmt("%.1f", 100 * (cc - cs)) + " points), grid " + (grid ? "present" : "missing") + ", references " +
              (refs ? "present" : "missing") + fmt(", %.0f s", seconds_since(t0))};
}

// --- 10: annotation consistency ---------------------------------------------

Outcome annotation_consistency() {
  const auto& p = pipeline();
  const auto source = dataset::load_corpus(p.source_root);
  const auto written = dataset::load_corpus(p.generated_root);
  const auto gen = p.generator();
  double worst = 0.0;
  std::size_t entries = 0;
  for (const auto& e : written.manifest().entries) {
    const auto used = gen.generate(source.clean(e), derive_seed(7, e.id)).annotation;
    const auto emitted = written.mask(e);
    if (!emitted.same_size(used)) return {false, "mask size differs for " + e.id};
    for (std::size_t i = 0; i < used.data().size(); ++i) {
      worst = std::max(worst, std::abs(double(emitted.data()[i]) - used.data()[i]));
    }
    ++entries;
  }
  return {entries > 0 && worst <= 1.0 / 255.0,
          std::to_string(entries) + " entries, max |annotation - alpha| = " + fmt("%.3g", worst) + " (1/255 = " +
              fmt("%.3g", 1.0 / 255) + ")"};
}

// --- 11: CLI reproducibility ------------------------------------------------

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::printf("  %s", err.str().c_str());
  return code;
}

// Empty when the trees hold identical files.
std::string tree_difference(const fs::path& a, const fs::path& b) {
  std::map<std::string, std::string> fa, fb;
  for (const auto& [root, files] : {std::pair{a, &fa}, std::pair{b, &fb}}) {
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) (*files)[fs::relative(e.path(), root).string()] = read_bytes(e.path());
    }
  }
  if (fa.size() != fb.size()) return "file counts differ";
  for (const auto& [rel, bytes] : fa) {
    const auto it = fb.find(rel);
    if (it == fb.end() || it->second != bytes) return rel;
  }
  return "";
}

Outcome cli_reproducibility() {
  testutil::TempDir dir("repro");
  const auto d = [&](const std::string& s) { return (dir / s).string(); };
  if (invoke({"gen-corpus", "--set", "n=12", "--set", "size=32", "--seed", "3", "--out", d("corpus")}) != 0)
    return {false, "gen-corpus failed"};
  if (invoke({"train-gan", "--set", "corpus=" + d("corpus"), "--set", "steps=3", "--set", "base_width=4", "--set",
              "residual_blocks=1", "--set", "disc_width=4", "--set", "downscale=2", "--out", d("gan")}) != 0)
    return {false, "train-gan failed"};
  if (invoke({"train-vae", "--set", "corpus=" + d("corpus"), "--set", "steps=3", "--set", "batch=2", "--set",
              "width=4", "--set", "latent_dim=4", "--set", "mask_size=16", "--out", d("vae")}) != 0)
    return {false, "train-vae failed"};

  const std::map<std::string, std::vector<std::string>> runs{
      {"gen-corpus", {"gen-corpus", "--set", "n=6", "--set", "size=32", "--seed", "5"}},
      {"generate",
       {"generate", "--set", "corpus=" + d("corpus"), "--set", "gan=" + d("gan"), "--set", "vae=" + d("vae"), "--set",
        "factor=2", "--seed", "8"}},
      {"walk",
       {"walk", "--set", "vae=" + d("vae"), "--set", "corpus=" + d("corpus"), "--set", "gan=" + d("gan"), "--set",
        "factor=2", "--set", "sample=true", "--seed", "9"}},
  };
  std::string detail;
  bool pass = true;
  for (const auto& [name, args] : runs) {
    auto first = args, second = args;
    first.insert(first.end(), {"--out", d(name + "_a")});
    second.insert(second.end(), {"--out", d(name + "_b")});
    const std::vector<std::string> replay{name, "--config", d(name + "_a/run.cfg"), "--out", d(name + "_c")};
    if (invoke(first) != 0 || invoke(second) != 0 || invoke(replay) != 0) {
      pass = false;
      detail += name + " failed to run; ";
      continue;
    }
    const auto diff_repeat = tree_difference(d(name + "_a"), d(name + "_b"));
    const auto diff_replay = tree_difference(d(name + "_a"), d(name + "_c"));
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(d(name + "_a"))) files += e.is_regular_file();
    pass &= diff_repeat.empty() && diff_replay.empty();
    detail += name + " " + std::to_string(files) + " files " +
              (diff_repeat.empty() && diff_replay.empty() ? "identical"
                                                           : "differ (" + diff_repeat + diff_replay + ")") +
              "; ";
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"composition identities", composition_identities},
      {"background locality", background_locality},
      {"gradient verification", gradient_checks},
      {"metric oracle", metric_oracle},
      {"descriptor round trip", descriptor_round_trip},
      {"VAE desk-scale fit", vae_fit},
      {"CycleGAN toy training", cyclegan_toy},
      {"augmentation trend", augmentation_trend},
      {"degradation trend", degradation_trend},
      {"annotation consistency", annotation_consistency},
      {"CLI reproducibility", cli_reproducibility},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
