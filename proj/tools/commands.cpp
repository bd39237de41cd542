#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "config.hpp"
#include "soilgen/checkpoint.hpp"
#include "soilgen/cyclegan.hpp"
#include "soilgen/dataset.hpp"
#include "soilgen/error.hpp"
#include "soilgen/experiments.hpp"
#include "soilgen/imaging.hpp"
#include "soilgen/png_io.hpp"
#include "soilgen/seed.hpp"
#include "soilgen/soilseg.hpp"
#include "soilgen/vae.hpp"

#ifndef SOILGEN_VERSION
#define SOILGEN_VERSION "unknown"
#endif

namespace soilgen::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f << text;
    if (!f.flush()) throw WriteError("cannot write " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw WriteError("cannot write " + path.string() + ": " + ec.message());
}

std::string file_digest(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return hex_digest(fnv1a64(ss.str()));
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      seeds.push_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError("'seeds' expects comma-separated integers, got '" + text + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("'seeds' must list at least one seed");
  return seeds;
}

void write_trace(const fs::path& path, const std::vector<std::pair<std::string, const std::vector<double>*>>& cols) {
  std::ostringstream out;
  out << "step";
  for (const auto& c : cols) out << "," << c.first;
  out << "\n";
  const std::size_t n = cols.empty() ? 0 : cols.front().second->size();
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    out << i;
    for (const auto& c : cols) {
      std::snprintf(buf, sizeof buf, "%.9g", (*c.second)[i]);
      out << "," << buf;
    }
    out << "\n";
  }
  write_text(path, out.str());
}

// --- commands -------------------------------------------------------------------

void gen_corpus(const RunConfig& c, const fs::path& out) {
  dataset::ProceduralSceneSpec spec;
  spec.height = spec.width = static_cast<int>(c.integer("size"));
  spec.min_shapes = static_cast<int>(c.integer("min_shapes"));
  spec.max_shapes = static_cast<int>(c.integer("max_shapes"));
  spec.min_blobs = static_cast<int>(c.integer("min_blobs"));
  spec.max_blobs = static_cast<int>(c.integer("max_blobs"));
  spec.min_blob_radius = c.real("min_blob_radius");
  spec.max_blob_radius = c.real("max_blob_radius");
  spec.transparent_fraction = c.real("transparent_fraction");
  spec.transparent_alpha = c.real("transparent_alpha");
  spec.soil_sigma = c.real("sigma");
  spec.seed = c.seed();
  dataset::write_procedural_corpus(spec, static_cast<int>(c.integer("n")), out);
}

std::vector<SoilingMask> corpus_masks(const dataset::Corpus& corpus, dataset::Split split) {
  std::vector<SoilingMask> masks;
  for (const auto* e : corpus.split(split)) {
    if (e->mask_path) masks.push_back(corpus.mask(*e));
  }
  return masks;
}

void train_vae(const RunConfig& c, const fs::path& out) {
  const auto corpus = dataset::load_corpus(c.text("corpus"));
  const int size = static_cast<int>(c.integer("mask_size"));
  if (size % 8) throw ConfigError("'mask_size' must be a multiple of 8");
  arch::VaeShape shape{static_cast<int>(c.integer("latent_dim")), size, static_cast<int>(c.integer("width")),
                       static_cast<int>(c.integer("width"))};
  auto model = vae::VaeModel::create(shape, derive_seed(c.seed(), "train-vae"), nn::AdamConfig{c.real("lr")});
  std::vector<SoilingMask> masks;
  for (const auto& m : corpus_masks(corpus, dataset::Split::train)) masks.push_back(vae::prepare_mask(model, m));
  vae::TrainConfig cfg;
  cfg.steps = static_cast<int>(c.integer("steps"));
  cfg.batch = static_cast<int>(c.integer("batch"));
  cfg.beta = c.real("beta");
  cfg.seed = derive_seed(c.seed(), "train-vae.steps");
  const auto trace = vae::train_vae(model, masks, cfg);
  vae::save(model, out);
  write_trace(out / "trace.csv", {{"total", &trace.step_total}, {"kl", &trace.step_kl}});
}

seg::SegModel make_seg(const RunConfig& c, int num_classes) {
  arch::MaskSegShape shape{3, num_classes, static_cast<int>(c.integer("width")),
                           static_cast<int>(c.integer("residual_blocks"))};
  const int ws = static_cast<int>(c.integer("working_size"));
  if (ws % 4) throw ConfigError("'working_size' must be a multiple of 4");
  return seg::SegModel::create(shape, ws, derive_seed(c.seed(), "train-seg"), nn::AdamConfig{c.real("lr")});
}

void train_seg(const RunConfig& c, const fs::path& out) {
  const auto corpus = dataset::load_corpus(c.text("corpus"));
  const int nc = static_cast<int>(c.integer("num_classes"));
  const std::string labels = c.text("labels");
  if (labels != "weak" && labels != "precise") throw ConfigError("'labels' must be weak or precise");
  auto model = make_seg(c, nc);
  model.transparent_alpha = c.real("transparent_alpha");
  std::vector<Image> images;
  std::vector<ClassMap> maps;
  for (const auto* e : corpus.split(dataset::Split::train)) {
    Image img = e->dirty_path ? corpus.dirty(*e) : corpus.clean(*e);
    ClassMap m;
    if (labels == "weak") {
      const auto polys = corpus.annotation(*e);
      const auto alpha = imaging::rasterize(polys, img.height(), img.width(),
                                            {static_cast<float>(model.transparent_alpha)});
      m = dataset::soiling_labels(alpha, nc);
    } else {
      m = corpus.soiling(*e);
      if (nc == 2) m = dataset::binary_soiling(m);
    }
    images.push_back(std::move(img));
    maps.push_back(std::move(m));
  }
  seg::TrainConfig cfg;
  cfg.steps = static_cast<int>(c.integer("steps"));
  cfg.batch = static_cast<int>(c.integer("batch"));
  cfg.augment = c.flag("augment");
  cfg.seed = derive_seed(c.seed(), "train-seg.steps");
  const auto trace = seg::train_seg(model, images, maps, cfg);
  seg::save(model, out);
  write_trace(out / "trace.csv", {{"loss", &trace.step_loss}});
}

// Unpaired domains from one corpus: clean images of even-indexed training
// entries, dirty images of odd-indexed ones.
void gan_domains(const dataset::Corpus& corpus, std::vector<Image>& clean, std::vector<Image>& soiled) {
  const auto train = corpus.split(dataset::Split::train);
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (i % 2 == 0) {
      clean.push_back(corpus.clean(*train[i]));
    } else {
      soiled.push_back(corpus.dirty(*train[i]));
    }
  }
}

gan::CycleGanModel make_gan(const RunConfig& c) {
  gan::GanShape shape{{3, static_cast<int>(c.integer("base_width")), static_cast<int>(c.integer("residual_blocks"))},
                      {3, static_cast<int>(c.integer("disc_width"))},
                      static_cast<int>(c.integer("pool"))};
  return gan::CycleGanModel::create(shape, derive_seed(c.seed(), "train-gan"),
                                    nn::AdamConfig{c.real("lr"), c.real("beta1"), 0.999, 1e-8});
}

void fill_gan_config(const RunConfig& c, gan::TrainConfig& cfg) {
  cfg.steps = static_cast<int>(c.integer("steps"));
  cfg.batch = static_cast<int>(c.integer("batch"));
  cfg.downscale = static_cast<int>(c.integer("downscale"));
  cfg.lambda_cycle = c.real("lambda_cycle");
  cfg.lambda_identity = c.real("lambda_identity");
  cfg.decay_start = c.real("decay_start");
  cfg.seed = derive_seed(c.seed(), "train-gan.steps");
}

void write_gan_trace(const fs::path& path, const gan::TrainTrace& t) {
  write_trace(path, {{"generator_adv", &t.generator_adv},
                     {"cycle_clean", &t.cycle_clean},
                     {"cycle_soiled", &t.cycle_soiled},
                     {"identity", &t.identity},
                     {"d_soiled_real", &t.d_soiled_real},
                     {"d_soiled_fake", &t.d_soiled_fake},
                     {"d_clean_real", &t.d_clean_real},
                     {"d_clean_fake", &t.d_clean_fake}});
}

void train_gan(const RunConfig& c, const fs::path& out) {
  const auto corpus = dataset::load_corpus(c.text("corpus"));
  std::vector<Image> clean, soiled;
  gan_domains(corpus, clean, soiled);
  auto model = make_gan(c);
  gan::TrainConfig cfg;
  fill_gan_config(c, cfg);
  const auto trace = gan::train_cyclegan(model, clean, soiled, cfg);
  gan::save(model, out);
  write_gan_trace(out / "trace.csv", trace);
}

void train_dirtygan(const RunConfig& c, const fs::path& out) {
  const auto corpus = dataset::load_corpus(c.text("corpus"));
  const auto vae_model = vae::load(c.text("vae"));
  const auto seg_model = seg::load(c.text("seg"));
  std::vector<Image> clean, soiled;
  gan_domains(corpus, clean, soiled);
  const auto bank = corpus_masks(corpus, dataset::Split::train);
  auto model = make_gan(c);
  gan::DirtyConfig cfg;
  fill_gan_config(c, cfg);
  cfg.sigma = c.real("sigma");
  const auto trace = gan::train_dirtygan(model, vae_model, seg_model, clean, soiled, bank, cfg);
  gan::save(model, out);
  write_gan_trace(out / "trace.csv", trace);
}

void generate(const RunConfig& c, const fs::path& out) {
  const auto corpus = dataset::load_corpus(c.text("corpus"));
  const auto model = gan::load(c.text("gan"));
  const std::string mode = c.text("mode");
  gan::GenerateOptions opts;
  opts.factor = static_cast<int>(c.integer("factor"));
  opts.sigma = c.real("sigma");
  dataset::DirtGenerator generator;
  generator.config_digest = c.digest();
  if (mode == "vae") {
    if (!c.has("vae")) throw ConfigError("mode=vae needs 'vae'");
    auto vae_model = std::make_shared<vae::VaeModel>(vae::load(c.text("vae")));
    auto bank = std::make_shared<std::vector<SoilingMask>>();
    for (const auto& m : corpus_masks(corpus, dataset::Split::train)) bank->push_back(vae::prepare_mask(*vae_model, m));
    generator.generate = [model, vae_model, bank, opts](const Image& clean, std::uint64_t seed) {
      if (clean.height() % opts.factor || clean.width() % opts.factor) {
        throw ShapeError("image size is not divisible by the generation factor");
      }
      std::mt19937_64 rng(seed);
      SoilingMask m = gan::sample_vae_mask(*vae_model, *bank, rng, vae_model->mask_size());
      m = imaging::resize(m, clean.height() / opts.factor, clean.width() / opts.factor);
      return gan::generate_soiled(model, clean, m, opts);
    };
  } else if (mode == "baseline") {
    if (!c.has("seg")) throw ConfigError("mode=baseline needs 'seg'");
    auto seg_model = std::make_shared<seg::SegModel>(seg::load(c.text("seg")));
    generator.generate = [model, seg_model, opts](const Image& clean, std::uint64_t) {
      return gan::generate_soiled_baseline(model, *seg_model, clean, opts);
    };
  } else {
    throw ConfigError("'mode' must be vae or baseline");
  }
  dataset::write_dirty_dataset(corpus, generator, c.seed(), out);
}

const dataset::ManifestEntry& entry_with_mask(const dataset::Corpus& corpus, const std::string& id, int fallback_rank) {
  int rank = 0;
  for (const auto& e : corpus.manifest().entries) {
    if (!e.mask_path) continue;
    if (id.empty() ? rank++ == fallback_rank : e.id == id) return e;
  }
  throw DataError(id.empty() ? "corpus has fewer than two masks" : "no entry '" + id + "' with a mask");
}

void walk(const RunConfig& c, const fs::path& out) {
  const auto model = vae::load(c.text("vae"));
  const auto corpus = dataset::load_corpus(c.text("corpus"));
  const auto& a = entry_with_mask(corpus, c.text("from"), 0);
  const auto& b = entry_with_mask(corpus, c.text("to"), 1);
  vae::WalkOptions opts;
  opts.sample = c.flag("sample");
  opts.seed = derive_seed(c.seed(), "walk");
  const auto masks = vae::manifold_walk(model, vae::prepare_mask(model, corpus.mask(a)),
                                        vae::prepare_mask(model, corpus.mask(b)), static_cast<int>(c.integer("steps")),
                                        opts);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "walk_%03zu.png", i);
    png::write_mask(out / "frames" / name, masks[i]);
  }
  if (c.has("gan")) {
    const auto gan_model = gan::load(c.text("gan"));
    gan::GenerateOptions g;
    g.factor = static_cast<int>(c.integer("factor"));
    const Image clean = corpus.clean(a);
    dataset::write_mask_video_frames(
        masks, clean,
        [&](const Image& img, const SoilingMask& m) {
          return gan::generate_soiled(gan_model, img,
                                      imaging::resize(m, img.height() / g.factor, img.width() / g.factor), g);
        },
        out / "composed");
  }
}

eval::SegBudget budget(const RunConfig& c, int num_classes) {
  eval::SegBudget b;
  b.shape = {3, num_classes, static_cast<int>(c.integer("width")), static_cast<int>(c.integer("residual_blocks"))};
  b.working_size = static_cast<int>(c.integer("working_size"));
  if (b.working_size % 4) throw ConfigError("'working_size' must be a multiple of 4");
  b.steps = static_cast<int>(c.integer("steps"));
  b.batch = static_cast<int>(c.integer("batch"));
  b.lr = c.real("lr");
  b.seeds = parse_seeds(c.text("seeds"));
  return b;
}

void write_reports(const eval::ExperimentReport& report, const fs::path& out) {
  write_text(out / "report.csv", eval::emit_report(report, eval::ReportFormat::csv));
  write_text(out / "report.md", eval::emit_report(report, eval::ReportFormat::markdown));
}

void evaluate_augmentation(const RunConfig& c, const fs::path& out) {
  const int nc = static_cast<int>(c.integer("num_classes"));
  const auto data =
      eval::augmentation_data(dataset::load_corpus(c.text("real")), dataset::load_corpus(c.text("generated")), nc);
  write_reports(eval::run_augmentation_experiment(data, budget(c, nc)), out);
}

void evaluate_degradation(const RunConfig& c, const fs::path& out) {
  const auto data = eval::degradation_data(dataset::load_corpus(c.text("corpus")));
  write_reports(eval::run_degradation_experiment(data, budget(c, dataset::kSceneClasses)), out);
}

void dispatch(const RunConfig& c, const fs::path& out) {
  const auto& cmd = c.command();
  if (cmd == "gen-corpus") return gen_corpus(c, out);
  if (cmd == "train-vae") return train_vae(c, out);
  if (cmd == "train-seg") return train_seg(c, out);
  if (cmd == "train-gan") return train_gan(c, out);
  if (cmd == "train-dirtygan") return train_dirtygan(c, out);
  if (cmd == "generate") return generate(c, out);
  if (cmd == "walk") return walk(c, out);
  if (cmd == "evaluate-augmentation") return evaluate_augmentation(c, out);
  if (cmd == "evaluate-degradation") return evaluate_degradation(c, out);
  throw ConfigError("unknown command '" + cmd + "'");
}

// Artifacts under `out` other than the provenance files, sorted.
std::vector<fs::path> artifacts(const fs::path& out) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), out);
    if (rel == "provenance.json" || rel == "run.cfg") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  return files;
}

void write_provenance(const RunConfig& c, const fs::path& out) {
  write_text(out / "run.cfg", "# soilgen " + c.command() + "\n" + c.normalized());
  nlohmann::ordered_json p;
  p["command"] = c.command();
  p["config_digest"] = c.digest();
  p["seed"] = c.seed();
  p["config"] = c.values();
  p["versions"] = {{"soilgen", SOILGEN_VERSION}, {"checkpoint_format", ckpt::kFormatVersion}};
  auto& list = p["artifacts"] = nlohmann::ordered_json::array();
  for (const auto& rel : artifacts(out)) {
    list.push_back({{"path", rel.generic_string()}, {"fnv1a64", file_digest(out / rel)}});
  }
  write_text(out / "provenance.json", p.dump(2) + "\n");
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string usage() {
  std::string s = "usage: soilgen <command> [--config FILE] [--set KEY=VALUE]... [--seed N] [--out DIR]\ncommands:";
  for (const auto& n : command_names()) s += " " + n;
  return s;
}

std::string describe_keys(const std::string& command) {
  std::ostringstream out;
  out << "keys for " << command << ":\n";
  for (const auto& k : command_keys(command)) {
    out << "  " << k.key << (k.required ? " (required)" : " = " + k.fallback) << "  " << k.help << "\n";
  }
  return out.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic lens-soiling data generation"};
  app.set_help_flag();
  std::string command, config_file, out_dir = "soilgen-out";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool help = false;
  app.add_option("command", command, "command to run");
  app.add_option("--config", config_file, "key=value config file");
  app.add_option("--set", overrides, "KEY=VALUE override (repeatable)")->take_all()->allow_extra_args(false);
  app.add_option("--seed", seed, "alias for --set seed=N");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("-h,--help", help, "show usage");
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    err << "error: kind=usage message=" << one_line(e.what()) << "\n";
    return 2;
  }
  if (help) {
    out << usage() << "\n";
    if (is_command(command)) out << describe_keys(command);
    return 0;
  }
  if (!is_command(command)) {
    err << "error: kind=usage message=" << (command.empty() ? "missing command" : "unknown command '" + command + "'")
        << "; " << one_line(usage()) << "\n";
    return 2;
  }
  if (seed) overrides.push_back("seed=" + std::to_string(*seed));
  try {
    const RunConfig config = parse_config(command, config_file, overrides);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    dispatch(config, dir);
    write_provenance(config, dir);
    out << command << ": wrote " << dir.string() << " (config " << config.digest() << ")\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "error: kind=" << e.kind() << " message=" << one_line(e.what()) << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: kind=" << e.kind() << " message=" << one_line(e.what()) << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: kind=io message=" << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: kind=internal message=" << one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace soilgen::cli
