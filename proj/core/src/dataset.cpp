#include "soilgen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "fsutil.hpp"
#include "soilgen/png_io.hpp"
#include "soilgen/seed.hpp"

namespace soilgen::dataset {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

std::vector<Split> assign_splits(std::span<const std::string> ids, std::uint64_t seed, double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ParameterError("train fraction must lie in [0, 1]");
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::uint64_t salt = derive_seed(seed, "split");
  auto key = [&](std::size_t i) { return mix64(fnv1a64(ids[i], salt)); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = key(a), kb = key(b);
    return ka != kb ? ka < kb : ids[a] < ids[b];
  });
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
  std::vector<Split> out(ids.size(), Split::test);
  for (std::size_t r = 0; r < n_train; ++r) out[order[r]] = Split::train;
  return out;
}

// --- JSON documents ---------------------------------------------------------

std::string manifest_to_json(const DatasetManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    json j = {{"id", e.id}, {"clean", e.clean_path}, {"split", to_string(e.split)}};
    auto opt = [&](const char* key, const std::optional<std::string>& v) {
      if (v) j[key] = *v;
    };
    opt("dirty", e.dirty_path);
    opt("mask", e.mask_path);
    opt("annotation", e.annotation_path);
    opt("labels", e.labels_path);
    opt("soiling", e.soiling_path);
    entries.push_back(std::move(j));
  }
  const json doc = {{"seed", m.seed}, {"generator_config_digest", m.generator_config_digest}, {"entries", entries}};
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json doc = json::parse(text);
    m.seed = doc.value("seed", std::uint64_t{0});
    m.generator_config_digest = doc.value("generator_config_digest", std::string());
    std::set<std::string> seen;
    for (const auto& j : doc.at("entries")) {
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      if (!seen.insert(e.id).second) throw ManifestError("duplicate manifest id '" + e.id + "'");
      e.clean_path = j.at("clean").get<std::string>();
      const std::string split = j.value("split", std::string("train"));
      if (split != "train" && split != "test") throw ManifestError("entry '" + e.id + "' has split '" + split + "'");
      e.split = split == "train" ? Split::train : Split::test;
      auto opt = [&](const char* key, std::optional<std::string>& v) {
        if (j.contains(key)) v = j.at(key).get<std::string>();
      };
      opt("dirty", e.dirty_path);
      opt("mask", e.mask_path);
      opt("annotation", e.annotation_path);
      opt("labels", e.labels_path);
      opt("soiling", e.soiling_path);
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ManifestError(std::string("manifest: ") + e.what());
  }
  return m;
}

std::string annotation_to_json(std::span<const Polygon> polygons) {
  json list = json::array();
  for (const auto& p : polygons) {
    json verts = json::array();
    for (const auto& v : p.vertices) verts.push_back({v.x, v.y});
    list.push_back({{"class", soilgen::to_string(p.soiling_class)}, {"vertices", verts}});
  }
  return json{{"polygons", list}}.dump(2) + "\n";
}

std::vector<Polygon> annotation_from_json(const std::string& text) {
  std::vector<Polygon> out;
  try {
    const json doc = json::parse(text);
    for (const auto& j : doc.at("polygons")) {
      Polygon p;
      p.soiling_class = polygon_class_from_string(j.at("class").get<std::string>());
      for (const auto& v : j.at("vertices")) {
        if (!v.is_array() || v.size() != 2) throw InvalidAnnotationError("vertex must be an [x, y] pair");
        p.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
      }
      imaging::validate_polygon(p);
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw InvalidAnnotationError(std::string("annotation: ") + e.what());
  }
  return out;
}

// --- corpus -----------------------------------------------------------------

Corpus::Corpus(fs::path root, DatasetManifest manifest) : root_(std::move(root)), manifest_(std::move(manifest)) {}

std::vector<const ManifestEntry*> Corpus::split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : manifest_.entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

namespace {

const std::string& require(const std::optional<std::string>& path, const ManifestEntry& e, const char* what) {
  if (!path) throw ManifestError("entry '" + e.id + "' has no " + what);
  return *path;
}

}  // namespace

Image Corpus::clean(const ManifestEntry& e) const { return png::read_image(root_ / e.clean_path); }
Image Corpus::dirty(const ManifestEntry& e) const { return png::read_image(root_ / require(e.dirty_path, e, "dirty image")); }
SoilingMask Corpus::mask(const ManifestEntry& e) const { return png::read_mask(root_ / require(e.mask_path, e, "mask")); }
ClassMap Corpus::labels(const ManifestEntry& e) const {
  return png::read_class_map(root_ / require(e.labels_path, e, "labels"));
}

ClassMap Corpus::soiling(const ManifestEntry& e) const {
  ClassMap map = png::read_class_map(root_ / require(e.soiling_path, e, "soiling labels"));
  for (auto& v : map.data()) {
    switch (v) {
      case 0: v = kClean; break;
      case 128: v = kTransparent; break;
      case 255: v = kOpaque; break;
      default: throw DataError("entry '" + e.id + "' soiling label code " + std::to_string(v) + " is not 0/128/255");
    }
  }
  return map;
}

std::vector<Polygon> Corpus::annotation(const ManifestEntry& e) const {
  return annotation_from_json(detail::read_file(root_ / require(e.annotation_path, e, "annotation")));
}

Corpus load_corpus(const fs::path& root) {
  if (!fs::is_directory(root)) throw ManifestError("corpus root " + root.string() + " is not a directory");
  DatasetManifest manifest;
  const fs::path manifest_path = root / "manifest.json";
  if (fs::exists(manifest_path)) {
    manifest = manifest_from_json(detail::read_file(manifest_path));
  } else if (fs::is_directory(root / "clean")) {
    std::vector<std::string> ids;
    for (const auto& f : fs::directory_iterator(root / "clean")) {
      if (f.is_regular_file() && f.path().extension() == ".png") ids.push_back(f.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    const auto splits = assign_splits(ids, 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::string& id = ids[i];
      ManifestEntry e;
      e.id = id;
      e.clean_path = "clean/" + id + ".png";
      auto pick = [&](const char* dir, const char* ext, std::optional<std::string>& field) {
        const std::string rel = std::string(dir) + "/" + id + ext;
        if (fs::exists(root / rel)) field = rel;
      };
      pick("dirty", ".png", e.dirty_path);
      pick("masks", ".png", e.mask_path);
      pick("annotations", ".json", e.annotation_path);
      pick("labels", ".png", e.labels_path);
      pick("soiling", ".png", e.soiling_path);
      e.split = splits[i];
      manifest.entries.push_back(std::move(e));
    }
  }

  std::vector<std::string> missing;
  for (const auto& e : manifest.entries) {
    bool ok = fs::exists(root / e.clean_path);
    for (const auto* p : {&e.dirty_path, &e.mask_path, &e.annotation_path, &e.labels_path, &e.soiling_path}) {
      ok = ok && (!*p || fs::exists(root / **p));
    }
    if (!ok) missing.push_back(e.id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw ManifestError("missing files for entries: " + list);
  }
  for (const auto& e : manifest.entries) {
    const auto info = png::read_info(root / e.clean_path);
    for (const auto* p : {&e.dirty_path, &e.mask_path, &e.labels_path, &e.soiling_path}) {
      if (!*p) continue;
      const auto other = png::read_info(root / **p);
      if (other.height != info.height || other.width != info.width) {
        throw ValidationError("entry '" + e.id + "': " + **p + " is " + std::to_string(other.height) + "x" +
                              std::to_string(other.width) + ", clean image is " + std::to_string(info.height) + "x" +
                              std::to_string(info.width));
      }
    }
  }
  return Corpus(root, std::move(manifest));
}

namespace {

ClassMap encode_soiling(const ClassMap& soiling) {
  ClassMap out = soiling;
  for (auto& v : out.data()) v = v == kOpaque ? 255 : (v == kTransparent ? 128 : 0);
  return out;
}

}  // namespace

DatasetManifest write_procedural_corpus(const ProceduralSceneSpec& spec, int n, const fs::path& root) {
  validate(spec);
  if (n < 1) throw ParameterError("procedural corpus needs n >= 1");
  DatasetManifest m;
  m.seed = spec.seed;
  m.generator_config_digest = digest(spec);
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back(procedural_id(i));
  const auto splits = assign_splits(ids, spec.seed);
  for (int i = 0; i < n; ++i) {
    const auto s = generate_procedural_sample(spec, i);
    ManifestEntry e{s.id,
                    "clean/" + s.id + ".png",
                    "dirty/" + s.id + ".png",
                    "masks/" + s.id + ".png",
                    "annotations/" + s.id + ".json",
                    "labels/" + s.id + ".png",
                    "soiling/" + s.id + ".png",
                    splits[i]};
    png::write_image(root / e.clean_path, s.clean);
    png::write_image(root / *e.dirty_path, s.soiled);
    png::write_mask(root / *e.mask_path, s.mask);
    detail::atomic_write(root / *e.annotation_path, annotation_to_json(s.polygons));
    png::write_class_map(root / *e.labels_path, s.scene);
    png::write_class_map(root / *e.soiling_path, encode_soiling(s.soiling));
    m.entries.push_back(std::move(e));
  }
  detail::atomic_write(root / "manifest.json", manifest_to_json(m));
  return m;
}

DatasetManifest write_dirty_dataset(const Corpus& in, const DirtGenerator& generator, std::uint64_t seed,
                                    const fs::path& out_root) {
  if (!generator.generate) throw ParameterError("dirty dataset writer needs a generator");
  DatasetManifest out;
  out.seed = seed;
  out.generator_config_digest = generator.config_digest;
  for (const auto& e : in.manifest().entries) {
    try {
      const Image clean = in.clean(e);
      const imaging::Composite comp = generator.generate(clean, derive_seed(seed, e.id));
      if (comp.image.height() != clean.height() || comp.image.width() != clean.width() ||
          !comp.annotation.same_size(clean)) {
        throw ShapeError("generator output for '" + e.id + "' does not match the clean image size");
      }
      ManifestEntry o;
      o.id = e.id;
      o.clean_path = "clean/" + e.id + ".png";
      o.split = e.split;
      o.dirty_path = "dirty/" + e.id + ".png";
      o.mask_path = "masks/" + e.id + ".png";
      detail::atomic_write(out_root / o.clean_path, detail::read_file(in.root() / e.clean_path));
      if (e.labels_path) {
        o.labels_path = "labels/" + e.id + ".png";
        detail::atomic_write(out_root / *o.labels_path, detail::read_file(in.root() / *e.labels_path));
      }
      png::write_image(out_root / *o.dirty_path, comp.image);
      png::write_mask(out_root / *o.mask_path, comp.annotation);
      out.entries.push_back(std::move(o));
    } catch (const WriteError& err) {
      try {
        detail::atomic_write(out_root / "manifest.partial.json", manifest_to_json(out));
      } catch (const WriteError&) {
      }
      throw PartialWriteError(std::string(err.what()) + " (after " + std::to_string(out.entries.size()) + " entries)",
                              out);
    }
  }
  detail::atomic_write(out_root / "manifest.json", manifest_to_json(out));
  return out;
}

std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03d.png", index);
  return buf;
}

std::vector<fs::path> write_mask_video_frames(std::span<const SoilingMask> masks, const Image& clean,
                                              const FrameComposer& compose, const fs::path& out_dir) {
  if (masks.empty()) throw ParameterError("video needs at least one mask");
  std::vector<fs::path> paths;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const imaging::Composite c = compose(clean, masks[i]);
    paths.push_back(out_dir / frame_name(static_cast<int>(i)));
    png::write_image(paths.back(), c.image);
  }
  return paths;
}

}  // namespace soilgen::dataset
