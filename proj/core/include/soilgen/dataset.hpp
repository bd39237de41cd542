#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "soilgen/error.hpp"
#include "soilgen/image.hpp"
#include "soilgen/imaging.hpp"

namespace soilgen::dataset {

// --- procedural scenes -------------------------------------------------------

// Scene class codes of the procedural street scenes.
enum SceneClass : std::uint8_t { kBackground = 0, kRoad = 1, kObject = 2 };
inline constexpr int kSceneClasses = 3;

// Soiling class codes, shared with the segmentation module.
enum SoilingCode : std::uint8_t { kClean = 0, kOpaque = 1, kTransparent = 2 };

struct ProceduralSceneSpec {
  int height = 64;
  int width = 64;
  // Background: sky gradient above a random horizon, noisy road below.
  double horizon_min = 0.35;  // fraction of the height
  double horizon_max = 0.6;
  double noise_amplitude = 0.04;
  // Foreground objects (axis-aligned boxes).
  int min_shapes = 1;
  int max_shapes = 4;
  double min_shape_size = 0.1;  // fraction of the width
  double max_shape_size = 0.3;
  // Soiling blobs: unions of 2-4 discs.
  int min_blobs = 1;
  int max_blobs = 3;
  double min_blob_radius = 0.08;  // fraction of the width
  double max_blob_radius = 0.2;
  double transparent_fraction = 0.3;
  double transparent_alpha = 0.5;
  double soil_sigma = 0.8;
  std::uint64_t seed = 0;
};

// ParameterError for degenerate ranges or negative counts.
void validate(const ProceduralSceneSpec& spec);
std::string digest(const ProceduralSceneSpec& spec);

struct ProceduralSample {
  std::string id;
  Image clean;
  Image soiled;
  SoilingMask mask;               // smoothed alpha used for composition
  ClassMap soiling;               // precise soiling classes before smoothing
  std::vector<Polygon> polygons;  // coarse convex hulls, one per blob
  ClassMap scene;                 // scene classes of the clean image
};

std::string procedural_id(int index);

// Deterministic in (spec, index); the per-sample seed is derived from the id.
ProceduralSample generate_procedural_sample(const ProceduralSceneSpec& spec, int index);
std::vector<ProceduralSample> generate_procedural_corpus(const ProceduralSceneSpec& spec, int n);

// A darkened, blurred mud texture matching the clean image.
Image soil_texture(const Image& clean, std::uint64_t seed);

// Scene labels of a soiled image: soiled pixels (alpha >= 0.25) become background.
ClassMap degrade_labels(const ClassMap& scene, const SoilingMask& mask);

// Soiling classes read off an alpha mask. Three classes: alpha >= 0.75 is
// opaque, alpha >= 0.25 transparent, the rest clean. Two classes: alpha >= 0.25
// is soiled (code 1).
ClassMap soiling_labels(const SoilingMask& mask, int num_classes);

// Collapses {clean, opaque, transparent} codes to {clean, soiled}.
ClassMap binary_soiling(const ClassMap& soiling);

// --- manifest ----------------------------------------------------------------

enum class Split { train, test };
std::string to_string(Split split);

struct ManifestEntry {
  std::string id;
  std::string clean_path;  // all paths relative to the corpus root
  std::optional<std::string> dirty_path;
  std::optional<std::string> mask_path;
  std::optional<std::string> annotation_path;
  std::optional<std::string> labels_path;   // scene class map
  std::optional<std::string> soiling_path;  // soiling class map, codes {0, 128, 255}
  Split split = Split::train;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  std::string generator_config_digest;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// Ranks ids by hash(seed, id) and marks the first round(train_fraction * n)
// as train. A pure function of (ids, seed).
std::vector<Split> assign_splits(std::span<const std::string> ids, std::uint64_t seed, double train_fraction = 0.8);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

// Polygon annotation documents: {"polygons": [{"class": ..., "vertices": [[x, y], ...]}]}.
std::string annotation_to_json(std::span<const Polygon> polygons);
std::vector<Polygon> annotation_from_json(const std::string& text);

// --- corpora on disk ---------------------------------------------------------

// Layout: clean/<id>.png, annotations/<id>.json, dirty/<id>.png,
// masks/<id>.png, labels/<id>.png, soiling/<id>.png, manifest.json.
class Corpus {
 public:
  Corpus(std::filesystem::path root, DatasetManifest manifest);

  const std::filesystem::path& root() const noexcept { return root_; }
  const DatasetManifest& manifest() const noexcept { return manifest_; }
  std::vector<const ManifestEntry*> split(Split s) const;

  Image clean(const ManifestEntry& e) const;
  Image dirty(const ManifestEntry& e) const;         // ManifestError when absent
  SoilingMask mask(const ManifestEntry& e) const;    // ManifestError when absent
  ClassMap labels(const ManifestEntry& e) const;     // ManifestError when absent
  ClassMap soiling(const ManifestEntry& e) const;    // codes mapped to {0, 1, 2}
  std::vector<Polygon> annotation(const ManifestEntry& e) const;

 private:
  std::filesystem::path root_;
  DatasetManifest manifest_;
};

// Reads manifest.json when present, otherwise scans clean/*.png and picks up
// companion files by id. Missing referenced files raise ManifestError listing
// the ids; a companion whose size differs from the clean image raises
// ValidationError naming the id; unreadable PNGs raise FormatError.
Corpus load_corpus(const std::filesystem::path& root);

// Writes a procedural corpus (clean, dirty, masks, annotations, labels,
// soiling classes) and its manifest.
DatasetManifest write_procedural_corpus(const ProceduralSceneSpec& spec, int n, const std::filesystem::path& root);

// Produces a soiled composite for one clean image.
struct DirtGenerator {
  std::string config_digest;
  std::function<imaging::Composite(const Image& clean, std::uint64_t entry_seed)> generate;
};

// Thrown when writing stops part-way; `partial` lists the completed entries
// and was written to manifest.partial.json when possible.
class PartialWriteError : public WriteError {
 public:
  PartialWriteError(const std::string& what, DatasetManifest partial)
      : WriteError(what), partial_(std::move(partial)) {}
  const DatasetManifest& partial() const noexcept { return partial_; }

 private:
  DatasetManifest partial_;
};

// For every entry of `in`: copies the clean image (and labels/annotations),
// writes dirty/<id>.png and masks/<id>.png, then manifest.json. Entry seeds
// are derive_seed(seed, id), so reruns reproduce the bytes.
DatasetManifest write_dirty_dataset(const Corpus& in, const DirtGenerator& generator, std::uint64_t seed,
                                    const std::filesystem::path& out_root);

// Composes every mask with the clean image and writes frame_000.png, ...
// Returns the written paths. ParameterError for an empty sequence.
using FrameComposer = std::function<imaging::Composite(const Image& clean, const SoilingMask& mask)>;
std::vector<std::filesystem::path> write_mask_video_frames(std::span<const SoilingMask> masks, const Image& clean,
                                                           const FrameComposer& compose,
                                                           const std::filesystem::path& out_dir);

std::string frame_name(int index);

}  // namespace soilgen::dataset
