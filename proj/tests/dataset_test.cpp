#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "soilgen/dataset.hpp"
#include "soilgen/error.hpp"
#include "soilgen/imaging.hpp"
#include "soilgen/png_io.hpp"
#include "soilgen/seed.hpp"
#include "test_util.hpp"

using namespace soilgen;
using namespace soilgen::dataset;
namespace fs = std::filesystem;

namespace {

ProceduralSceneSpec small_spec(std::uint64_t seed) {
  ProceduralSceneSpec s;
  s.height = s.width = 32;
  s.seed = seed;
  return s;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Deterministic soiler: a disc of fixed alpha at an entry-dependent offset.
DirtGenerator disc_generator(std::string digest, float alpha) {
  return {std::move(digest), [alpha](const Image& clean, std::uint64_t seed) {
            SoilingMask m(clean.height(), clean.width());
            const int cy = static_cast<int>(seed % static_cast<std::uint64_t>(clean.height()));
            for (int r = 0; r < m.height(); ++r)
              for (int c = 0; c < m.width(); ++c)
                if ((r - cy) * (r - cy) + (c - 10) * (c - 10) < 64) m.at(r, c) = alpha;
            Image dark(clean.height(), clean.width(), clean.channels(), 0.1f);
            return imaging::compose(clean, dark, m, 1);
          }};
}

double iou(const ClassMap& truth, const SoilingMask& label) {
  int inter = 0, uni = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth.data()[i] != 0, l = label.data()[i] > 0.0f;
    inter += t && l;
    uni += t || l;
  }
  return uni ? static_cast<double>(inter) / uni : 1.0;
}

}  // namespace

TEST(Procedural, DeterministicGivenSeed) {
  const auto a = generate_procedural_corpus(small_spec(3), 2);
  const auto b = generate_procedural_corpus(small_spec(3), 2);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(a[i].clean, b[i].clean);
    EXPECT_EQ(a[i].soiled, b[i].soiled);
    EXPECT_EQ(a[i].mask, b[i].mask);
    EXPECT_EQ(a[i].polygons, b[i].polygons);
  }
  EXPECT_NE(generate_procedural_corpus(small_spec(4), 1)[0].clean, a[0].clean);
}

TEST(Procedural, NoBlobsMeansNoSoiling) {
  auto spec = small_spec(5);
  spec.min_blobs = spec.max_blobs = 0;
  for (const auto& s : generate_procedural_corpus(spec, 3)) {
    EXPECT_EQ(s.soiled, s.clean);
    EXPECT_TRUE(std::all_of(s.mask.data().begin(), s.mask.data().end(), [](float v) { return v == 0.0f; }));
    EXPECT_TRUE(s.polygons.empty());
  }
}

TEST(Procedural, CoarsePolygonLabelsAreInformative) {
  auto spec = small_spec(6);
  spec.height = spec.width = 64;
  for (const auto& s : generate_procedural_corpus(spec, 40)) {
    const auto label = imaging::rasterize(s.polygons, 64, 64);
    const double v = iou(s.soiling, label);
    EXPECT_GT(v, 0.3) << s.id;
    EXPECT_LE(v, 1.0) << s.id;
  }
}

TEST(Procedural, SoiledIsCompositionOfCleanAndTexture) {
  const auto s = generate_procedural_sample(small_spec(7), 0);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      if (s.mask.at(r, c) == 0.0f)
        for (int k = 0; k < 3; ++k) ASSERT_EQ(s.soiled.at(r, c, k), s.clean.at(r, c, k));
}

TEST(Procedural, DegenerateSpecsRejected) {
  auto spec = small_spec(1);
  spec.min_blobs = 3;
  spec.max_blobs = 1;
  EXPECT_THROW(validate(spec), ParameterError);
  spec = small_spec(1);
  spec.min_blob_radius = -0.1;
  EXPECT_THROW(validate(spec), ParameterError);
  EXPECT_THROW(generate_procedural_corpus(small_spec(1), 0), ParameterError);
}

TEST(Labels, SoilingAndDegradedClasses) {
  SoilingMask m(1, 4);
  m.at(0, 0) = 0.1f;
  m.at(0, 1) = 0.25f;
  m.at(0, 2) = 0.74f;
  m.at(0, 3) = 0.9f;
  const auto three = soiling_labels(m, 3);
  const auto two = soiling_labels(m, 2);
  EXPECT_EQ(three.at(0, 0), 0);
  EXPECT_EQ(three.at(0, 1), 2);
  EXPECT_EQ(three.at(0, 2), 2);
  EXPECT_EQ(three.at(0, 3), 1);
  EXPECT_EQ(binary_soiling(three), two);
  ClassMap scene(1, 4, 3);
  const auto d = degrade_labels(scene, m);
  EXPECT_EQ(d.at(0, 0), 3);
  EXPECT_EQ(d.at(0, 1), 0);
  EXPECT_EQ(d.at(0, 3), 0);
}

TEST(Splits, EightyTwentyPureAndDisjoint) {
  for (int n : {1, 5, 10, 37, 100}) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back(procedural_id(i));
    const auto s = assign_splits(ids, 11);
    EXPECT_EQ(s, assign_splits(ids, 11));
    const auto train = std::count(s.begin(), s.end(), Split::train);
    EXPECT_LE(std::abs(static_cast<double>(train) - 0.8 * n), 1.0) << n;
    // order of ids does not matter
    std::vector<std::string> rev(ids.rbegin(), ids.rend());
    const auto sr = assign_splits(rev, 11);
    for (int i = 0; i < n; ++i) EXPECT_EQ(s[i], sr[n - 1 - i]);
  }
}

TEST(Manifest, JsonRoundTripAndErrors) {
  DatasetManifest m;
  m.seed = 42;
  m.generator_config_digest = "abc";
  ManifestEntry e;
  e.id = "x1";
  e.clean_path = "clean/x1.png";
  e.mask_path = "masks/x1.png";
  e.split = Split::test;
  m.entries.push_back(e);
  EXPECT_EQ(manifest_from_json(manifest_to_json(m)), m);
  EXPECT_THROW(manifest_from_json("{"), ManifestError);
  m.entries.push_back(e);
  EXPECT_THROW(manifest_from_json(manifest_to_json(m)), ManifestError);
}

TEST(Annotation, JsonRoundTrip) {
  std::vector<Polygon> p{{{{0.1, 0.2}, {0.5, 0.2}, {0.3, 0.7}}, PolygonClass::transparent}};
  EXPECT_EQ(annotation_from_json(annotation_to_json(p)), p);
  EXPECT_THROW(annotation_from_json("[1,2]"), InvalidAnnotationError);
}

TEST(Corpus, EmptyDirectoryIsEmptyManifest) {
  testutil::TempDir dir("ds");
  EXPECT_TRUE(load_corpus(dir.path()).manifest().entries.empty());
}

TEST(Corpus, OptionalCompanionsAndValidation) {
  testutil::TempDir dir("ds");
  fs::create_directories(dir / "clean");
  fs::create_directories(dir / "masks");
  std::mt19937_64 rng(1);
  png::write_image(dir / "clean/a.png", testutil::random_image(8, 8, 3, rng));
  auto c = load_corpus(dir.path());
  ASSERT_EQ(c.manifest().entries.size(), 1u);
  EXPECT_FALSE(c.manifest().entries[0].annotation_path.has_value());
  EXPECT_THROW(c.mask(c.manifest().entries[0]), ManifestError);

  png::write_mask(dir / "masks/a.png", SoilingMask(4, 8));
  try {
    load_corpus(dir.path());
    FAIL() << "size mismatch accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("a"), std::string::npos);
  }
}

TEST(Corpus, MissingReferencedFilesListed) {
  testutil::TempDir dir("ds");
  write_procedural_corpus(small_spec(2), 3, dir.path());
  fs::remove(dir / ("dirty/" + procedural_id(1) + ".png"));
  try {
    load_corpus(dir.path());
    FAIL() << "missing file accepted";
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find(procedural_id(1)), std::string::npos);
  }
}

TEST(Corpus, UnreadablePngIsFormatError) {
  testutil::TempDir dir("ds");
  fs::create_directories(dir / "clean");
  std::ofstream(dir / "clean/bad.png") << "not a png";
  EXPECT_THROW(load_corpus(dir.path()), FormatError);
}

TEST(Corpus, ProceduralWriteLoadsBack) {
  testutil::TempDir dir("ds");
  const auto written = write_procedural_corpus(small_spec(8), 4, dir.path());
  const auto c = load_corpus(dir.path());
  EXPECT_EQ(c.manifest(), written);
  const auto& e = c.manifest().entries[2];
  const auto s = generate_procedural_sample(small_spec(8), 2);
  const auto mask = c.mask(e);
  for (std::size_t i = 0; i < mask.size(); ++i) ASSERT_LE(std::abs(mask.data()[i] - s.mask.data()[i]), 0.5f / 255);
  EXPECT_EQ(c.annotation(e), s.polygons);
  EXPECT_EQ(c.labels(e), s.scene);
}

TEST(DirtyDataset, CardinalityQuantizationReproducibility) {
  testutil::TempDir in("ds"), out1("ds"), out2("ds");
  write_procedural_corpus(small_spec(9), 10, in.path());
  const auto corpus = load_corpus(in.path());
  const auto gen = disc_generator("g1", 0.37f);
  const auto m = write_dirty_dataset(corpus, gen, 5, out1.path());
  ASSERT_EQ(m.entries.size(), 10u);
  EXPECT_EQ(m.generator_config_digest, "g1");
  std::set<std::string> ids;
  for (std::size_t k = 0; k < m.entries.size(); ++k) {
    const auto& e = m.entries[k];
    ids.insert(e.id);
    ASSERT_TRUE(e.dirty_path && e.mask_path);
    EXPECT_TRUE(fs::exists(out1 / *e.dirty_path));
    const auto expected = gen.generate(corpus.clean(corpus.manifest().entries[k]), derive_seed(5, e.id));
    const auto mask = png::read_mask(out1 / *e.mask_path);
    for (std::size_t i = 0; i < mask.size(); ++i)
      ASSERT_LE(std::abs(mask.data()[i] - expected.annotation.data()[i]), 1.0f / 255);
  }
  EXPECT_EQ(ids.size(), 10u);

  write_dirty_dataset(corpus, gen, 5, out2.path());
  for (const auto& e : m.entries) {
    EXPECT_EQ(read_bytes(out1 / *e.dirty_path), read_bytes(out2 / *e.dirty_path));
    EXPECT_EQ(read_bytes(out1 / *e.mask_path), read_bytes(out2 / *e.mask_path));
  }
  EXPECT_EQ(read_bytes(out1 / "manifest.json"), read_bytes(out2 / "manifest.json"));
}

TEST(DirtyDataset, DigestFollowsGeneratorConfig) {
  testutil::TempDir in("ds"), a("ds"), b("ds");
  write_procedural_corpus(small_spec(10), 2, in.path());
  const auto corpus = load_corpus(in.path());
  const auto ma = write_dirty_dataset(corpus, disc_generator("cfg-a", 0.5f), 1, a.path());
  const auto mb = write_dirty_dataset(corpus, disc_generator("cfg-b", 0.5f), 1, b.path());
  EXPECT_NE(ma.generator_config_digest, mb.generator_config_digest);
  EXPECT_NE(read_bytes(a / "manifest.json"), read_bytes(b / "manifest.json"));
}

TEST(DirtyDataset, FailureLeavesPartialManifest) {
  testutil::TempDir in("ds"), out("ds");
  write_procedural_corpus(small_spec(11), 3, in.path());
  const auto corpus = load_corpus(in.path());
  int calls = 0;
  DirtGenerator gen{"x", [&](const Image& clean, std::uint64_t seed) {
                      if (++calls == 3) throw WriteError("disk full");
                      return disc_generator("x", 0.5f).generate(clean, seed);
                    }};
  try {
    write_dirty_dataset(corpus, gen, 1, out.path());
    FAIL() << "no error";
  } catch (const PartialWriteError& e) {
    EXPECT_EQ(e.partial().entries.size(), 2u);
  }
}

TEST(VideoFrames, CountsAndConstantSequence) {
  testutil::TempDir dir("vid");
  std::mt19937_64 rng(3);
  const auto clean = testutil::random_image(16, 16, 3, rng);
  const Image dark(16, 16, 3, 0.0f);
  const FrameComposer comp = [&](const Image& c, const SoilingMask& m) { return imaging::compose(c, dark, m, 1); };
  const auto m = testutil::random_mask(16, 16, rng);
  EXPECT_EQ(write_mask_video_frames(std::vector<SoilingMask>{m}, clean, comp, dir / "one").size(), 1u);
  const auto frames = write_mask_video_frames(std::vector<SoilingMask>(4, m), clean, comp, dir / "const");
  ASSERT_EQ(frames.size(), 4u);
  EXPECT_EQ(frames[0].filename(), frame_name(0));
  for (const auto& f : frames) EXPECT_EQ(read_bytes(f), read_bytes(frames[0]));
  EXPECT_THROW(write_mask_video_frames({}, clean, comp, dir / "none"), ParameterError);
}

TEST(VideoFrames, ChangesStayInsideMaskUnion) {
  testutil::TempDir dir("vid");
  std::mt19937_64 rng(4);
  const auto clean = testutil::random_image(16, 16, 3, rng);
  const Image dark(16, 16, 3, 0.0f);
  const FrameComposer comp = [&](const Image& c, const SoilingMask& m) { return imaging::compose(c, dark, m, 1); };
  std::vector<SoilingMask> masks;
  for (int i = 0; i < 12; ++i) {
    SoilingMask m(16, 16);
    for (int r = 2; r < 8; ++r)
      for (int c = i; c < i + 4; ++c) m.at(r, c % 16) = 0.8f;
    masks.push_back(m);
  }
  const auto frames = write_mask_video_frames(masks, clean, comp, dir.path());
  ASSERT_EQ(frames.size(), 12u);
  for (int i = 1; i < 12; ++i) {
    const auto a = png::read_image(frames[i - 1]), b = png::read_image(frames[i]);
    bool any = false;
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c)
        for (int k = 0; k < 3; ++k) {
          if (a.at(r, c, k) == b.at(r, c, k)) continue;
          any = true;
          ASSERT_TRUE(masks[i - 1].at(r, c) > 0 || masks[i].at(r, c) > 0) << i;
        }
    EXPECT_TRUE(any);
  }
}
