#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "soilgen/error.hpp"
#include "test_util.hpp"

using namespace soilgen;
using namespace soilgen::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_files(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

}  // namespace

TEST(Config, DefaultsFileThenOverrides) {
  const auto d = parse_config_text("train-vae", "corpus = c\n", {});
  EXPECT_EQ(d.integer("steps"), 2000);
  EXPECT_EQ(d.text("corpus"), "c");
  const auto f = parse_config_text("train-vae", "# comment\ncorpus=c\nsteps = 50  # inline\n", {});
  EXPECT_EQ(f.integer("steps"), 50);
  const auto o = parse_config_text("train-vae", "corpus=c\nsteps=50\n", {"steps=7", "steps=9"});
  EXPECT_EQ(o.integer("steps"), 9);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config_text("train-vae", "", {}), ConfigError);  // corpus is required
  EXPECT_THROW(parse_config_text("train-vae", "corpus=c\nwat=1\n", {}), ConfigError);
  EXPECT_THROW(parse_config_text("train-vae", "corpus=c\n", {"steps=ten"}), ConfigError);
  EXPECT_THROW(parse_config_text("train-vae", "corpus=c\n", {"steps"}), ConfigError);
  try {
    parse_config_text("train-vae", "corpus=c\n", {"lr=-1"});
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("lr"), std::string::npos);
    EXPECT_NE(msg.find("["), std::string::npos);
  }
  EXPECT_THROW(parse_config_text("frobnicate", "", {}), ConfigError);
}

TEST(Config, DigestIgnoresOrderAndSpelling) {
  const auto a = parse_config_text("train-vae", "corpus=c\nlr=1e-3\nsteps=10\n", {});
  const auto b = parse_config_text("train-vae", "steps=010\ncorpus=c\nlr=0.001\n", {});
  EXPECT_EQ(a.normalized(), b.normalized());
  EXPECT_EQ(a.digest(), b.digest());
  const auto c = parse_config_text("train-vae", "corpus=c\nlr=1e-3\nsteps=11\n", {});
  EXPECT_NE(a.digest(), c.digest());
  EXPECT_EQ(parse_config_text("train-vae", a.normalized(), {}).digest(), a.digest());
}

TEST(Config, EveryCommandHasSeedAndValidDefaults) {
  for (const auto& cmd : command_names()) {
    EXPECT_TRUE(is_command(cmd));
    bool seed = false;
    for (const auto& k : command_keys(cmd)) seed |= k.key == "seed";
    EXPECT_TRUE(seed) << cmd;
  }
  EXPECT_FALSE(is_command("frobnicate"));
}

TEST(Run, UnknownCommandIsUsageErrorAndWritesNothing) {
  testutil::TempDir dir("cli");
  const auto r = invoke({"frobnicate", "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: kind=", 0), 0u);
  EXPECT_EQ(count_files(dir.path()), 0u);
}

TEST(Run, BadOptionAndBadValue) {
  testutil::TempDir dir("cli");
  EXPECT_EQ(invoke({"gen-corpus", "--bogus"}).code, 2);
  EXPECT_EQ(invoke({"gen-corpus", "--set", "n=-3", "--out", (dir / "o").string()}).code, 2);
  EXPECT_EQ(invoke({"train-vae", "--set", "corpus=" + (dir / "missing").string(), "--out", (dir / "v").string()})
                .code,
            1);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Run, GenCorpusIsReproducible) {
  testutil::TempDir dir("cli");
  const std::vector<std::string> base{"gen-corpus", "--set", "n=5", "--set", "size=32", "--seed", "4"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", (dir / "a").string()});
  b.insert(b.end(), {"--out", (dir / "b").string()});
  ASSERT_EQ(invoke(a).code, 0);
  ASSERT_EQ(invoke(b).code, 0);
  EXPECT_EQ(count_files(dir / "a"), count_files(dir / "b"));
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    EXPECT_EQ(read_bytes(e.path()), read_bytes(dir / "b" / rel)) << rel;
  }
  EXPECT_TRUE(fs::exists(dir / "a/provenance.json"));
  // rerunning from the recorded config reproduces the run
  ASSERT_EQ(invoke({"gen-corpus", "--config", (dir / "a/run.cfg").string(), "--out", (dir / "c").string()}).code, 0);
  EXPECT_EQ(read_bytes(dir / "a/provenance.json"), read_bytes(dir / "c/provenance.json"));
}

TEST(Run, TrainGenerateAndWalkPipeline) {
  testutil::TempDir dir("cli");
  const auto d = [&](const char* s) { return (dir / s).string(); };
  ASSERT_EQ(invoke({"gen-corpus", "--set", "n=12", "--set", "size=32", "--out", d("corpus")}).code, 0);
  const std::vector<std::string> tiny_gan{"--set", "steps=2", "--set", "base_width=4", "--set", "residual_blocks=1",
                                          "--set", "disc_width=4", "--set", "downscale=2"};
  auto gan_args = std::vector<std::string>{"train-gan", "--set", "corpus=" + d("corpus"), "--out", d("gan")};
  gan_args.insert(gan_args.end(), tiny_gan.begin(), tiny_gan.end());
  auto r = invoke(gan_args);
  ASSERT_EQ(r.code, 0) << r.err;
  r = invoke({"train-vae", "--set", "corpus=" + d("corpus"), "--set", "steps=2", "--set", "batch=2", "--set",
              "width=4", "--set", "latent_dim=4", "--set", "mask_size=16", "--out", d("vae")});
  ASSERT_EQ(r.code, 0) << r.err;

  // ten clean images to soil
  ASSERT_EQ(invoke({"gen-corpus", "--set", "n=10", "--set", "size=32", "--seed", "9", "--out", d("src")}).code, 0);
  r = invoke({"generate", "--set", "corpus=" + d("src"), "--set", "gan=" + d("gan"), "--set", "vae=" + d("vae"),
              "--set", "factor=2", "--out", d("gen")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_files(dir / "gen/dirty"), 10u);
  EXPECT_EQ(count_files(dir / "gen/masks"), 10u);
  EXPECT_TRUE(fs::exists(dir / "gen/manifest.json"));

  r = invoke({"walk", "--set", "vae=" + d("vae"), "--set", "corpus=" + d("corpus"), "--set", "gan=" + d("gan"),
              "--set", "factor=2", "--out", d("walk")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_files(dir / "walk/frames"), 12u);
  EXPECT_TRUE(fs::exists(dir / "walk/frames/walk_000.png"));
  EXPECT_TRUE(fs::exists(dir / "walk/frames/walk_011.png"));
  EXPECT_EQ(count_files(dir / "walk/composed"), 12u);

  // generation needs its VAE in vae mode
  EXPECT_EQ(invoke({"generate", "--set", "corpus=" + d("src"), "--set", "gan=" + d("gan"), "--out", d("g2")}).code, 2);
}
