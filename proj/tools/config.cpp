#include "config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "soilgen/error.hpp"
#include "soilgen/seed.hpp"

namespace soilgen::cli {

namespace {

using V = ValueType;

// Shortest of %.15g / %.17g that reads back as the same double.
std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  if (std::strtod(buf, nullptr) != x) std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

KeySpec I(std::string key, long long fallback, double lo, double hi, std::string help) {
  return {std::move(key), V::integer, std::to_string(fallback), lo, hi, false, std::move(help)};
}
KeySpec R(std::string key, double fallback, double lo, double hi, std::string help) {
  return {std::move(key), V::real, format_real(fallback), lo, hi, false, std::move(help)};
}
KeySpec T(std::string key, std::string fallback, std::string help) {
  return {std::move(key), V::text, std::move(fallback), 0, 0, false, std::move(help)};
}
KeySpec Req(std::string key, std::string help) { return {std::move(key), V::text, "", 0, 0, true, std::move(help)}; }
KeySpec F(std::string key, bool fallback, std::string help) {
  return {std::move(key), V::flag, fallback ? "true" : "false", 0, 0, false, std::move(help)};
}

constexpr double kMaxSteps = 1e7;

std::vector<KeySpec> join(std::initializer_list<std::vector<KeySpec>> parts) {
  std::vector<KeySpec> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

const std::vector<KeySpec> kCommon{I("seed", 0, 0, 9.007199254740992e15, "master seed")};

std::vector<KeySpec> gan_keys(int steps) {
  return {I("steps", steps, 0, kMaxSteps, "optimizer steps"),
          I("batch", 1, 1, 256, "images per domain per step"),
          R("lr", 2e-4, 1e-12, 1, "Adam learning rate"),
          R("beta1", 0.5, 0, 0.999999, "Adam first-moment decay"),
          I("downscale", 4, 1, 64, "training resolution divisor"),
          R("lambda_cycle", 10, 0, 1e6, "cycle-consistency weight"),
          R("lambda_identity", 5, 0, 1e6, "identity weight"),
          R("decay_start", 0.5, 0, 1, "fraction of steps before the learning rate decays linearly"),
          I("base_width", 32, 1, 1024, "generator width"),
          I("residual_blocks", 4, 0, 64, "generator residual blocks"),
          I("disc_width", 64, 1, 1024, "discriminator width"),
          I("pool", 50, 0, 100000, "image pool capacity")};
}

std::vector<KeySpec> seg_budget_keys(int steps, int width) {
  return {I("steps", steps, 0, kMaxSteps, "optimizer steps per model"),
          I("batch", 8, 1, 1024, "images per step"),
          R("lr", 1e-4, 1e-12, 1, "Adam learning rate"),
          I("working_size", 64, 4, 4096, "segmentation resolution (multiple of 4)"),
          I("width", width, 1, 1024, "segmentation network base width"),
          I("residual_blocks", 2, 0, 64, "segmentation residual blocks")};
}

const std::map<std::string, std::vector<KeySpec>>& registry() {
  static const std::map<std::string, std::vector<KeySpec>> r = [] {
    std::map<std::string, std::vector<KeySpec>> m;
    m["gen-corpus"] = join({kCommon,
                            {I("n", 100, 1, 1000000, "number of scenes"),
                             I("size", 64, 8, 4096, "image height and width"),
                             I("min_shapes", 1, 0, 64, "objects per scene, lower bound"),
                             I("max_shapes", 4, 0, 64, "objects per scene, upper bound"),
                             I("min_blobs", 1, 0, 64, "soiling blobs, lower bound"),
                             I("max_blobs", 3, 0, 64, "soiling blobs, upper bound"),
                             R("min_blob_radius", 0.08, 0.001, 1, "blob disc radius, fraction of width"),
                             R("max_blob_radius", 0.2, 0.001, 1, "blob disc radius, fraction of width"),
                             R("transparent_fraction", 0.3, 0, 1, "share of semi-transparent blobs"),
                             R("transparent_alpha", 0.5, 0, 1, "alpha of semi-transparent soiling"),
                             R("sigma", 0.8, 0, 100, "mask smoothing")}});
    m["train-vae"] = join({kCommon,
                           {Req("corpus", "corpus with masks"),
                            I("steps", 2000, 0, kMaxSteps, "optimizer steps"),
                            I("batch", 16, 1, 4096, "masks per step"),
                            R("lr", 1e-3, 1e-12, 1, "Adam learning rate"),
                            R("beta", 1, 0, 1e6, "KL weight"),
                            I("latent_dim", 32, 1, 4096, "latent dimension"),
                            I("mask_size", 32, 8, 1024, "mask resolution (multiple of 8)"),
                            I("width", 32, 1, 1024, "encoder/decoder width")}});
    m["train-seg"] = join({kCommon,
                           {Req("corpus", "corpus with dirty images and labels"),
                            I("num_classes", 3, 2, 3, "2 = clean/soiled, 3 = clean/opaque/transparent"),
                            T("labels", "weak", "weak (polygon annotations) or precise (soiling maps)"),
                            F("augment", false, "random flip and contrast jitter"),
                            R("transparent_alpha", 0.5, 0, 1, "alpha of the transparent class")},
                           seg_budget_keys(1000, 16)});
    m["train-gan"] = join({kCommon, {Req("corpus", "corpus with clean and dirty images")}, gan_keys(2000)});
    m["train-dirtygan"] = join({kCommon,
                                {Req("corpus", "corpus with clean and dirty images"),
                                 Req("vae", "trained VAE directory"),
                                 Req("seg", "trained segmentation directory"),
                                 R("sigma", 0.8, 0, 100, "smoothing of segmentation masks")},
                                gan_keys(2000)});
    m["generate"] = join({kCommon,
                          {Req("corpus", "corpus with clean images"),
                           Req("gan", "trained GAN directory"),
                           T("mode", "vae", "vae (VAE-sampled masks) or baseline (segmentation of G output)"),
                           T("vae", "", "trained VAE directory (mode=vae)"),
                           T("seg", "", "trained segmentation directory (mode=baseline)"),
                           I("factor", 4, 1, 64, "upscaling factor of the generated layer"),
                           R("sigma", 0.8, 0, 100, "mask smoothing")}});
    m["walk"] = join({kCommon,
                      {Req("vae", "trained VAE directory"),
                       Req("corpus", "corpus providing the endpoint masks"),
                       T("from", "", "id of the first mask (default: first entry)"),
                       T("to", "", "id of the last mask (default: second entry)"),
                       I("steps", 12, 2, 10000, "frames"),
                       F("sample", false, "walk between sampled latents instead of means"),
                       T("gan", "", "trained GAN directory; also writes composed frames"),
                       I("factor", 4, 1, 64, "upscaling factor of the generated layer")}});
    m["evaluate-augmentation"] = join({kCommon,
                                       {Req("real", "real corpus (dirty images, annotations, soiling maps)"),
                                        Req("generated", "generated corpus (dirty images and masks)"),
                                        I("num_classes", 2, 2, 3, "soiling classes"),
                                        T("seeds", "1,2,3", "comma-separated experiment seeds")},
                                       seg_budget_keys(1000, 32)});
    m["evaluate-degradation"] = join({kCommon,
                                      {Req("corpus", "corpus with clean, dirty, masks and scene labels"),
                                       T("seeds", "1,2,3", "comma-separated experiment seeds")},
                                      seg_budget_keys(1000, 32)});
    return m;
  }();
  return r;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string range_text(const KeySpec& k) {
  return "[" + format_real(k.min) + ", " + format_real(k.max) + "]";
}

std::string normalize(const KeySpec& k, const std::string& raw) {
  const std::string v = trim(raw);
  switch (k.type) {
    case V::text:
      if (v.find('\n') != std::string::npos) throw ConfigError("value of '" + k.key + "' spans lines");
      return v;
    case V::flag:
      if (v == "true" || v == "1" || v == "yes") return "true";
      if (v == "false" || v == "0" || v == "no") return "false";
      throw ConfigError("'" + k.key + "' expects true or false, got '" + v + "'");
    case V::integer: {
      errno = 0;
      char* end = nullptr;
      const long long x = std::strtoll(v.c_str(), &end, 10);
      if (v.empty() || *end != '\0' || errno == ERANGE) {
        throw ConfigError("'" + k.key + "' expects an integer, got '" + v + "'");
      }
      if (static_cast<double>(x) < k.min || static_cast<double>(x) > k.max) {
        throw ConfigError("'" + k.key + "' = " + v + " is outside the legal range " + range_text(k));
      }
      return std::to_string(x);
    }
    case V::real: {
      errno = 0;
      char* end = nullptr;
      const double x = std::strtod(v.c_str(), &end);
      if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(x)) {
        throw ConfigError("'" + k.key + "' expects a number, got '" + v + "'");
      }
      if (x < k.min || x > k.max) {
        throw ConfigError("'" + k.key + "' = " + v + " is outside the legal range " + range_text(k));
      }
      return format_real(x);
    }
  }
  return v;
}

const KeySpec& find_key(const std::string& command, const std::string& key) {
  for (const auto& k : command_keys(command)) {
    if (k.key == key) return k;
  }
  throw ConfigError("unknown key '" + key + "' for command " + command);
}

void apply(const std::string& command, std::map<std::string, std::string>& values, const std::string& assignment,
           const std::string& where) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + assignment + "'");
  const std::string key = trim(assignment.substr(0, eq));
  values[key] = normalize(find_key(command, key), assignment.substr(eq + 1));
}

}  // namespace

const std::string& RunConfig::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("command " + command_ + " has no key '" + key + "'");
  return it->second;
}

long long RunConfig::integer(const std::string& key) const { return std::stoll(text(key)); }
double RunConfig::real(const std::string& key) const { return std::strtod(text(key).c_str(), nullptr); }
bool RunConfig::flag(const std::string& key) const { return text(key) == "true"; }

std::string RunConfig::normalized() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string RunConfig::digest() const { return hex_digest(fnv1a64(command_ + "\n" + normalized())); }

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gen-corpus", "train-vae", "train-gan", "train-dirtygan",
                                              "train-seg", "generate", "walk", "evaluate-augmentation",
                                              "evaluate-degradation"};
  return names;
}

bool is_command(const std::string& name) { return registry().count(name) > 0; }

const std::vector<KeySpec>& command_keys(const std::string& command) {
  const auto it = registry().find(command);
  if (it == registry().end()) throw ConfigError("unknown command '" + command + "'");
  return it->second;
}

RunConfig parse_config_text(const std::string& command, const std::string& text,
                            const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> values;
  for (const auto& k : command_keys(command)) values[k.key] = k.fallback;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    apply(command, values, line, "config line " + std::to_string(lineno));
  }
  for (const auto& o : overrides) apply(command, values, o, "--set");
  for (const auto& k : command_keys(command)) {
    if (k.required && values[k.key].empty()) throw ConfigError("missing required key '" + k.key + "'");
  }
  return RunConfig(command, std::move(values));
}

RunConfig parse_config(const std::string& command, const std::filesystem::path& file,
                       const std::vector<std::string>& overrides) {
  std::string text;
  if (!file.empty()) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config_text(command, text, overrides);
}

}  // namespace soilgen::cli
