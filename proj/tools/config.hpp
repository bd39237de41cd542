#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace soilgen::cli {

enum class ValueType { integer, real, text, flag };

struct KeySpec {
  std::string key;
  ValueType type = ValueType::integer;
  std::string fallback;  // empty text with required = true means no default
  double min = 0.0;      // numeric range, inclusive
  double max = 0.0;
  bool required = false;
  std::string help;
};

// Settings of one command after defaults, file values and overrides. Values
// are kept in normalized text form so the digest does not depend on spelling
// ("1e-3" and "0.001" normalize alike) or key order.
class RunConfig {
 public:
  RunConfig(std::string command, std::map<std::string, std::string> values)
      : command_(std::move(command)), values_(std::move(values)) {}

  const std::string& command() const noexcept { return command_; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  bool has(const std::string& key) const { return values_.count(key) && !values_.at(key).empty(); }
  const std::string& text(const std::string& key) const;
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("seed")); }

  // "key=value" lines, sorted by key; parse_config() reads this back.
  std::string normalized() const;
  std::string digest() const;

 private:
  std::string command_;
  std::map<std::string, std::string> values_;
};

const std::vector<std::string>& command_names();
bool is_command(const std::string& name);
// Keys accepted by a command, in documentation order.
const std::vector<KeySpec>& command_keys(const std::string& command);

// Defaults, then `file` (when non-empty), then overrides left to right.
// ConfigError naming the key for unknown keys, malformed values, values
// outside the legal range (the message states it) and missing required keys.
RunConfig parse_config(const std::string& command, const std::filesystem::path& file,
                       const std::vector<std::string>& overrides);
RunConfig parse_config_text(const std::string& command, const std::string& text,
                            const std::vector<std::string>& overrides);

}  // namespace soilgen::cli
