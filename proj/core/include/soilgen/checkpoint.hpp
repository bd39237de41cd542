#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "soilgen/adam.hpp"
#include "soilgen/arch.hpp"
#include "soilgen/nn.hpp"

namespace soilgen::ckpt {

// File layout: "SOILCKPT", u32 format version, u64 header length, a JSON
// header (architecture text, array table, optimizer config, step, metadata),
// then every array as little-endian float32 in header order: parameters,
// followed by Adam first and second moments when present.
struct Checkpoint {
  std::string arch_text;
  nn::ParamStore<float> params;
  std::optional<nn::AdamState<float>> adam;
  nn::AdamConfig adam_config;
  long step = 0;
  std::map<std::string, std::string> meta;
};

inline constexpr std::uint32_t kFormatVersion = 1;

std::string serialize(const Checkpoint& ckpt);
// Throws FormatError on a malformed container.
Checkpoint deserialize(const std::string& bytes);

void save(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load(const std::filesystem::path& path);

// As load(), but rejects (ValidationError) a checkpoint whose architecture
// text differs from to_text(expected).
Checkpoint load_for(const std::filesystem::path& path, const arch::ArchDescriptor& expected);

// A network together with its optimizer state.
struct TrainableNet {
  nn::Network<float> net;
  nn::AdamState<float> adam;
  nn::AdamConfig adam_config;

  static TrainableNet create(const arch::ArchDescriptor& a, std::uint64_t seed, const nn::AdamConfig& cfg);
};

Checkpoint to_checkpoint(const TrainableNet& t, long step);
TrainableNet from_checkpoint(const Checkpoint& c, const arch::ArchDescriptor& expected);

}  // namespace soilgen::ckpt
