#include "soilgen/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "fsutil.hpp"
#include "soilgen/error.hpp"

namespace soilgen::ckpt {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'O', 'I', 'L', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::string& out, U v) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw FormatError("checkpoint truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(U);
  return v;
}

void put_floats(std::string& out, std::span<const float> values) {
  for (float f : values) put_le(out, std::bit_cast<std::uint32_t>(f));
}

void get_floats(const std::string& in, std::size_t& pos, std::span<float> values) {
  for (float& f : values) f = std::bit_cast<float>(get_le<std::uint32_t>(in, pos));
}

}  // namespace

std::string serialize(const Checkpoint& c) {
  json arrays = json::array();
  for (const auto& p : c.params.params()) {
    arrays.push_back({{"key", p.key}, {"shape", p.shape}, {"trainable", p.trainable}});
  }
  json header = {
      {"arch", c.arch_text},
      {"arrays", arrays},
      {"step", c.step},
      {"seed", c.params.seed},
      {"adam_config",
       {{"lr", c.adam_config.lr}, {"beta1", c.adam_config.beta1}, {"beta2", c.adam_config.beta2}, {"eps", c.adam_config.eps}}},
      {"adam_step", c.adam ? json(c.adam->step) : json(nullptr)},
      {"meta", c.meta},
  };
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_le(out, kFormatVersion);
  put_le(out, static_cast<std::uint64_t>(text.size()));
  out += text;
  for (const auto& p : c.params.params()) put_floats(out, p.values);
  if (c.adam) {
    for (const auto& p : c.adam->m.params()) put_floats(out, p.values);
    for (const auto& p : c.adam->v.params()) put_floats(out, p.values);
  }
  return out;
}

Checkpoint deserialize(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a soilgen checkpoint");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kFormatVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (header_len > bytes.size() - pos) throw FormatError("checkpoint header truncated");
  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  pos += header_len;

  Checkpoint c;
  try {
    c.arch_text = header.at("arch").get<std::string>();
    c.step = header.at("step").get<long>();
    c.params.seed = header.at("seed").get<std::uint64_t>();
    const auto& ac = header.at("adam_config");
    c.adam_config = {ac.at("lr").get<double>(), ac.at("beta1").get<double>(), ac.at("beta2").get<double>(),
                     ac.at("eps").get<double>()};
    c.meta = header.at("meta").get<std::map<std::string, std::string>>();
    for (const auto& a : header.at("arrays")) {
      auto shape = a.at("shape").get<std::vector<int>>();
      for (int d : shape) {
        if (d <= 0) throw FormatError("checkpoint array with non-positive dimension");
      }
      c.params.add(a.at("key").get<std::string>(), std::move(shape), a.at("trainable").get<bool>());
    }
    if (!header.at("adam_step").is_null()) {
      c.adam = nn::AdamState<float>{c.params.zeros_like(), c.params.zeros_like(), header.at("adam_step").get<long>()};
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  } catch (const ValidationError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  for (auto& p : c.params.params()) get_floats(bytes, pos, p.values);
  if (c.adam) {
    for (auto& p : c.adam->m.params()) get_floats(bytes, pos, p.values);
    for (auto& p : c.adam->v.params()) get_floats(bytes, pos, p.values);
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes after checkpoint payload");
  return c;
}

void save(const std::filesystem::path& path, const Checkpoint& ckpt) { detail::atomic_write(path, serialize(ckpt)); }

Checkpoint load(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = detail::read_file(path);
  } catch (const DataError&) {
    throw FormatError("cannot read checkpoint " + path.string());
  }
  return deserialize(bytes);
}

Checkpoint load_for(const std::filesystem::path& path, const arch::ArchDescriptor& expected) {
  Checkpoint c = load(path);
  if (c.arch_text != arch::to_text(expected)) {
    throw ValidationError("checkpoint " + path.string() + " was saved for a different architecture than '" +
                          expected.name + "'");
  }
  return c;
}

TrainableNet TrainableNet::create(const arch::ArchDescriptor& a, std::uint64_t seed, const nn::AdamConfig& cfg) {
  auto net = nn::Network<float>::create(a, seed);
  auto adam = nn::adam_init(net.params());
  return TrainableNet{std::move(net), std::move(adam), cfg};
}

Checkpoint to_checkpoint(const TrainableNet& t, long step) {
  Checkpoint c;
  c.arch_text = arch::to_text(t.net.arch());
  c.params = t.net.params();
  c.adam = t.adam;
  c.adam_config = t.adam_config;
  c.step = step;
  return c;
}

TrainableNet from_checkpoint(const Checkpoint& c, const arch::ArchDescriptor& expected) {
  if (c.arch_text != arch::to_text(expected)) {
    throw ValidationError("checkpoint architecture differs from '" + expected.name + "'");
  }
  nn::Network<float> net(expected, c.params);
  auto adam = c.adam ? *c.adam : nn::adam_init(net.params());
  return TrainableNet{std::move(net), std::move(adam), c.adam_config};
}

}  // namespace soilgen::ckpt
