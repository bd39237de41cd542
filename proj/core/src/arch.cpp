#include "soilgen/arch.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "soilgen/error.hpp"

namespace soilgen::arch {
namespace {

constexpr int kMaxField = 1 << 20;

// Cursor over one token; every failure reports the byte offset.
class TokenReader {
 public:
  explicit TokenReader(std::string_view token) : token_(token) {}

  bool done() const noexcept { return pos_ == token_.size(); }
  std::size_t pos() const noexcept { return pos_; }

  [[noreturn]] void fail(const std::string& reason) const {
    throw ParseError(std::string(token_), pos_, reason);
  }

  bool consume(std::string_view literal) {
    if (token_.substr(pos_, literal.size()) == literal) {
      pos_ += literal.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view literal) {
    if (!consume(literal)) fail("expected '" + std::string(literal) + "'");
  }

  int number() {
    const std::size_t start = pos_;
    while (pos_ < token_.size() && token_[pos_] >= '0' && token_[pos_] <= '9') ++pos_;
    if (pos_ == start) fail("expected a positive integer");
    if (token_[start] == '0') {
      pos_ = start;
      fail("integers must be positive without leading zeros");
    }
    if (pos_ - start > 7) {
      pos_ = start;
      fail("integer too large");
    }
    int value = 0;
    std::from_chars(token_.data() + start, token_.data() + pos_, value);
    if (value > kMaxField) {
      pos_ = start;
      fail("integer too large");
    }
    return value;
  }

  // Next '-'-separated field, or empty when at the end.
  std::string_view field() {
    if (done()) return {};
    expect("-");
    const std::size_t start = pos_;
    while (pos_ < token_.size() && token_[pos_] != '-') ++pos_;
    if (pos_ == start) fail("empty field");
    return token_.substr(start, pos_ - start);
  }

  void rewind(std::size_t pos) { pos_ = pos; }

 private:
  std::string_view token_;
  std::size_t pos_ = 0;
};

std::optional<Activation> activation_code(std::string_view code) {
  if (code == "R") return Activation::relu;
  if (code == "LR") return Activation::leaky_relu;
  if (code == "T") return Activation::tanh;
  if (code == "S") return Activation::sigmoid;
  return std::nullopt;
}

std::optional<Norm> norm_code(std::string_view code) {
  if (code == "IN") return Norm::instance;
  if (code == "BN") return Norm::batch;
  return std::nullopt;
}

const char* activation_text(Activation act) {
  switch (act) {
    case Activation::relu: return "R";
    case Activation::leaky_relu: return "LR";
    case Activation::tanh: return "T";
    case Activation::sigmoid: return "S";
    case Activation::none: break;
  }
  return "";
}

const char* norm_text(Norm norm) {
  switch (norm) {
    case Norm::instance: return "IN";
    case Norm::batch: return "BN";
    case Norm::none: break;
  }
  return "";
}

// Parses the optional "[-<act>][-<norm>]" tail.
void parse_suffix(TokenReader& in, LayerSpec& spec, bool allow_act, bool allow_norm) {
  bool seen_act = false;
  bool seen_norm = false;
  while (!in.done()) {
    const std::size_t at = in.pos();
    const std::string_view code = in.field();
    if (auto act = activation_code(code); act && allow_act && !seen_act && !seen_norm) {
      spec.activation = *act;
      seen_act = true;
    } else if (auto norm = norm_code(code); norm && allow_norm && !seen_norm) {
      spec.norm = *norm;
      seen_norm = true;
    } else {
      in.rewind(at + 1);
      in.fail("unexpected suffix '" + std::string(code) + "'");
    }
  }
}

std::string diag_layer(int index, const LayerSpec& spec) {
  return "layer " + std::to_string(index) + " (" + canonical_format(spec) + ")";
}

}  // namespace

LayerSpec parse_layer_spec(std::string_view token) {
  TokenReader in(token);
  if (token.empty()) in.fail("empty token");
  LayerSpec spec;
  if (in.consume("tc")) {
    spec.kind = LayerKind::transposed_conv;
    spec.kernel = in.number();
    in.expect("s");
    spec.stride = in.number();
    in.expect("-");
    spec.out_channels = in.number();
    parse_suffix(in, spec, true, false);
  } else if (in.consume("rp-")) {
    spec.kind = LayerKind::reflection_pad;
    spec.pad_size = in.number();
  } else if (in.consume("rs-")) {
    spec.kind = LayerKind::reshape;
    spec.out_channels = in.number();
    in.expect("x");
    spec.height = in.number();
    in.expect("x");
    spec.width = in.number();
  } else if (in.consume("r-")) {
    spec.kind = LayerKind::residual_block;
    spec.out_channels = in.number();
    parse_suffix(in, spec, false, true);
  } else if (in.consume("up")) {
    spec.kind = LayerKind::upsample_nearest;
    spec.scale = in.number();
  } else if (in.consume("flat")) {
    spec.kind = LayerKind::flatten;
  } else if (in.consume("d-")) {
    spec.kind = LayerKind::dense;
    spec.out_channels = in.number();
    parse_suffix(in, spec, true, false);
  } else if (in.consume("c")) {
    spec.kind = LayerKind::conv;
    spec.kernel = in.number();
    in.expect("s");
    spec.stride = in.number();
    in.expect("-");
    spec.out_channels = in.number();
    parse_suffix(in, spec, true, true);
  } else {
    in.fail("unknown layer kind");
  }
  if (!in.done()) in.fail("trailing characters");
  return spec;
}

std::string canonical_format(const LayerSpec& spec) {
  std::string out;
  auto suffix = [&](Activation act, Norm norm) {
    if (act != Activation::none) out += std::string("-") + activation_text(act);
    if (norm != Norm::none) out += std::string("-") + norm_text(norm);
  };
  switch (spec.kind) {
    case LayerKind::conv:
      out = "c" + std::to_string(spec.kernel) + "s" + std::to_string(spec.stride) + "-" +
            std::to_string(spec.out_channels);
      suffix(spec.activation, spec.norm);
      break;
    case LayerKind::transposed_conv:
      out = "tc" + std::to_string(spec.kernel) + "s" + std::to_string(spec.stride) + "-" +
            std::to_string(spec.out_channels);
      suffix(spec.activation, Norm::none);
      break;
    case LayerKind::reflection_pad:
      out = "rp-" + std::to_string(spec.pad_size);
      break;
    case LayerKind::residual_block:
      out = "r-" + std::to_string(spec.out_channels);
      suffix(Activation::none, spec.norm);
      break;
    case LayerKind::upsample_nearest:
      out = "up" + std::to_string(spec.scale);
      break;
    case LayerKind::flatten:
      out = "flat";
      break;
    case LayerKind::dense:
      out = "d-" + std::to_string(spec.out_channels);
      suffix(spec.activation, Norm::none);
      break;
    case LayerKind::reshape:
      out = "rs-" + std::to_string(spec.out_channels) + "x" + std::to_string(spec.height) + "x" +
            std::to_string(spec.width);
      break;
  }
  return out;
}

LayerSpec conv(int kernel, int stride, int out, Activation act, Norm norm) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.kernel = kernel;
  s.stride = stride;
  s.out_channels = out;
  s.activation = act;
  s.norm = norm;
  return s;
}

LayerSpec transposed_conv(int kernel, int stride, int out, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::transposed_conv;
  s.kernel = kernel;
  s.stride = stride;
  s.out_channels = out;
  s.activation = act;
  return s;
}

LayerSpec reflection_pad(int size) {
  LayerSpec s;
  s.kind = LayerKind::reflection_pad;
  s.pad_size = size;
  return s;
}

LayerSpec residual_block(int channels, Norm norm) {
  LayerSpec s;
  s.kind = LayerKind::residual_block;
  s.out_channels = channels;
  s.norm = norm;
  return s;
}

LayerSpec upsample(int scale) {
  LayerSpec s;
  s.kind = LayerKind::upsample_nearest;
  s.scale = scale;
  return s;
}

LayerSpec flatten() {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}

LayerSpec dense(int out, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.out_channels = out;
  s.activation = act;
  return s;
}

LayerSpec reshape(int channels, int height, int width) {
  LayerSpec s;
  s.kind = LayerKind::reshape;
  s.out_channels = channels;
  s.height = height;
  s.width = width;
  return s;
}

std::vector<Diagnostic> validate_descriptor(const ArchDescriptor& arch) {
  std::vector<Diagnostic> diags;
  auto report = [&](int index, std::string rule, std::string message) {
    diags.push_back({index, std::move(rule), std::move(message)});
  };
  if (arch.layers.empty()) {
    report(-1, "empty", "empty architecture");
    return diags;
  }
  if (arch.input_channels <= 0) report(-1, "input", "input channel count must be positive");

  // Spatial sizes are tracked only when the descriptor declares them.
  const bool sized = arch.input_height > 0 && arch.input_width > 0;
  int channels = arch.input_channels;
  int height = arch.input_height;
  int width = arch.input_width;
  bool flat = false;
  bool prev_pad = false;

  for (int i = 0; i < static_cast<int>(arch.layers.size()); ++i) {
    const LayerSpec& l = arch.layers[static_cast<std::size_t>(i)];
    const std::string where = diag_layer(i, l);
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::transposed_conv: {
        if (l.kernel <= 0 || l.stride <= 0 || l.out_channels <= 0) {
          report(i, "required-field", where + ": kernel, stride and channels must be positive");
          break;
        }
        if (l.kind == LayerKind::transposed_conv && l.kernel < l.stride) {
          report(i, "geometry", where + ": transposed convolution needs kernel >= stride");
        }
        if (l.kind == LayerKind::transposed_conv && l.norm != Norm::none) {
          report(i, "norm", where + ": transposed convolution takes no normalization");
        }
        if (flat) report(i, "spatial", where + ": convolution after flatten needs a reshape");
        if (sized) {
          if (l.kind == LayerKind::conv) {
            if (prev_pad) {
              if (height < l.kernel || width < l.kernel) {
                report(i, "spatial", where + ": input smaller than kernel");
              }
              height = (height - l.kernel) / l.stride + 1;
              width = (width - l.kernel) / l.stride + 1;
            } else {
              height = (height + l.stride - 1) / l.stride;
              width = (width + l.stride - 1) / l.stride;
            }
          } else {
            height *= l.stride;
            width *= l.stride;
          }
        }
        channels = l.out_channels;
        break;
      }
      case LayerKind::reflection_pad:
        if (l.pad_size <= 0) report(i, "required-field", where + ": pad size must be positive");
        if (flat) report(i, "spatial", where + ": padding after flatten");
        if (sized) {
          if (l.pad_size >= height || l.pad_size >= width) {
            report(i, "spatial", where + ": reflection pad must be smaller than the input");
          }
          height += 2 * l.pad_size;
          width += 2 * l.pad_size;
        }
        break;
      case LayerKind::residual_block:
        if (l.out_channels <= 0) {
          report(i, "required-field", where + ": channels must be positive");
        } else if (l.out_channels != channels) {
          report(i, "channel-chain", where + ": declares " + std::to_string(l.out_channels) +
                                         " channels but receives " + std::to_string(channels));
        }
        if (flat) report(i, "spatial", where + ": residual block after flatten");
        break;
      case LayerKind::upsample_nearest:
        if (l.scale <= 0) report(i, "required-field", where + ": scale must be positive");
        if (sized) {
          height *= l.scale;
          width *= l.scale;
        }
        break;
      case LayerKind::flatten:
        if (!sized) {
          report(i, "spatial", where + ": flatten requires a declared input size");
        } else {
          channels = channels * height * width;
          height = width = 1;
        }
        flat = true;
        break;
      case LayerKind::dense:
        if (l.out_channels <= 0) report(i, "required-field", where + ": units must be positive");
        if (sized && (height != 1 || width != 1)) {
          report(i, "spatial", where + ": dense layer needs flattened input");
        }
        channels = l.out_channels;
        break;
      case LayerKind::reshape:
        if (l.out_channels <= 0 || l.height <= 0 || l.width <= 0) {
          report(i, "required-field", where + ": reshape dimensions must be positive");
        } else if (sized && l.out_channels * l.height * l.width != channels * height * width) {
          report(i, "channel-chain", where + ": reshape of " + std::to_string(channels * height * width) +
                                         " features into " +
                                         std::to_string(l.out_channels * l.height * l.width));
        }
        channels = l.out_channels;
        height = l.height;
        width = l.width;
        flat = false;
        break;
    }
    if (l.kind != LayerKind::conv && l.kind != LayerKind::residual_block && l.norm != Norm::none &&
        l.kind != LayerKind::transposed_conv) {
      report(i, "norm", where + ": normalization not allowed on this layer kind");
    }
    if (sized && (height <= 0 || width <= 0)) {
      report(i, "spatial", where + ": spatial size collapses to zero");
      height = std::max(height, 1);
      width = std::max(width, 1);
    }
    prev_pad = l.kind == LayerKind::reflection_pad;
  }
  return diags;
}

void require_valid(const ArchDescriptor& arch) {
  const auto diags = validate_descriptor(arch);
  if (diags.empty()) return;
  std::string message = "invalid architecture '" + arch.name + "':";
  for (const auto& d : diags) message += " [" + d.rule + "] " + d.message + ";";
  throw ValidationError(message);
}

std::optional<int> output_channels(const ArchDescriptor& arch) {
  if (!validate_descriptor(arch).empty()) return std::nullopt;
  int channels = arch.input_channels;
  int features = arch.input_channels * std::max(arch.input_height, 1) * std::max(arch.input_width, 1);
  for (const LayerSpec& l : arch.layers) {
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::transposed_conv:
      case LayerKind::dense:
      case LayerKind::reshape:
        channels = l.out_channels;
        break;
      case LayerKind::flatten:
        channels = features;
        break;
      default:
        break;
    }
    features = channels;
  }
  return channels;
}

ArchDescriptor parse_arch_text(std::string_view text) {
  ArchDescriptor arch;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.rfind("@name", 0) == 0) {
      arch.name = line.size() > 5 ? line.substr(line.find_first_not_of(" \t", 5)) : "";
    } else if (line.rfind("@input", 0) == 0) {
      std::string spec = line.substr(6);
      spec.erase(0, spec.find_first_not_of(" \t"));
      int c = 0, h = 0, w = 0;
      char x1 = 0, x2 = 0;
      std::istringstream fields(spec);
      fields >> c;
      if (fields >> x1) {
        fields >> h >> x2 >> w;
        if (x1 != 'x' || x2 != 'x' || !fields) {
          throw FormatError("line " + std::to_string(line_no) + ": malformed @input directive");
        }
      }
      if (c <= 0) throw FormatError("line " + std::to_string(line_no) + ": malformed @input directive");
      arch.input_channels = c;
      arch.input_height = h;
      arch.input_width = w;
    } else {
      arch.layers.push_back(parse_layer_spec(line));
    }
  }
  return arch;
}

std::string to_text(const ArchDescriptor& arch) {
  std::string out;
  if (!arch.name.empty()) out += "@name " + arch.name + "\n";
  out += "@input " + std::to_string(arch.input_channels);
  if (arch.input_height > 0 || arch.input_width > 0) {
    out += "x" + std::to_string(arch.input_height) + "x" + std::to_string(arch.input_width);
  }
  out += "\n";
  for (const LayerSpec& l : arch.layers) out += canonical_format(l) + "\n";
  return out;
}

ArchDescriptor load_arch_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read architecture file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_arch_text(buffer.str());
}

ArchDescriptor generator(const GeneratorShape& shape) {
  const int w = shape.base_width;
  ArchDescriptor a;
  a.name = "generator";
  a.input_channels = shape.channels;
  a.layers.push_back(conv(7, 1, w, Activation::relu));
  a.layers.push_back(conv(3, 2, 2 * w, Activation::relu));
  a.layers.push_back(conv(3, 2, 4 * w, Activation::relu));
  for (int i = 0; i < shape.residual_blocks; ++i) a.layers.push_back(residual_block(4 * w));
  a.layers.push_back(transposed_conv(3, 2, 2 * w, Activation::relu));
  a.layers.push_back(transposed_conv(3, 2, w, Activation::relu));
  a.layers.push_back(reflection_pad(3));
  a.layers.push_back(conv(7, 1, shape.channels, Activation::tanh));
  return a;
}

ArchDescriptor discriminator(const DiscriminatorShape& shape) {
  const int w = shape.base_width;
  ArchDescriptor a;
  a.name = "discriminator";
  a.input_channels = shape.channels;
  a.layers.push_back(conv(4, 2, w, Activation::leaky_relu));
  a.layers.push_back(conv(4, 2, 2 * w, Activation::leaky_relu));
  a.layers.push_back(conv(4, 2, 4 * w, Activation::leaky_relu));
  a.layers.push_back(conv(4, 1, 1, Activation::sigmoid));
  return a;
}

ArchDescriptor mask_segmentation(const MaskSegShape& shape) {
  const int w = shape.base_width;
  ArchDescriptor a;
  a.name = "mask-seg";
  a.input_channels = shape.channels;
  a.layers.push_back(conv(3, 1, w, Activation::relu, Norm::instance));
  a.layers.push_back(conv(3, 2, 2 * w, Activation::relu, Norm::instance));
  a.layers.push_back(conv(3, 2, 4 * w, Activation::relu, Norm::instance));
  for (int i = 0; i < shape.residual_blocks; ++i) a.layers.push_back(residual_block(4 * w, Norm::batch));
  a.layers.push_back(upsample(2));
  a.layers.push_back(conv(3, 1, 2 * w, Activation::relu, Norm::instance));
  a.layers.push_back(upsample(2));
  a.layers.push_back(conv(3, 1, w, Activation::relu, Norm::instance));
  a.layers.push_back(conv(3, 1, shape.num_classes));
  return a;
}

ArchDescriptor vae_encoder(const VaeShape& shape) {
  if (shape.mask_size % 4 != 0) throw ParameterError("VAE mask size must be divisible by 4");
  const int w = shape.encoder_width;
  ArchDescriptor a;
  a.name = "vae-encoder";
  a.input_channels = 1;
  a.input_height = shape.mask_size;
  a.input_width = shape.mask_size;
  a.layers.push_back(conv(3, 2, w, Activation::relu));
  a.layers.push_back(conv(3, 2, 2 * w, Activation::relu));
  a.layers.push_back(flatten());
  // Mean and log-variance heads packed into one output: [mu | log_var].
  a.layers.push_back(dense(2 * shape.latent_dim));
  return a;
}

ArchDescriptor vae_decoder(const VaeShape& shape) {
  if (shape.mask_size % 4 != 0) throw ParameterError("VAE mask size must be divisible by 4");
  const int w = shape.decoder_width;
  const int s = shape.mask_size / 4;
  ArchDescriptor a;
  a.name = "vae-decoder";
  a.input_channels = shape.latent_dim;
  a.input_height = 1;
  a.input_width = 1;
  a.layers.push_back(dense(2 * w * s * s, Activation::relu));
  a.layers.push_back(reshape(2 * w, s, s));
  a.layers.push_back(transposed_conv(3, 2, 4 * w, Activation::relu));
  a.layers.push_back(transposed_conv(3, 2, w, Activation::relu));
  a.layers.push_back(reflection_pad(1));
  a.layers.push_back(conv(3, 1, 1, Activation::sigmoid));
  return a;
}

std::vector<std::string> builtin_names() {
  return {"generator", "discriminator", "mask-seg", "vae-encoder", "vae-decoder"};
}

ArchDescriptor resolve(const std::string& reference) {
  constexpr std::string_view prefix = "builtin:";
  if (reference.rfind(prefix, 0) == 0) {
    const std::string name = reference.substr(prefix.size());
    if (name == "generator") return generator();
    if (name == "discriminator") return discriminator();
    if (name == "mask-seg") return mask_segmentation();
    if (name == "vae-encoder") return vae_encoder();
    if (name == "vae-decoder") return vae_decoder();
    throw ConfigError("unknown builtin architecture '" + name + "'");
  }
  return load_arch_file(reference);
}

}  // namespace soilgen::arch
