#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace soilgen::arch {

enum class LayerKind {
  conv,
  transposed_conv,
  reflection_pad,
  residual_block,
  upsample_nearest,
  flatten,
  dense,
  reshape,
};

enum class Activation { none, relu, leaky_relu, tanh, sigmoid };
enum class Norm { none, instance, batch };

inline constexpr double kLeakySlope = 0.2;

// One token of the layer notation:
//   c<k>s<s>-<out>[-<act>][-<norm>]   convolution
//   tc<k>s<s>-<out>[-<act>]           transposed convolution
//   rp-<n>                            reflection padding
//   r-<c>[-<norm>]                    residual block
//   up<f>                             nearest-neighbour upsampling
//   flat                              flatten to features
//   d-<out>[-<act>]                   fully connected
//   rs-<c>x<h>x<w>                    reshape features to a feature map
// Activation codes: R, LR, T, S. Normalization codes: IN, BN.
struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  int kernel = 0;
  int stride = 0;
  int out_channels = 0;
  Activation activation = Activation::none;
  Norm norm = Norm::none;
  int pad_size = 0;
  int scale = 0;
  int height = 0;  // reshape target
  int width = 0;   // reshape target

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

LayerSpec parse_layer_spec(std::string_view token);
std::string canonical_format(const LayerSpec& spec);

// Convenience constructors for the common kinds.
LayerSpec conv(int kernel, int stride, int out, Activation act = Activation::none, Norm norm = Norm::none);
LayerSpec transposed_conv(int kernel, int stride, int out, Activation act = Activation::none);
LayerSpec reflection_pad(int size);
LayerSpec residual_block(int channels, Norm norm = Norm::none);
LayerSpec upsample(int scale);
LayerSpec flatten();
LayerSpec dense(int out, Activation act = Activation::none);
LayerSpec reshape(int channels, int height, int width);

struct ArchDescriptor {
  std::string name;
  int input_channels = 0;
  // Spatial input size; required only when the network contains flatten.
  int input_height = 0;
  int input_width = 0;
  std::vector<LayerSpec> layers;

  friend bool operator==(const ArchDescriptor&, const ArchDescriptor&) = default;
};

struct Diagnostic {
  int layer_index = -1;  // -1: whole descriptor
  std::string rule;
  std::string message;
};

std::vector<Diagnostic> validate_descriptor(const ArchDescriptor& arch);

// Throws ValidationError carrying the first diagnostics when invalid.
void require_valid(const ArchDescriptor& arch);

// Output channels after every layer; std::nullopt when the chain is broken.
std::optional<int> output_channels(const ArchDescriptor& arch);

// Plain-text form: optional "@name <id>" and "@input <c>[x<h>x<w>]"
// directives, then one layer token per line; '#' starts a comment.
ArchDescriptor parse_arch_text(std::string_view text);
std::string to_text(const ArchDescriptor& arch);
ArchDescriptor load_arch_file(const std::string& path);

// --- builtin registry --------------------------------------------------------

struct GeneratorShape {
  int channels = 3;
  int base_width = 32;
  int residual_blocks = 4;
};
ArchDescriptor generator(const GeneratorShape& shape = {});

struct DiscriminatorShape {
  int channels = 3;
  int base_width = 64;
};
ArchDescriptor discriminator(const DiscriminatorShape& shape = {});

struct MaskSegShape {
  int channels = 3;
  int num_classes = 3;
  int base_width = 16;
  int residual_blocks = 2;
};
ArchDescriptor mask_segmentation(const MaskSegShape& shape = {});

struct VaeShape {
  int latent_dim = 32;
  int mask_size = 32;
  int encoder_width = 32;
  int decoder_width = 32;
};
ArchDescriptor vae_encoder(const VaeShape& shape = {});
ArchDescriptor vae_decoder(const VaeShape& shape = {});

std::vector<std::string> builtin_names();

// Resolves "builtin:<name>" (default shapes) or a path to an architecture file.
ArchDescriptor resolve(const std::string& reference);

}  // namespace soilgen::arch
