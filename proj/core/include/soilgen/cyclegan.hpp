#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "soilgen/arch.hpp"
#include "soilgen/checkpoint.hpp"
#include "soilgen/image.hpp"
#include "soilgen/imaging.hpp"
#include "soilgen/soilseg.hpp"
#include "soilgen/vae.hpp"

namespace soilgen::gan {

enum class Domain { clean, soiled };

// Replay buffer of generated images shown to a discriminator. Once full, each
// query sample is swapped with a random stored one with probability 1/2.
// Capacity 0 passes batches through unchanged.
class ImagePool {
 public:
  explicit ImagePool(int capacity = 50, std::uint64_t seed = 0);

  nn::Tensor<float> query(const nn::Tensor<float>& batch);
  int capacity() const noexcept { return capacity_; }
  int size() const noexcept { return static_cast<int>(buffer_.size()); }

 private:
  int capacity_;
  std::vector<std::vector<float>> buffer_;
  std::mt19937_64 rng_;
};

struct GanShape {
  arch::GeneratorShape generator;
  arch::DiscriminatorShape discriminator;
  int pool_capacity = 50;
};

inline constexpr nn::AdamConfig kGanAdam{2e-4, 0.5, 0.999, 1e-8};

struct CycleGanModel {
  GanShape shape;
  ckpt::TrainableNet g_c2s;     // G: clean -> soiled
  ckpt::TrainableNet g_s2c;     // F: soiled -> clean
  ckpt::TrainableNet d_soiled;  // judges the soiled domain
  ckpt::TrainableNet d_clean;   // judges the clean domain
  ImagePool pool_soiled;
  ImagePool pool_clean;
  long steps = 0;
  bool trained = false;
  bool masked = false;  // trained as DirtyGAN

  static CycleGanModel create(const GanShape& shape, std::uint64_t seed, const nn::AdamConfig& adam = kGanAdam);
  // Arbitrary generator/discriminator descriptors, e.g. tiny test networks.
  static CycleGanModel from_archs(const arch::ArchDescriptor& generator, const arch::ArchDescriptor& discriminator,
                                  std::uint64_t seed, const nn::AdamConfig& adam = kGanAdam, int pool_capacity = 50);
};

// L1 between x (network range) and its round trip: F(G(x)) for clean, G(F(x)) for soiled.
double cycle_loss(const CycleGanModel& model, const nn::Tensor<float>& x, Domain domain);
// L1 between x and the generator into x's own domain: F(x) for clean, G(x) for soiled.
double identity_loss(const CycleGanModel& model, const nn::Tensor<float>& x, Domain domain);

// (1 - m) * x + m * g(x) in storage range; pixels with m = 0 are copied.
Image masked_translate(const nn::Network<float>& g, const Image& x, const SoilingMask& mask);

struct TrainConfig {
  int steps = 2000;
  int batch = 1;
  int downscale = 4;  // training resolution = corpus resolution / downscale
  double lambda_cycle = 10.0;
  double lambda_identity = 5.0;
  // Learning rates stay constant for this fraction of the steps, then decay
  // linearly towards zero. 1 disables the decay.
  double decay_start = 0.5;
  bool train_generators = true;
  bool train_discriminators = true;
  std::uint64_t seed = 0;
};

// Per-step losses.
struct TrainTrace {
  std::vector<double> generator_adv;
  std::vector<double> cycle_clean;
  std::vector<double> cycle_soiled;
  std::vector<double> identity;
  std::vector<double> d_soiled_real;
  std::vector<double> d_soiled_fake;
  std::vector<double> d_clean_real;
  std::vector<double> d_clean_fake;

  double cycle(std::size_t step) const { return cycle_clean[step] + cycle_soiled[step]; }
};

// Alternating generator / discriminator Adam updates on unpaired corpora.
// DataError for an empty corpus; DivergenceError with the step on NaN.
TrainTrace train_cyclegan(CycleGanModel& model, std::span<const Image> clean, std::span<const Image> soiled,
                          const TrainConfig& config);

struct DirtyConfig : TrainConfig {
  double sigma = 0.8;  // smoothing of segmentation masks
  bool use_vae = true;
  // Gate for the clean -> soiled branch when use_vae is false.
  std::optional<SoilingMask> fixed_mask;
};

// Masked variant: the clean -> soiled branch is gated by VAE masks (half prior
// samples, half interpolations between encodings of two bank masks), the
// soiled -> clean branch by gamma(M(y)). All losses, identity included, see
// composited images.
// DependencyError when the VAE or segmentation model is untrained.
TrainTrace train_dirtygan(CycleGanModel& model, const vae::VaeModel& vae, const seg::SegModel& seg,
                          std::span<const Image> clean, std::span<const Image> soiled,
                          std::span<const SoilingMask> mask_bank, const DirtyConfig& config);

// Decoded alphas below half an 8-bit step are set to 0.
inline constexpr float kBackgroundAlpha = 0.5f / 255.0f;

// One VAE mask at size x size: a prior sample or, with a bank of two or more
// masks, an interpolation of two bank encodings, chosen with equal odds.
SoilingMask sample_vae_mask(const vae::VaeModel& vae, std::span<const SoilingMask> bank, std::mt19937_64& rng,
                            int size);

// G applied at the image's own resolution, storage range in and out.
Image translate(const CycleGanModel& model, const Image& low_res);

struct GenerateOptions {
  int factor = 4;
  double sigma = 0.8;
  imaging::ComposeOptions compose;
};

// compose(I, G(downscale(I)), mask, factor) with a supplied mask at the
// reduced resolution; the annotation is the upscaled mask actually used.
// DependencyError for an untrained model.
imaging::Composite generate_soiled(const CycleGanModel& model, const Image& clean, const SoilingMask& mask,
                                   const GenerateOptions& options = {});

// Baseline chain: I_s = G(downscale(I)), m = gamma(M(I_s)), compose(I, I_s, m, factor).
imaging::Composite generate_soiled_baseline(const CycleGanModel& model, const seg::SegModel& seg, const Image& clean,
                                            const GenerateOptions& options = {});

// gan/{g_c2s,g_s2c,d_soiled,d_clean}.ckpt and gan/model.json
void save(const CycleGanModel& model, const std::filesystem::path& dir);
CycleGanModel load(const std::filesystem::path& dir);

}  // namespace soilgen::gan
