#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "soilgen/arch.hpp"
#include "soilgen/checkpoint.hpp"
#include "soilgen/image.hpp"

namespace soilgen::vae {

using LatentVector = std::vector<float>;

inline constexpr float kLogVarLimit = 20.0f;

struct Posterior {
  LatentVector mu;
  LatentVector log_var;  // clamped to [-20, 20]
};

struct VaeModel {
  arch::VaeShape shape;
  ckpt::TrainableNet encoder;  // mask -> [mu | log_var]
  ckpt::TrainableNet decoder;  // z -> mask in (0, 1)
  long steps = 0;
  bool trained = false;

  static VaeModel create(const arch::VaeShape& shape, std::uint64_t seed, const nn::AdamConfig& adam = {1e-3});
  int latent_dim() const noexcept { return shape.latent_dim; }
  int mask_size() const noexcept { return shape.mask_size; }
};

// Brings an arbitrary mask to the model's working resolution.
SoilingMask prepare_mask(const VaeModel& model, const SoilingMask& mask);

// Throws ShapeError unless the mask is mask_size x mask_size.
Posterior encode(const VaeModel& model, const SoilingMask& mask);
SoilingMask decode(const VaeModel& model, const LatentVector& z);

// z = mu + exp(log_var / 2) * noise, with log_var clamped to [-20, 20].
LatentVector reparameterize(const LatentVector& mu, const LatentVector& log_var, const LatentVector& noise);

// 0.5 * sum(mu^2 + exp(log_var) - 1 - log_var)
double kl_divergence(const LatentVector& mu, const LatentVector& log_var);

// alpha * z1 + (1 - alpha) * z2; ParameterError for alpha outside [0, 1].
LatentVector interpolate(const LatentVector& z1, const LatentVector& z2, double alpha);

LatentVector sample_prior(int latent_dim, std::mt19937_64& rng);

struct TrainConfig {
  int steps = 2000;
  int batch = 16;
  double beta = 1.0;
  std::uint64_t seed = 0;
};

struct TrainTrace {
  // One entry per epoch (a pass over the shuffled corpus), batch-averaged.
  std::vector<double> epoch_total;
  std::vector<double> epoch_recon;
  std::vector<double> epoch_kl;
  // One entry per optimizer step.
  std::vector<double> step_total;
  std::vector<double> step_kl;
};

// Minimizes per-sample summed reconstruction BCE + beta * KL with Adam. Masks
// must already be at the working resolution. DataError for fewer than two
// masks; DivergenceError (with the step) on a non-finite loss.
TrainTrace train_vae(VaeModel& model, std::span<const SoilingMask> masks, const TrainConfig& config);

struct WalkOptions {
  bool sample = false;  // interpolate sampled z instead of posterior means
  std::uint64_t seed = 0;
};

// Decodes the convex combinations between the encodings of a and b at
// alpha = 1 -> 0 in `steps` equal increments. steps >= 2 (ParameterError).
// An untrained model only triggers a warning on stderr.
std::vector<SoilingMask> manifold_walk(const VaeModel& model, const SoilingMask& a, const SoilingMask& b, int steps,
                                       const WalkOptions& options = {});

// vae/encoder.ckpt, vae/decoder.ckpt, vae/model.json
void save(const VaeModel& model, const std::filesystem::path& dir);
VaeModel load(const std::filesystem::path& dir);

}  // namespace soilgen::vae
