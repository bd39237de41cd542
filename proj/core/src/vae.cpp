#include "soilgen/vae.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "fsutil.hpp"
#include "soilgen/error.hpp"
#include "soilgen/imaging.hpp"
#include "soilgen/losses.hpp"
#include "soilgen/seed.hpp"

namespace soilgen::vae {

using nn::Tensor;
using namespace imaging;

VaeModel VaeModel::create(const arch::VaeShape& shape, std::uint64_t seed, const nn::AdamConfig& adam) {
  return VaeModel{shape,
                  ckpt::TrainableNet::create(arch::vae_encoder(shape), derive_seed(seed, "vae.encoder"), adam),
                  ckpt::TrainableNet::create(arch::vae_decoder(shape), derive_seed(seed, "vae.decoder"), adam)};
}

SoilingMask prepare_mask(const VaeModel& model, const SoilingMask& mask) {
  if (mask.height() == model.mask_size() && mask.width() == model.mask_size()) return mask;
  return resize(mask, model.mask_size(), model.mask_size());
}

namespace {

void require_working_size(const VaeModel& model, const SoilingMask& mask) {
  if (mask.height() != model.mask_size() || mask.width() != model.mask_size()) {
    throw ShapeError("VAE expects " + std::to_string(model.mask_size()) + "x" + std::to_string(model.mask_size()) +
                     " masks, got " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()));
  }
}

float clamp_log_var(float v) { return std::clamp(v, -kLogVarLimit, kLogVarLimit); }

Posterior split_heads(const Tensor<float>& out, int sample, int d) {
  Posterior p{LatentVector(d), LatentVector(d)};
  const float* row = out.sample(sample);
  for (int i = 0; i < d; ++i) {
    p.mu[i] = row[i];
    p.log_var[i] = clamp_log_var(row[d + i]);
  }
  return p;
}

Tensor<float> latent_tensor(std::span<const LatentVector> zs) {
  const int d = static_cast<int>(zs.front().size());
  Tensor<float> t(static_cast<int>(zs.size()), d, 1, 1);
  for (std::size_t n = 0; n < zs.size(); ++n) std::copy(zs[n].begin(), zs[n].end(), t.sample(static_cast<int>(n)));
  return t;
}

void require_same_dim(const LatentVector& a, const LatentVector& b, const char* what) {
  if (a.size() != b.size()) throw ShapeError(std::string(what) + ": latent dimensions differ");
}

}  // namespace

Posterior encode(const VaeModel& model, const SoilingMask& mask) {
  require_working_size(model, mask);
  const auto out = model.encoder.net.forward(to_tensor(mask));
  return split_heads(out, 0, model.latent_dim());
}

SoilingMask decode(const VaeModel& model, const LatentVector& z) {
  if (static_cast<int>(z.size()) != model.latent_dim()) throw ShapeError("decode: latent dimension mismatch");
  return mask_from_tensor(model.decoder.net.forward(latent_tensor(std::span(&z, 1))));
}

LatentVector reparameterize(const LatentVector& mu, const LatentVector& log_var, const LatentVector& noise) {
  require_same_dim(mu, log_var, "reparameterize");
  require_same_dim(mu, noise, "reparameterize");
  LatentVector z(mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + std::exp(0.5f * clamp_log_var(log_var[i])) * noise[i];
  return z;
}

double kl_divergence(const LatentVector& mu, const LatentVector& log_var) {
  require_same_dim(mu, log_var, "kl_divergence");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double m = mu[i];
    const double lv = clamp_log_var(log_var[i]);
    // exp(lv) - 1 - lv >= 0; expm1 keeps it exact near lv = 0.
    kl += m * m + (std::expm1(lv) - lv);
  }
  return std::max(0.0, 0.5 * kl);
}

LatentVector interpolate(const LatentVector& z1, const LatentVector& z2, double alpha) {
  require_same_dim(z1, z2, "interpolate");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("interpolation weight must lie in [0, 1]");
  const float a = static_cast<float>(alpha);
  const float b = static_cast<float>(1.0 - alpha);
  LatentVector z(z1.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = z1[i] == z2[i] ? z1[i] : a * z1[i] + b * z2[i];
  return z;
}

LatentVector sample_prior(int latent_dim, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  LatentVector z(latent_dim);
  for (float& v : z) v = normal(rng);
  return z;
}

TrainTrace train_vae(VaeModel& model, std::span<const SoilingMask> masks, const TrainConfig& config) {
  if (masks.size() < 2) throw DataError("VAE training needs at least two masks");
  if (config.steps < 0 || config.batch < 1) throw ParameterError("VAE training needs steps >= 0 and batch >= 1");
  for (const auto& m : masks) require_working_size(model, m);

  const int d = model.latent_dim();
  const int batch = std::min<int>(config.batch, static_cast<int>(masks.size()));
  std::mt19937_64 rng(derive_seed(config.seed, "vae.train"));
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<std::size_t> order(masks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  TrainTrace trace;
  double epoch_total = 0, epoch_recon = 0, epoch_kl = 0;
  int epoch_steps = 0;
  auto close_epoch = [&] {
    if (epoch_steps == 0) return;
    trace.epoch_total.push_back(epoch_total / epoch_steps);
    trace.epoch_recon.push_back(epoch_recon / epoch_steps);
    trace.epoch_kl.push_back(epoch_kl / epoch_steps);
    epoch_total = epoch_recon = epoch_kl = 0;
    epoch_steps = 0;
  };

  auto& enc = model.encoder;
  auto& dec = model.decoder;
  enc.net.set_mode(nn::Mode::train);
  dec.net.set_mode(nn::Mode::train);
  std::vector<SoilingMask> picked(batch);

  for (int step = 0; step < config.steps; ++step) {
    for (int i = 0; i < batch; ++i) {
      if (cursor == order.size()) {
        close_epoch();
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      picked[i] = masks[order[cursor++]];
    }
    const Tensor<float> x = to_tensor(std::span<const SoilingMask>(picked));

    nn::Tape<float> enc_tape, dec_tape;
    const Tensor<float> heads = enc.net.forward(x, enc_tape);
    Tensor<float> z(batch, d, 1, 1), eps(batch, d, 1, 1);
    double kl = 0.0;
    for (int n = 0; n < batch; ++n) {
      const Posterior p = split_heads(heads, n, d);
      for (int i = 0; i < d; ++i) eps(n, i, 0, 0) = normal(rng);
      kl += kl_divergence(p.mu, p.log_var);
      for (int i = 0; i < d; ++i) z(n, i, 0, 0) = p.mu[i] + std::exp(0.5f * p.log_var[i]) * eps(n, i, 0, 0);
    }
    kl /= batch;
    const Tensor<float> recon = dec.net.forward(z, dec_tape);
    const auto rec = nn::loss_bce(recon, x, nn::Reduction::sum_sample);
    const double total = rec.value + config.beta * kl;
    if (!std::isfinite(total)) throw DivergenceError("VAE loss is not finite", model.steps + step + 1);

    auto dec_grads = dec.net.zero_grads();
    const Tensor<float> dz = dec.net.backward(dec_tape, rec.grad, &dec_grads);
    Tensor<float> dheads(heads.shape());
    const float kl_scale = static_cast<float>(config.beta / batch);
    for (int n = 0; n < batch; ++n) {
      for (int i = 0; i < d; ++i) {
        const float mu = heads(n, i, 0, 0);
        const float raw_lv = heads(n, d + i, 0, 0);
        const float lv = clamp_log_var(raw_lv);
        const float sigma = std::exp(0.5f * lv);
        dheads(n, i, 0, 0) = dz(n, i, 0, 0) + kl_scale * mu;
        const float dlv = dz(n, i, 0, 0) * eps(n, i, 0, 0) * 0.5f * sigma + kl_scale * 0.5f * std::expm1(lv);
        dheads(n, d + i, 0, 0) = raw_lv == lv ? dlv : 0.0f;
      }
    }
    auto enc_grads = enc.net.zero_grads();
    enc.net.backward(enc_tape, dheads, &enc_grads);
    try {
      nn::adam_step(dec.net.params(), dec_grads, dec.adam, dec.adam_config);
      nn::adam_step(enc.net.params(), enc_grads, enc.adam, enc.adam_config);
    } catch (const DivergenceError&) {
      throw DivergenceError("VAE gradient is not finite", model.steps + step + 1);
    }

    trace.step_total.push_back(total);
    trace.step_kl.push_back(kl);
    epoch_total += total;
    epoch_recon += rec.value;
    epoch_kl += kl;
    ++epoch_steps;
  }
  close_epoch();
  model.steps += config.steps;
  if (config.steps > 0) model.trained = true;
  enc.net.set_mode(nn::Mode::eval);
  dec.net.set_mode(nn::Mode::eval);
  return trace;
}

std::vector<SoilingMask> manifold_walk(const VaeModel& model, const SoilingMask& a, const SoilingMask& b, int steps,
                                       const WalkOptions& options) {
  if (steps < 2) throw ParameterError("manifold walk needs at least two steps");
  if (!model.trained) std::cerr << "warning: manifold walk on an untrained VAE\n";
  const Posterior pa = encode(model, a);
  const Posterior pb = encode(model, b);
  LatentVector za = pa.mu, zb = pb.mu;
  if (options.sample) {
    std::mt19937_64 rng(derive_seed(options.seed, "vae.walk"));
    za = reparameterize(pa.mu, pa.log_var, sample_prior(model.latent_dim(), rng));
    zb = reparameterize(pb.mu, pb.log_var, sample_prior(model.latent_dim(), rng));
  }
  // Both weights come from integers so that swapping a and b reverses the
  // sequence bit for bit.
  std::vector<SoilingMask> frames;
  frames.reserve(steps);
  const float denom = static_cast<float>(steps - 1);
  for (int i = 0; i < steps; ++i) {
    const float wa = static_cast<float>(steps - 1 - i) / denom;
    const float wb = static_cast<float>(i) / denom;
    LatentVector z(za.size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = za[k] == zb[k] ? za[k] : wa * za[k] + wb * zb[k];
    frames.push_back(decode(model, z));
  }
  return frames;
}

void save(const VaeModel& model, const std::filesystem::path& dir) {
  ckpt::save(dir / "encoder.ckpt", ckpt::to_checkpoint(model.encoder, model.steps));
  ckpt::save(dir / "decoder.ckpt", ckpt::to_checkpoint(model.decoder, model.steps));
  const nlohmann::json meta = {
      {"kind", "vae"},
      {"latent_dim", model.shape.latent_dim},
      {"mask_size", model.shape.mask_size},
      {"encoder_width", model.shape.encoder_width},
      {"decoder_width", model.shape.decoder_width},
      {"steps", model.steps},
      {"trained", model.trained},
  };
  detail::atomic_write(dir / "model.json", meta.dump(2) + "\n");
}

VaeModel load(const std::filesystem::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::read_file(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("VAE model.json: " + std::string(e.what()));
  } catch (const DataError&) {
    throw DependencyError("no trained VAE at " + dir.string());
  }
  VaeModel model;
  try {
    if (meta.at("kind") != "vae") throw FormatError(dir.string() + " does not hold a VAE");
    model.shape = arch::VaeShape{meta.at("latent_dim").get<int>(), meta.at("mask_size").get<int>(),
                                 meta.at("encoder_width").get<int>(), meta.at("decoder_width").get<int>()};
    model.steps = meta.at("steps").get<long>();
    model.trained = meta.at("trained").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("VAE model.json: " + std::string(e.what()));
  }
  model.encoder = ckpt::from_checkpoint(ckpt::load(dir / "encoder.ckpt"), arch::vae_encoder(model.shape));
  model.decoder = ckpt::from_checkpoint(ckpt::load(dir / "decoder.ckpt"), arch::vae_decoder(model.shape));
  model.encoder.net.set_mode(nn::Mode::eval);
  model.decoder.net.set_mode(nn::Mode::eval);
  return model;
}

}  // namespace soilgen::vae
