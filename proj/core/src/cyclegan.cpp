#include "soilgen/cyclegan.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "fsutil.hpp"
#include "soilgen/error.hpp"
#include "soilgen/losses.hpp"
#include "soilgen/seed.hpp"

namespace soilgen::gan {

using nn::Tensor;
using namespace imaging;

// --- image pool ---------------------------------------------------------------

ImagePool::ImagePool(int capacity, std::uint64_t seed) : capacity_(capacity), rng_(derive_seed(seed, "pool")) {
  if (capacity < 0) throw ParameterError("image pool capacity must be non-negative");
}

Tensor<float> ImagePool::query(const Tensor<float>& batch) {
  if (capacity_ == 0) return batch;
  Tensor<float> out = batch;
  const std::size_t n = batch.sample_size();
  for (int s = 0; s < batch.n(); ++s) {
    std::vector<float> img(batch.sample(s), batch.sample(s) + n);
    if (size() < capacity_) {
      buffer_.push_back(std::move(img));
      continue;
    }
    if (std::uniform_int_distribution<int>(0, 1)(rng_) == 0) continue;
    const auto k = std::uniform_int_distribution<std::size_t>(0, buffer_.size() - 1)(rng_);
    if (buffer_[k].size() != n) throw ShapeError("image pool holds images of a different size");
    std::copy(buffer_[k].begin(), buffer_[k].end(), out.sample(s));
    buffer_[k] = std::move(img);
  }
  return out;
}

// --- model ----------------------------------------------------------------------

CycleGanModel CycleGanModel::from_archs(const arch::ArchDescriptor& generator, const arch::ArchDescriptor& discriminator,
                                        std::uint64_t seed, const nn::AdamConfig& adam, int pool_capacity) {
  CycleGanModel m{GanShape{{}, {}, pool_capacity},
                  ckpt::TrainableNet::create(generator, derive_seed(seed, "gan.g_c2s"), adam),
                  ckpt::TrainableNet::create(generator, derive_seed(seed, "gan.g_s2c"), adam),
                  ckpt::TrainableNet::create(discriminator, derive_seed(seed, "gan.d_soiled"), adam),
                  ckpt::TrainableNet::create(discriminator, derive_seed(seed, "gan.d_clean"), adam),
                  ImagePool(pool_capacity, derive_seed(seed, "gan.pool_soiled")),
                  ImagePool(pool_capacity, derive_seed(seed, "gan.pool_clean"))};
  return m;
}

CycleGanModel CycleGanModel::create(const GanShape& shape, std::uint64_t seed, const nn::AdamConfig& adam) {
  CycleGanModel m = from_archs(arch::generator(shape.generator), arch::discriminator(shape.discriminator), seed, adam,
                               shape.pool_capacity);
  m.shape = shape;
  return m;
}

// --- losses -----------------------------------------------------------------------

double cycle_loss(const CycleGanModel& model, const Tensor<float>& x, Domain domain) {
  const auto& first = domain == Domain::clean ? model.g_c2s.net : model.g_s2c.net;
  const auto& second = domain == Domain::clean ? model.g_s2c.net : model.g_c2s.net;
  const Tensor<float> rec = second.forward(first.forward(x));
  if (!rec.same_shape(x)) throw ShapeError("cycle reconstruction changes the tensor shape");
  return nn::loss_l1(rec, x).value;
}

double identity_loss(const CycleGanModel& model, const Tensor<float>& x, Domain domain) {
  const auto& g = domain == Domain::clean ? model.g_s2c.net : model.g_c2s.net;
  const Tensor<float> out = g.forward(x);
  if (!out.same_shape(x)) throw ShapeError("identity mapping changes the tensor shape");
  return nn::loss_l1(out, x).value;
}

Image masked_translate(const nn::Network<float>& g, const Image& x, const SoilingMask& mask) {
  if (!mask.same_size(x)) throw ShapeError("masked_translate: mask and image differ in size");
  const Image gx = from_network_range(g.forward(to_network_range(x)));
  if (gx.height() != x.height() || gx.width() != x.width() || gx.channels() != x.channels()) {
    throw ShapeError("masked_translate: generator changes the image shape");
  }
  return blend(x, gx, mask);
}

// --- training -----------------------------------------------------------------------

namespace {

// out = (1 - m) * a + m * g with m of shape (N, 1, H, W).
Tensor<float> blend_t(const Tensor<float>& a, const Tensor<float>& g, const Tensor<float>& m) {
  if (!a.same_shape(g) || m.n() != a.n() || m.h() != a.h() || m.w() != a.w()) {
    throw ShapeError("gate mask does not match the translated batch");
  }
  Tensor<float> out(a.shape());
  for (int n = 0; n < a.n(); ++n)
    for (int c = 0; c < a.c(); ++c)
      for (int y = 0; y < a.h(); ++y)
        for (int x = 0; x < a.w(); ++x) {
          const float mv = m(n, 0, y, x);
          out(n, c, y, x) = (1.0f - mv) * a(n, c, y, x) + mv * g(n, c, y, x);
        }
  return out;
}

// Splits d(out) of blend_t into the gated part (m * d) and accumulates the
// pass-through part ((1 - m) * d) into d_a when non-null.
Tensor<float> split_blend_grad(const Tensor<float>& d, const Tensor<float>& m, Tensor<float>* d_a) {
  Tensor<float> dg(d.shape());
  for (int n = 0; n < d.n(); ++n)
    for (int c = 0; c < d.c(); ++c)
      for (int y = 0; y < d.h(); ++y)
        for (int x = 0; x < d.w(); ++x) {
          const float mv = m(n, 0, y, x);
          dg(n, c, y, x) = mv * d(n, c, y, x);
          if (d_a) (*d_a)(n, c, y, x) += (1.0f - mv) * d(n, c, y, x);
        }
  return dg;
}

Tensor<float> scaled(Tensor<float> t, double s) {
  for (float& v : t.values()) v = static_cast<float>(v * s);
  return t;
}

void add_into(Tensor<float>& a, const Tensor<float>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

Tensor<float> gather(const std::vector<Tensor<float>>& items, const std::vector<std::size_t>& idx) {
  const auto& first = items[idx.front()];
  Tensor<float> out(static_cast<int>(idx.size()), first.c(), first.h(), first.w());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& t = items[idx[b]];
    if (!t.same_shape(first)) throw ShapeError("corpus images differ in size");
    std::copy(t.data(), t.data() + t.size(), out.sample(static_cast<int>(b)));
  }
  return out;
}

std::vector<Tensor<float>> prepare(std::span<const Image> images, int factor) {
  std::vector<Tensor<float>> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    if (img.channels() != 3) throw DataError("GAN corpora must hold RGB images");
    out.push_back(to_network_range(factor == 1 ? img : downscale(img, factor)));
  }
  return out;
}

// Gates are null for the unmasked CycleGAN.
struct Gates {
  const Tensor<float>* clean = nullptr;   // gates G on the clean batch
  const Tensor<float>* soiled = nullptr;  // gates F on the soiled batch
};

Tensor<float> gate(const Tensor<float>& input, const Tensor<float>& raw, const Tensor<float>* m) {
  return m ? blend_t(input, raw, *m) : raw;
}

struct StepResult {
  double adv = 0, cyc_clean = 0, cyc_soiled = 0, identity = 0;
  double dy_real = 0, dy_fake = 0, dx_real = 0, dx_fake = 0;
};

void adam(ckpt::TrainableNet& t, const nn::ParamStore<float>& g, long step, double lr_scale) {
  auto cfg = t.adam_config;
  cfg.lr *= lr_scale;
  try {
    nn::adam_step(t.net.params(), g, t.adam, cfg);
  } catch (const DivergenceError&) {
    throw DivergenceError("GAN gradient is not finite", step);
  }
}

double lr_scale(const TrainConfig& cfg, int step) {
  const int start = static_cast<int>(cfg.decay_start * cfg.steps);
  if (step < start) return 1.0;
  return static_cast<double>(cfg.steps - step) / (cfg.steps - start);
}

StepResult train_step(CycleGanModel& m, const Tensor<float>& x, const Tensor<float>& y, const Gates& gates,
                      const TrainConfig& cfg, long global_step, double lr_scale) {
  auto& G = m.g_c2s;
  auto& F = m.g_s2c;
  auto& Dy = m.d_soiled;
  auto& Dx = m.d_clean;
  StepResult r;
  Tensor<float> fake_y, fake_x;

  if (cfg.train_generators) {
    nn::Tape<float> tG1, tG2, tG3, tF1, tF2, tF3, tDy, tDx;
    fake_y = gate(x, G.net.forward(x, tG1), gates.clean);
    const Tensor<float> rec_x = gate(fake_y, F.net.forward(fake_y, tF1), gates.clean);
    fake_x = gate(y, F.net.forward(y, tF2), gates.soiled);
    const Tensor<float> rec_y = gate(fake_x, G.net.forward(fake_x, tG2), gates.soiled);
    // identity is gated like the cycle: G may only leave y's soiling alone
    const Tensor<float> idt_x = gate(x, F.net.forward(x, tF3), gates.clean);
    const Tensor<float> idt_y = gate(y, G.net.forward(y, tG3), gates.soiled);
    const auto adv_y = nn::loss_lsgan(Dy.net.forward(fake_y, tDy), 1.0);
    const auto adv_x = nn::loss_lsgan(Dx.net.forward(fake_x, tDx), 1.0);
    const auto cyc_x = nn::loss_l1(rec_x, x);
    const auto cyc_y = nn::loss_l1(rec_y, y);
    const auto id_x = nn::loss_l1(idt_x, x);
    const auto id_y = nn::loss_l1(idt_y, y);
    r.adv = adv_y.value + adv_x.value;
    r.cyc_clean = cyc_x.value;
    r.cyc_soiled = cyc_y.value;
    r.identity = id_x.value + id_y.value;
    const double total = r.adv + cfg.lambda_cycle * (r.cyc_clean + r.cyc_soiled) + cfg.lambda_identity * r.identity;
    if (!std::isfinite(total)) throw DivergenceError("GAN generator loss is not finite", global_step);

    auto gG = G.net.zero_grads();
    auto gF = F.net.zero_grads();
    // clean -> soiled -> clean
    Tensor<float> d_fake_y = Dy.net.backward(tDy, adv_y.grad, nullptr);
    Tensor<float> d_rec_x = scaled(cyc_x.grad, cfg.lambda_cycle);
    if (gates.clean) d_rec_x = split_blend_grad(d_rec_x, *gates.clean, &d_fake_y);
    add_into(d_fake_y, F.net.backward(tF1, d_rec_x, &gF));
    if (gates.clean) d_fake_y = split_blend_grad(d_fake_y, *gates.clean, nullptr);
    G.net.backward(tG1, d_fake_y, &gG);
    // soiled -> clean -> soiled
    Tensor<float> d_fake_x = Dx.net.backward(tDx, adv_x.grad, nullptr);
    Tensor<float> d_rec_y = scaled(cyc_y.grad, cfg.lambda_cycle);
    if (gates.soiled) d_rec_y = split_blend_grad(d_rec_y, *gates.soiled, &d_fake_x);
    add_into(d_fake_x, G.net.backward(tG2, d_rec_y, &gG));
    if (gates.soiled) d_fake_x = split_blend_grad(d_fake_x, *gates.soiled, nullptr);
    F.net.backward(tF2, d_fake_x, &gF);
    // identity
    Tensor<float> d_idt_x = scaled(id_x.grad, cfg.lambda_identity);
    Tensor<float> d_idt_y = scaled(id_y.grad, cfg.lambda_identity);
    if (gates.clean) d_idt_x = split_blend_grad(d_idt_x, *gates.clean, nullptr);
    if (gates.soiled) d_idt_y = split_blend_grad(d_idt_y, *gates.soiled, nullptr);
    F.net.backward(tF3, d_idt_x, &gF);
    G.net.backward(tG3, d_idt_y, &gG);
    adam(G, gG, global_step, lr_scale);
    adam(F, gF, global_step, lr_scale);
  } else {
    fake_y = gate(x, G.net.forward(x), gates.clean);
    fake_x = gate(y, F.net.forward(y), gates.soiled);
    r.cyc_clean = nn::loss_l1(gate(fake_y, F.net.forward(fake_y), gates.clean), x).value;
    r.cyc_soiled = nn::loss_l1(gate(fake_x, G.net.forward(fake_x), gates.soiled), y).value;
    r.identity = nn::loss_l1(gate(x, F.net.forward(x), gates.clean), x).value +
                 nn::loss_l1(gate(y, G.net.forward(y), gates.soiled), y).value;
    r.adv = nn::loss_lsgan(Dy.net.forward(fake_y), 1.0).value + nn::loss_lsgan(Dx.net.forward(fake_x), 1.0).value;
  }

  auto train_d = [&](ckpt::TrainableNet& D, ImagePool& pool, const Tensor<float>& real, const Tensor<float>& fake,
                     double& real_loss, double& fake_loss) {
    const Tensor<float> replay = pool.query(fake);
    if (!cfg.train_discriminators) {
      real_loss = nn::loss_lsgan(D.net.forward(real), 1.0).value;
      fake_loss = nn::loss_lsgan(D.net.forward(replay), 0.0).value;
      return;
    }
    nn::Tape<float> tr, tf;
    const auto lr = nn::loss_lsgan(D.net.forward(real, tr), 1.0);
    const auto lf = nn::loss_lsgan(D.net.forward(replay, tf), 0.0);
    real_loss = lr.value;
    fake_loss = lf.value;
    if (!std::isfinite(lr.value + lf.value)) throw DivergenceError("GAN discriminator loss is not finite", global_step);
    auto g = D.net.zero_grads();
    D.net.backward(tr, scaled(lr.grad, 0.5), &g);
    D.net.backward(tf, scaled(lf.grad, 0.5), &g);
    adam(D, g, global_step, lr_scale);
  };
  train_d(Dy, m.pool_soiled, y, fake_y, r.dy_real, r.dy_fake);
  train_d(Dx, m.pool_clean, x, fake_x, r.dx_real, r.dx_fake);
  return r;
}

void record(TrainTrace& t, const StepResult& r) {
  t.generator_adv.push_back(r.adv);
  t.cycle_clean.push_back(r.cyc_clean);
  t.cycle_soiled.push_back(r.cyc_soiled);
  t.identity.push_back(r.identity);
  t.d_soiled_real.push_back(r.dy_real);
  t.d_soiled_fake.push_back(r.dy_fake);
  t.d_clean_real.push_back(r.dx_real);
  t.d_clean_fake.push_back(r.dx_fake);
}

void check_config(const TrainConfig& cfg, std::span<const Image> clean, std::span<const Image> soiled) {
  if (clean.empty() || soiled.empty()) throw DataError("GAN training needs non-empty clean and soiled corpora");
  if (cfg.steps < 0 || cfg.batch < 1 || cfg.downscale < 1) {
    throw ParameterError("GAN training needs steps >= 0, batch >= 1, downscale >= 1");
  }
  if (cfg.lambda_cycle < 0 || cfg.lambda_identity < 0) throw ParameterError("loss weights must be non-negative");
  if (!(cfg.decay_start >= 0 && cfg.decay_start <= 1)) throw ParameterError("decay_start must lie in [0, 1]");
}

std::vector<std::size_t> draw(std::mt19937_64& rng, std::size_t n, int batch) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

Tensor<float> stack_masks(const std::vector<SoilingMask>& masks) { return to_tensor(std::span<const SoilingMask>(masks)); }

}  // namespace

TrainTrace train_cyclegan(CycleGanModel& model, std::span<const Image> clean, std::span<const Image> soiled,
                          const TrainConfig& config) {
  check_config(config, clean, soiled);
  const auto xs = prepare(clean, config.downscale);
  const auto ys = prepare(soiled, config.downscale);
  std::mt19937_64 rng(derive_seed(config.seed, "gan.sample"));
  TrainTrace trace;
  for (int step = 0; step < config.steps; ++step) {
    const Tensor<float> x = gather(xs, draw(rng, xs.size(), config.batch));
    const Tensor<float> y = gather(ys, draw(rng, ys.size(), config.batch));
    record(trace, train_step(model, x, y, Gates{}, config, model.steps + step + 1, lr_scale(config, step)));
  }
  model.steps += config.steps;
  if (config.steps > 0 && config.train_generators) model.trained = true;
  return trace;
}

SoilingMask sample_vae_mask(const vae::VaeModel& vae, std::span<const SoilingMask> bank, std::mt19937_64& rng,
                            int size) {
  const bool interpolate = bank.size() >= 2 && std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  vae::LatentVector z;
  if (interpolate) {
    std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
    const auto& a = bank[pick(rng)];
    const auto& b = bank[pick(rng)];
    const double alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    z = vae::interpolate(vae::encode(vae, vae::prepare_mask(vae, a)).mu, vae::encode(vae, vae::prepare_mask(vae, b)).mu,
                         alpha);
  } else {
    z = vae::sample_prior(vae.latent_dim(), rng);
  }
  SoilingMask m = vae::decode(vae, z);
  if (m.height() != size || m.width() != size) m = resize(m, size, size);
  // the sigmoid never reaches 0; alphas that 8-bit annotations round to 0 are background
  for (auto& v : m.data()) v = v < kBackgroundAlpha ? 0.0f : v;
  return m;
}

TrainTrace train_dirtygan(CycleGanModel& model, const vae::VaeModel& vae, const seg::SegModel& seg,
                          std::span<const Image> clean, std::span<const Image> soiled,
                          std::span<const SoilingMask> mask_bank, const DirtyConfig& config) {
  check_config(config, clean, soiled);
  if (config.use_vae && !vae.trained) throw DependencyError("DirtyGAN needs a trained VAE");
  if (!seg.trained) throw DependencyError("DirtyGAN needs a trained segmentation model");
  if (!config.use_vae && !config.fixed_mask) throw ParameterError("DirtyGAN without VAE sampling needs a fixed mask");
  const auto xs = prepare(clean, config.downscale);
  const auto ys = prepare(soiled, config.downscale);
  const int h = xs.front().h(), w = xs.front().w();
  if (h != w) throw DataError("DirtyGAN expects square training images");

  // Soiled -> clean gates, m = gamma(M(y)), computed once at corpus
  // resolution and reduced like the images.
  std::vector<Tensor<float>> soiled_gates;
  for (const auto& img : soiled) {
    SoilingMask m = gaussian_smooth(seg::infer_mask(seg, img).alpha, config.sigma);
    if (config.downscale > 1) m = downscale(m, config.downscale);
    soiled_gates.push_back(to_tensor(m));
  }
  std::optional<SoilingMask> fixed;
  if (config.fixed_mask) {
    fixed = config.fixed_mask->height() == h && config.fixed_mask->width() == w ? *config.fixed_mask
                                                                                  : resize(*config.fixed_mask, h, w);
  }

  std::mt19937_64 rng(derive_seed(config.seed, "gan.sample"));
  std::mt19937_64 mask_rng(derive_seed(config.seed, "gan.vae_masks"));
  TrainTrace trace;
  for (int step = 0; step < config.steps; ++step) {
    const auto xi = draw(rng, xs.size(), config.batch);
    const auto yi = draw(rng, ys.size(), config.batch);
    const Tensor<float> x = gather(xs, xi);
    const Tensor<float> y = gather(ys, yi);
    std::vector<SoilingMask> gates_x;
    for (int b = 0; b < config.batch; ++b) {
      gates_x.push_back(config.use_vae ? sample_vae_mask(vae, mask_bank, mask_rng, h) : *fixed);
    }
    const Tensor<float> mx = stack_masks(gates_x);
    const Tensor<float> my = gather(soiled_gates, yi);
    record(trace, train_step(model, x, y, Gates{&mx, &my}, config, model.steps + step + 1, lr_scale(config, step)));
  }
  model.steps += config.steps;
  model.masked = true;
  if (config.steps > 0 && config.train_generators) model.trained = true;
  return trace;
}

// --- generation ---------------------------------------------------------------------

Image translate(const CycleGanModel& model, const Image& low_res) {
  return from_network_range(model.g_c2s.net.forward(to_network_range(low_res)));
}

namespace {

void require_trained(const CycleGanModel& model) {
  if (!model.trained) throw DependencyError("generator is untrained");
}

Image low_res_translation(const CycleGanModel& model, const Image& clean, int factor) {
  if (factor < 1) throw ParameterError("upscale factor must be >= 1");
  return translate(model, factor == 1 ? clean : downscale(clean, factor));
}

}  // namespace

Composite generate_soiled(const CycleGanModel& model, const Image& clean, const SoilingMask& mask,
                          const GenerateOptions& options) {
  require_trained(model);
  const Image soiled = low_res_translation(model, clean, options.factor);
  return compose(clean, soiled, mask, options.factor, options.compose);
}

Composite generate_soiled_baseline(const CycleGanModel& model, const seg::SegModel& seg, const Image& clean,
                                   const GenerateOptions& options) {
  require_trained(model);
  const Image soiled = low_res_translation(model, clean, options.factor);
  const SoilingMask m = gaussian_smooth(seg::infer_mask(seg, soiled).alpha, options.sigma);
  return compose(clean, soiled, m, options.factor, options.compose);
}

// --- persistence ----------------------------------------------------------------------

void save(const CycleGanModel& model, const std::filesystem::path& dir) {
  ckpt::save(dir / "g_c2s.ckpt", ckpt::to_checkpoint(model.g_c2s, model.steps));
  ckpt::save(dir / "g_s2c.ckpt", ckpt::to_checkpoint(model.g_s2c, model.steps));
  ckpt::save(dir / "d_soiled.ckpt", ckpt::to_checkpoint(model.d_soiled, model.steps));
  ckpt::save(dir / "d_clean.ckpt", ckpt::to_checkpoint(model.d_clean, model.steps));
  const nlohmann::json meta = {
      {"kind", "cyclegan"},
      {"generator_arch", arch::to_text(model.g_c2s.net.arch())},
      {"discriminator_arch", arch::to_text(model.d_soiled.net.arch())},
      {"pool_capacity", model.shape.pool_capacity},
      {"steps", model.steps},
      {"trained", model.trained},
      {"masked", model.masked},
  };
  detail::atomic_write(dir / "model.json", meta.dump(2) + "\n");
}

CycleGanModel load(const std::filesystem::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::read_file(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("GAN model.json: " + std::string(e.what()));
  } catch (const DataError&) {
    throw DependencyError("no trained generator at " + dir.string());
  }
  try {
    if (meta.at("kind") != "cyclegan") throw FormatError(dir.string() + " does not hold a CycleGAN model");
    const auto g_arch = arch::parse_arch_text(meta.at("generator_arch").get<std::string>());
    const auto d_arch = arch::parse_arch_text(meta.at("discriminator_arch").get<std::string>());
    const int capacity = meta.at("pool_capacity").get<int>();
    CycleGanModel m = CycleGanModel::from_archs(g_arch, d_arch, 0, kGanAdam, capacity);
    m.g_c2s = ckpt::from_checkpoint(ckpt::load(dir / "g_c2s.ckpt"), g_arch);
    m.g_s2c = ckpt::from_checkpoint(ckpt::load(dir / "g_s2c.ckpt"), g_arch);
    m.d_soiled = ckpt::from_checkpoint(ckpt::load(dir / "d_soiled.ckpt"), d_arch);
    m.d_clean = ckpt::from_checkpoint(ckpt::load(dir / "d_clean.ckpt"), d_arch);
    m.shape.pool_capacity = capacity;
    m.steps = meta.at("steps").get<long>();
    m.trained = meta.at("trained").get<bool>();
    m.masked = meta.at("masked").get<bool>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("GAN model.json: " + std::string(e.what()));
  }
}

}  // namespace soilgen::gan
