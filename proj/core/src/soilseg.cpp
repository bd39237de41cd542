#include "soilgen/soilseg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "fsutil.hpp"
#include "soilgen/error.hpp"
#include "soilgen/imaging.hpp"
#include "soilgen/losses.hpp"
#include "soilgen/metrics.hpp"
#include "soilgen/seed.hpp"

namespace soilgen::seg {

using nn::Tensor;

SegModel SegModel::create(const arch::MaskSegShape& shape, int working_size, std::uint64_t seed,
                          const nn::AdamConfig& adam) {
  if (working_size < 4 || working_size % 4 != 0) throw ParameterError("segmentation working size must be a multiple of 4");
  if (shape.num_classes < 2) throw ParameterError("segmentation needs at least two classes");
  SegModel m;
  m.shape = shape;
  m.net = ckpt::TrainableNet::create(arch::mask_segmentation(shape), derive_seed(seed, "seg.net"), adam);
  m.net.net.set_mode(nn::Mode::eval);  // training switches to batch statistics itself
  m.working_size = working_size;
  return m;
}

Image to_working(const Image& image, int size) {
  if (image.height() == size && image.width() == size) return image;
  if (image.height() == image.width() && image.height() % size == 0) {
    return imaging::downscale(image, image.height() / size);
  }
  return imaging::resize(image, size, size);
}

ClassMap resize_nearest(const ClassMap& labels, int height, int width) {
  ClassMap out(height, width);
  for (int r = 0; r < height; ++r) {
    const int sr = std::min(labels.height() - 1, static_cast<int>((r + 0.5) * labels.height() / height));
    for (int c = 0; c < width; ++c) {
      const int sc = std::min(labels.width() - 1, static_cast<int>((c + 0.5) * labels.width() / width));
      out.at(r, c) = labels.at(sr, sc);
    }
  }
  return out;
}

ClassMap to_working(const ClassMap& labels, int size) {
  if (labels.height() == size && labels.width() == size) return labels;
  return resize_nearest(labels, size, size);
}

namespace {

// Scales deviations from the image mean.
void adjust_contrast(Image& img, float contrast) {
  double mean = 0.0;
  for (float v : img.data()) mean += v;
  mean /= static_cast<double>(img.size());
  for (float& v : img.data()) v = std::clamp(static_cast<float>(mean + contrast * (v - mean)), 0.0f, 1.0f);
}

}  // namespace

TrainTrace train_seg(SegModel& model, std::span<const Image> images, std::span<const ClassMap> labels,
                     const TrainConfig& config) {
  if (images.size() != labels.size()) throw DataError("segmentation training needs paired images and labels");
  if (images.empty() && config.steps > 0) throw DataError("segmentation training needs at least one pair");
  if (config.batch < 1 || config.steps < 0) throw ParameterError("segmentation training needs batch >= 1, steps >= 0");
  const int k = model.num_classes();
  const int ws = model.working_size;
  std::vector<Image> xs;
  std::vector<ClassMap> ys;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height() != labels[i].height() || images[i].width() != labels[i].width()) {
      throw DataError("image " + std::to_string(i) + " and its labels differ in size");
    }
    for (auto v : labels[i].data()) {
      if (v >= k) throw DataError("label code " + std::to_string(v) + " outside 0.." + std::to_string(k - 1));
    }
    xs.push_back(to_working(images[i], ws));
    ys.push_back(to_working(labels[i], ws));
  }

  TrainTrace trace;
  std::mt19937_64 rng(derive_seed(config.seed, "seg.train"));
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  auto& t = model.net;
  t.net.set_mode(nn::Mode::train);
  const int batch = config.batch;
  const std::size_t plane = static_cast<std::size_t>(ws) * ws;
  for (int step = 0; step < config.steps; ++step) {
    std::vector<Image> picked;
    std::vector<std::uint8_t> target(batch * plane);
    for (int b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      Image img = xs[idx];
      ClassMap lab = ys[idx];
      if (config.augment) {
        const bool flip = std::uniform_int_distribution<int>(0, 1)(rng);
        if (flip) {
          img = imaging::flip_horizontal(img);
          lab = imaging::flip_horizontal(lab);
        }
        adjust_contrast(img, std::uniform_real_distribution<float>(0.7f, 1.3f)(rng));
      }
      std::copy(lab.data().begin(), lab.data().end(), target.begin() + b * plane);
      picked.push_back(std::move(img));
    }
    nn::Tape<float> tape;
    const Tensor<float> out = t.net.forward(imaging::to_network_range(std::span<const Image>(picked)), tape);
    const auto loss = nn::loss_softmax_ce(out, target);
    if (!std::isfinite(loss.value)) throw DivergenceError("segmentation loss is not finite", model.steps + step + 1);
    auto grads = t.net.zero_grads();
    t.net.backward(tape, loss.grad, &grads);
    try {
      nn::adam_step(t.net.params(), grads, t.adam, t.adam_config);
    } catch (const DivergenceError&) {
      throw DivergenceError("segmentation gradient is not finite", model.steps + step + 1);
    }
    trace.step_loss.push_back(loss.value);
  }
  model.steps += config.steps;
  if (config.steps > 0) model.trained = true;
  t.net.set_mode(nn::Mode::eval);
  return trace;
}

Tensor<float> logits(const SegModel& model, const Image& image) {
  return model.net.net.forward(imaging::to_network_range(to_working(image, model.working_size)));
}

ClassMap argmax(const Tensor<float>& logits, int sample) {
  ClassMap out(logits.h(), logits.w());
  for (int r = 0; r < logits.h(); ++r) {
    for (int c = 0; c < logits.w(); ++c) {
      int best = 0;
      for (int k = 1; k < logits.c(); ++k) {
        if (logits(sample, k, r, c) > logits(sample, best, r, c)) best = k;
      }
      out.at(r, c) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

SoilingMask class_alpha(const ClassMap& classes, int num_classes, double transparent_alpha) {
  SoilingMask out(std::max(1, classes.height()), std::max(1, classes.width()));
  const float ta = static_cast<float>(transparent_alpha);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto v = classes.data()[i];
    out.data()[i] = v == 0 ? 0.0f : (v == 1 || num_classes == 2 ? 1.0f : (v == 2 ? ta : 0.0f));
  }
  return out;
}

ClassMap predict(const SegModel& model, const Image& image) {
  if (!model.trained) throw DependencyError("segmentation model is untrained");
  ClassMap cls = argmax(logits(model, image));
  if (cls.height() != image.height() || cls.width() != image.width()) {
    cls = resize_nearest(cls, image.height(), image.width());
  }
  return cls;
}

MaskPrediction infer_mask(const SegModel& model, const Image& image) {
  ClassMap cls = predict(model, image);
  SoilingMask alpha = class_alpha(cls, model.num_classes(), model.transparent_alpha);
  return {std::move(cls), std::move(alpha)};
}

Refinement refine_weak_labels(const SegModel& model, const Image& image, const SoilingMask& polygon_mask) {
  if (!polygon_mask.same_size(image)) throw ShapeError("polygon mask and image differ in size");
  Refinement r{infer_mask(model, image).alpha, 0.0};
  r.iou = metrics::binary_iou(r.alpha, polygon_mask, 0.0f);
  return r;
}

void save(const SegModel& model, const std::filesystem::path& dir) {
  ckpt::save(dir / "net.ckpt", ckpt::to_checkpoint(model.net, model.steps));
  const nlohmann::json meta = {
      {"kind", "seg"},
      {"channels", model.shape.channels},
      {"num_classes", model.shape.num_classes},
      {"base_width", model.shape.base_width},
      {"residual_blocks", model.shape.residual_blocks},
      {"working_size", model.working_size},
      {"transparent_alpha", model.transparent_alpha},
      {"steps", model.steps},
      {"trained", model.trained},
  };
  detail::atomic_write(dir / "model.json", meta.dump(2) + "\n");
}

SegModel load(const std::filesystem::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::read_file(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("segmentation model.json: " + std::string(e.what()));
  } catch (const DataError&) {
    throw DependencyError("no trained segmentation model at " + dir.string());
  }
  SegModel m;
  try {
    if (meta.at("kind") != "seg") throw FormatError(dir.string() + " does not hold a segmentation model");
    m.shape = arch::MaskSegShape{meta.at("channels").get<int>(), meta.at("num_classes").get<int>(),
                                 meta.at("base_width").get<int>(), meta.at("residual_blocks").get<int>()};
    m.working_size = meta.at("working_size").get<int>();
    m.transparent_alpha = meta.at("transparent_alpha").get<double>();
    m.steps = meta.at("steps").get<long>();
    m.trained = meta.at("trained").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("segmentation model.json: " + std::string(e.what()));
  }
  m.net = ckpt::from_checkpoint(ckpt::load(dir / "net.ckpt"), arch::mask_segmentation(m.shape));
  m.net.net.set_mode(nn::Mode::eval);
  return m;
}

}  // namespace soilgen::seg
