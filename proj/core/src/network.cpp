#include <cmath>
#include <random>

#include "kernels.hpp"
#include "soilgen/error.hpp"
#include "soilgen/nn.hpp"

namespace soilgen::nn {

using arch::Activation;
using arch::LayerKind;
using arch::LayerSpec;
using arch::Norm;

// ---------------------------------------------------------------------------
// ParamStore

template <typename T>
Param<T>& ParamStore<T>::add(std::string key, std::vector<int> shape, bool trainable) {
  if (index_.count(key)) throw ValidationError("duplicate parameter key '" + key + "'");
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  index_.emplace(key, params_.size());
  params_.push_back(Param<T>{std::move(key), std::move(shape), Buffer<T>(count, T{0}), trainable});
  return params_.back();
}

template <typename T>
Param<T>* ParamStore<T>::find(const std::string& key) {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &params_[it->second];
}

template <typename T>
const Param<T>* ParamStore<T>::find(const std::string& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &params_[it->second];
}

template <typename T>
Param<T>& ParamStore<T>::at(const std::string& key) {
  if (auto* p = find(key)) return *p;
  throw ValidationError("missing parameter '" + key + "'");
}

template <typename T>
const Param<T>& ParamStore<T>::at(const std::string& key) const {
  if (const auto* p = find(key)) return *p;
  throw ValidationError("missing parameter '" + key + "'");
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.values.size();
  return n;
}

template <typename T>
ParamStore<T> ParamStore<T>::zeros_like() const {
  ParamStore out;
  out.seed = seed;
  for (const auto& p : params_) out.add(p.key, p.shape, p.trainable);
  return out;
}

template <typename T>
void ParamStore<T>::set_zero() {
  for (auto& p : params_) std::fill(p.values.begin(), p.values.end(), T{0});
}

template <typename T>
bool ParamStore<T>::all_finite() const {
  for (const auto& p : params_) {
    for (T v : p.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Parameter layout

namespace {

struct LayerIo {
  int in_channels = 0;  // features for dense layers
};

// Input channel (or feature) count for every layer.
std::vector<LayerIo> layer_inputs(const arch::ArchDescriptor& a) {
  std::vector<LayerIo> io(a.layers.size());
  int channels = a.input_channels;
  int h = a.input_height;
  int w = a.input_width;
  bool prev_pad = false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const LayerSpec& l = a.layers[i];
    io[i].in_channels = channels;
    switch (l.kind) {
      case LayerKind::conv:
        if (h > 0) {
          h = prev_pad ? (h - l.kernel) / l.stride + 1 : (h + l.stride - 1) / l.stride;
          w = prev_pad ? (w - l.kernel) / l.stride + 1 : (w + l.stride - 1) / l.stride;
        }
        channels = l.out_channels;
        break;
      case LayerKind::transposed_conv:
        h *= l.stride;
        w *= l.stride;
        channels = l.out_channels;
        break;
      case LayerKind::reflection_pad:
        if (h > 0) {
          h += 2 * l.pad_size;
          w += 2 * l.pad_size;
        }
        break;
      case LayerKind::upsample_nearest:
        h *= l.scale;
        w *= l.scale;
        break;
      case LayerKind::flatten:
        channels = channels * h * w;
        h = w = 1;
        break;
      case LayerKind::dense:
        channels = l.out_channels;
        break;
      case LayerKind::reshape:
        channels = l.out_channels;
        h = l.height;
        w = l.width;
        break;
      case LayerKind::residual_block:
        break;
    }
    prev_pad = l.kind == LayerKind::reflection_pad;
  }
  return io;
}

template <typename T>
void add_norm_params(ParamStore<T>& store, const std::string& prefix, Norm norm, int channels) {
  if (norm == Norm::none) return;
  std::fill_n(store.add(prefix + "norm.scale", {channels}).values.begin(), channels, T{1});
  store.add(prefix + "norm.offset", {channels});
  if (norm == Norm::batch) {
    store.add(prefix + "norm.running_mean", {channels}, false);
    auto& var = store.add(prefix + "norm.running_var", {channels}, false);
    std::fill(var.values.begin(), var.values.end(), T{1});
  }
}

template <typename T>
ParamStore<T> layout(const arch::ArchDescriptor& a) {
  ParamStore<T> store;
  const auto io = layer_inputs(a);
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const LayerSpec& l = a.layers[i];
    const std::string p = std::to_string(i) + ".";
    const int in = io[i].in_channels;
    switch (l.kind) {
      case LayerKind::conv:
        store.add(p + "weight", {l.out_channels, in, l.kernel, l.kernel});
        store.add(p + "bias", {l.out_channels});
        add_norm_params(store, p, l.norm, l.out_channels);
        break;
      case LayerKind::transposed_conv:
        store.add(p + "weight", {in, l.out_channels, l.kernel, l.kernel});
        store.add(p + "bias", {l.out_channels});
        break;
      case LayerKind::dense:
        store.add(p + "weight", {l.out_channels, in});
        store.add(p + "bias", {l.out_channels});
        break;
      case LayerKind::residual_block:
        for (const char* unit : {"conv1.", "conv2."}) {
          store.add(p + unit + "weight", {l.out_channels, l.out_channels, 3, 3});
          store.add(p + unit + "bias", {l.out_channels});
          add_norm_params(store, p + unit, l.norm, l.out_channels);
        }
        break;
      default:
        break;
    }
  }
  return store;
}

bool is_weight(const std::string& key) {
  return key.size() >= 6 && key.compare(key.size() - 6, 6, "weight") == 0;
}

}  // namespace

template <typename T>
ParamStore<T> init_params(const arch::ArchDescriptor& a, std::uint64_t seed, double weight_std) {
  arch::require_valid(a);
  ParamStore<T> store = layout<T>(a);
  store.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, weight_std);
  for (auto& p : store.params()) {
    if (!is_weight(p.key)) continue;
    for (T& v : p.values) v = static_cast<T>(normal(rng));
  }
  return store;
}

// ---------------------------------------------------------------------------
// Tape records

template <typename T>
struct Unit {
  Tensor<T> input;
  Tensor<T> output;
  kernels::ConvGeometry geometry;
  kernels::NormCache<T> norm;
};

template <typename T>
struct Tape<T>::Record {
  std::array<int, 4> in_shape{};
  Unit<T> a;
  Unit<T> b;
};

// ---------------------------------------------------------------------------
// Network

template <typename T>
Network<T>::Network(arch::ArchDescriptor a, ParamStore<T> params) : arch_(std::move(a)), params_(std::move(params)) {
  arch::require_valid(arch_);
  const ParamStore<T> expected = layout<T>(arch_);
  if (expected.size() != params_.size()) {
    throw ValidationError("parameter store does not match architecture '" + arch_.name + "'");
  }
  for (const auto& p : expected.params()) {
    const auto* q = params_.find(p.key);
    if (!q || q->shape != p.shape || q->values.size() != p.values.size()) {
      throw ValidationError("parameter '" + p.key + "' missing or mis-shaped for architecture '" + arch_.name + "'");
    }
  }
}

template <typename T>
Network<T> Network<T>::create(const arch::ArchDescriptor& a, std::uint64_t seed) {
  return Network(a, init_params<T>(a, seed));
}

namespace {

template <typename T>
struct Ctx {
  ParamStore<T>& params;
  bool training;
  bool update_stats;
};

template <typename T>
Tensor<T> apply_norm(Ctx<T>& ctx, const std::string& prefix, Norm norm, const Tensor<T>& x,
                     kernels::NormCache<T>* cache) {
  Tensor<T> y;
  if (norm == Norm::instance) {
    kernels::instance_norm_forward(x, ctx.params.at(prefix + "norm.scale").values,
                                   ctx.params.at(prefix + "norm.offset").values, y, cache);
  } else {
    auto& rm = ctx.params.at(prefix + "norm.running_mean").values;
    auto& rv = ctx.params.at(prefix + "norm.running_var").values;
    const bool pass_stats = !ctx.training || ctx.update_stats;
    kernels::batch_norm_forward(x, ctx.params.at(prefix + "norm.scale").values,
                                ctx.params.at(prefix + "norm.offset").values, pass_stats ? &rm : nullptr,
                                pass_stats ? &rv : nullptr, ctx.training, y, cache);
  }
  return y;
}

// conv -> norm -> activation
template <typename T>
Tensor<T> conv_unit_forward(Ctx<T>& ctx, const std::string& prefix, const LayerSpec& l,
                            const kernels::ConvGeometry& g, const Tensor<T>& x, Unit<T>* unit) {
  Tensor<T> y;
  kernels::conv2d_forward(x, ctx.params.at(prefix + "weight").values, ctx.params.at(prefix + "bias").values,
                          l.out_channels, g, y);
  if (l.norm != Norm::none) y = apply_norm(ctx, prefix, l.norm, y, unit ? &unit->norm : nullptr);
  kernels::activation_forward(l.activation, y);
  if (unit) {
    unit->input = x;
    unit->output = y;
    unit->geometry = g;
  }
  return y;
}

template <typename T>
Tensor<T> conv_unit_backward(const ParamStore<T>& params, const std::string& prefix, const LayerSpec& l,
                             const Unit<T>& unit, Tensor<T> dy, ParamStore<T>* grads) {
  kernels::activation_backward(l.activation, unit.output, dy);
  if (l.norm != Norm::none) {
    Tensor<T> dpre;
    Buffer<T>* dscale = grads ? &grads->at(prefix + "norm.scale").values : nullptr;
    Buffer<T>* doffset = grads ? &grads->at(prefix + "norm.offset").values : nullptr;
    const auto& scale = params.at(prefix + "norm.scale").values;
    if (l.norm == Norm::instance) {
      kernels::instance_norm_backward(unit.norm, scale, dy, dpre, dscale, doffset);
    } else {
      kernels::batch_norm_backward(unit.norm, scale, dy, dpre, dscale, doffset);
    }
    dy = std::move(dpre);
  }
  Tensor<T> dx;
  kernels::conv2d_backward(unit.input, params.at(prefix + "weight").values, l.out_channels, unit.geometry, dy, &dx,
                           grads ? &grads->at(prefix + "weight").values : nullptr,
                           grads ? &grads->at(prefix + "bias").values : nullptr);
  return dx;
}

LayerSpec residual_unit_spec(const LayerSpec& block, bool first) {
  return arch::conv(3, 1, block.out_channels, first ? Activation::relu : Activation::none, block.norm);
}

}  // namespace

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& input) const {
  // run() only mutates batch-norm running statistics, and only when asked.
  return const_cast<Network*>(this)->run(input, nullptr, false);
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& input, Tape<T>& tape) {
  tape.records.clear();
  tape.complete = false;
  Tensor<T> out = run(input, &tape, mode_ == Mode::train);
  tape.complete = true;
  return out;
}

template <typename T>
Tensor<T> Network<T>::run(const Tensor<T>& input, Tape<T>* tape, bool update_stats) {
  if (input.c() != arch_.input_channels) {
    throw ShapeError("network '" + arch_.name + "' expects " + std::to_string(arch_.input_channels) +
                     " input channels, got " + std::to_string(input.c()));
  }
  if (arch_.input_height > 0 && (input.h() != arch_.input_height || input.w() != arch_.input_width)) {
    throw ShapeError("network '" + arch_.name + "' expects " + std::to_string(arch_.input_height) + "x" +
                     std::to_string(arch_.input_width) + " inputs");
  }
  Ctx<T> ctx{params_, mode_ == Mode::train, update_stats};
  Tensor<T> x = input;
  bool prev_pad = false;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const LayerSpec& l = arch_.layers[i];
    const std::string p = std::to_string(i) + ".";
    std::shared_ptr<typename Tape<T>::Record> rec;
    if (tape) {
      rec = std::make_shared<typename Tape<T>::Record>();
      rec->in_shape = x.shape();
      tape->records.push_back(rec);
    }
    Unit<T>* ua = rec ? &rec->a : nullptr;
    Unit<T>* ub = rec ? &rec->b : nullptr;
    switch (l.kind) {
      case LayerKind::conv: {
        const auto g = prev_pad ? kernels::valid_geometry(x.h(), x.w(), l.kernel, l.stride)
                                : kernels::same_geometry(x.h(), x.w(), l.kernel, l.stride);
        x = conv_unit_forward(ctx, p, l, g, x, ua);
        break;
      }
      case LayerKind::transposed_conv: {
        const auto g = kernels::transposed_geometry(x.h(), x.w(), l.kernel, l.stride);
        Tensor<T> y;
        kernels::conv_transpose2d_forward(x, params_.at(p + "weight").values, params_.at(p + "bias").values,
                                          l.out_channels, g, y);
        kernels::activation_forward(l.activation, y);
        if (ua) {
          ua->input = std::move(x);
          ua->output = y;
          ua->geometry = g;
        }
        x = std::move(y);
        break;
      }
      case LayerKind::dense: {
        if (static_cast<int>(x.sample_size()) != params_.at(p + "weight").shape[1]) {
          throw ShapeError("dense layer " + std::to_string(i) + " receives " + std::to_string(x.sample_size()) +
                           " features");
        }
        Tensor<T> y;
        kernels::dense_forward(x, params_.at(p + "weight").values, params_.at(p + "bias").values, l.out_channels, y);
        kernels::activation_forward(l.activation, y);
        if (ua) {
          ua->input = std::move(x);
          ua->output = y;
        }
        x = std::move(y);
        break;
      }
      case LayerKind::residual_block: {
        const auto g = kernels::same_geometry(x.h(), x.w(), 3, 1);
        Tensor<T> h1 = conv_unit_forward(ctx, p + "conv1.", residual_unit_spec(l, true), g, x, ua);
        Tensor<T> h2 = conv_unit_forward(ctx, p + "conv2.", residual_unit_spec(l, false), g, h1, ub);
        for (std::size_t k = 0; k < h2.size(); ++k) h2[k] += x[k];
        x = std::move(h2);
        break;
      }
      case LayerKind::reflection_pad:
        x = kernels::reflection_pad_forward(x, l.pad_size);
        break;
      case LayerKind::upsample_nearest:
        x = kernels::upsample_forward(x, l.scale);
        break;
      case LayerKind::flatten:
        x.reshape({x.n(), static_cast<int>(x.sample_size()), 1, 1});
        break;
      case LayerKind::reshape:
        if (static_cast<int>(x.sample_size()) != l.out_channels * l.height * l.width) {
          throw ShapeError("reshape layer " + std::to_string(i) + " element count mismatch");
        }
        x.reshape({x.n(), l.out_channels, l.height, l.width});
        break;
    }
    prev_pad = l.kind == LayerKind::reflection_pad;
  }
  return x;
}

template <typename T>
Tensor<T> Network<T>::backward(const Tape<T>& tape, const Tensor<T>& grad_output, ParamStore<T>* grads) const {
  if (!tape.complete || tape.records.size() != arch_.layers.size()) {
    throw StateError("backward called without a matching forward pass");
  }
  Tensor<T> dy = grad_output;
  for (std::size_t ri = arch_.layers.size(); ri-- > 0;) {
    const LayerSpec& l = arch_.layers[ri];
    const auto& rec = *tape.records[ri];
    const std::string p = std::to_string(ri) + ".";
    switch (l.kind) {
      case LayerKind::conv:
        dy = conv_unit_backward(params_, p, l, rec.a, std::move(dy), grads);
        break;
      case LayerKind::transposed_conv: {
        kernels::activation_backward(l.activation, rec.a.output, dy);
        Tensor<T> dx;
        kernels::conv_transpose2d_backward(rec.a.input, params_.at(p + "weight").values, l.out_channels,
                                           rec.a.geometry, dy, &dx,
                                           grads ? &grads->at(p + "weight").values : nullptr,
                                           grads ? &grads->at(p + "bias").values : nullptr);
        dy = std::move(dx);
        break;
      }
      case LayerKind::dense: {
        kernels::activation_backward(l.activation, rec.a.output, dy);
        Tensor<T> dx;
        kernels::dense_backward(rec.a.input, params_.at(p + "weight").values, l.out_channels, dy, &dx,
                                grads ? &grads->at(p + "weight").values : nullptr,
                                grads ? &grads->at(p + "bias").values : nullptr);
        dy = std::move(dx);
        break;
      }
      case LayerKind::residual_block: {
        Tensor<T> dh1 = conv_unit_backward(params_, p + "conv2.", residual_unit_spec(l, false), rec.b, dy, grads);
        Tensor<T> dx = conv_unit_backward(params_, p + "conv1.", residual_unit_spec(l, true), rec.a, std::move(dh1), grads);
        for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += dy[k];
        dy = std::move(dx);
        break;
      }
      case LayerKind::reflection_pad:
        dy = kernels::reflection_pad_backward(dy, l.pad_size, rec.in_shape[2], rec.in_shape[3]);
        break;
      case LayerKind::upsample_nearest:
        dy = kernels::upsample_backward(dy, l.scale);
        break;
      case LayerKind::flatten:
      case LayerKind::reshape:
        dy.reshape(rec.in_shape);
        break;
    }
  }
  return dy;
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Network<float>;
template class Network<double>;
template ParamStore<float> init_params<float>(const arch::ArchDescriptor&, std::uint64_t, double);
template ParamStore<double> init_params<double>(const arch::ArchDescriptor&, std::uint64_t, double);

}  // namespace soilgen::nn
