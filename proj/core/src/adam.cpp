#include "soilgen/adam.hpp"

#include <cmath>
#include <limits>

#include "soilgen/error.hpp"

namespace soilgen::nn {

template <typename T>
AdamState<T> adam_init(const ParamStore<T>& params) {
  return AdamState<T>{params.zeros_like(), params.zeros_like(), 0};
}

template <typename T>
void adam_step(ParamStore<T>& params, const ParamStore<T>& grads, AdamState<T>& state, const AdamConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: gradient or state store does not match parameters");
  }
  for (const auto& g : grads.params()) {
    // Branch-free so the scan vectorizes; NaN fails the comparison.
    bool finite = true;
    for (T v : g.values) finite &= std::abs(v) <= std::numeric_limits<T>::max();
    if (!finite) throw DivergenceError("non-finite gradient in '" + g.key + "'", state.step + 1);
  }
  const long t = state.step + 1;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  const double step_size = config.lr / c1;
  const double inv_c2 = 1.0 / c2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.params()[i];
    if (!p.trainable) continue;
    const auto& g = grads.params()[i].values;
    auto& m = state.m.params()[i].values;
    auto& v = state.v.params()[i].values;
    if (g.size() != p.values.size()) throw ShapeError("adam_step: gradient shape mismatch for '" + p.key + "'");
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      const double mk = config.beta1 * static_cast<double>(m[k]) + (1.0 - config.beta1) * gk;
      const double vk = config.beta2 * static_cast<double>(v[k]) + (1.0 - config.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = step_size * mk / (std::sqrt(vk * inv_c2) + config.eps);
      p.values[k] = static_cast<T>(static_cast<double>(p.values[k]) - update);
    }
  }
  state.step = t;
}

template AdamState<float> adam_init<float>(const ParamStore<float>&);
template AdamState<double> adam_init<double>(const ParamStore<double>&);
template void adam_step<float>(ParamStore<float>&, const ParamStore<float>&, AdamState<float>&, const AdamConfig&);
template void adam_step<double>(ParamStore<double>&, const ParamStore<double>&, AdamState<double>&,
                                const AdamConfig&);

}  // namespace soilgen::nn
