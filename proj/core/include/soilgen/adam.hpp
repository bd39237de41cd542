#pragma once

#include "soilgen/nn.hpp"

namespace soilgen::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates, keyed like the parameters they follow.
template <typename T>
struct AdamState {
  ParamStore<T> m;
  ParamStore<T> v;
  long step = 0;
};

template <typename T>
AdamState<T> adam_init(const ParamStore<T>& params);

// One bias-corrected Adam update of every trainable parameter. Throws
// DivergenceError, leaving params and state untouched, when any gradient is
// non-finite.
template <typename T>
void adam_step(ParamStore<T>& params, const ParamStore<T>& grads, AdamState<T>& state, const AdamConfig& config);

}  // namespace soilgen::nn
