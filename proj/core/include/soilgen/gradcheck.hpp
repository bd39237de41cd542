#pragma once

#include <cstdint>
#include <string>

#include "soilgen/nn.hpp"

namespace soilgen::nn {

struct GradCheckOptions {
  double step = 1e-5;
  int max_per_param = 16;  // entries sampled per parameter array; <= 0 checks all
  bool check_input = true;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // parameter key (or "input") and flat index of the worst entry
  std::size_t checked = 0;

  bool passed(double tolerance = 1e-4) const { return checked > 0 && max_rel_error < tolerance; }
};

// |a - b| / max(|a|, |b|, 1e-4)
double relative_error(double a, double b);

// Compares reverse-mode gradients of L = sum(r * net(input)), r a fixed random
// tensor, against central differences. Uses batch statistics in train mode and
// never touches running statistics.
GradCheckReport gradient_check(const Network<double>& net, const Tensor<double>& input,
                               const GradCheckOptions& options = {});

}  // namespace soilgen::nn
