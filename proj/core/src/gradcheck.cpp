#include "soilgen/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace soilgen::nn {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

namespace {

double weighted_sum(const Tensor<double>& y, const Tensor<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

std::vector<std::size_t> sample_indices(std::size_t count, int max_per_param, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (max_per_param > 0 && count > static_cast<std::size_t>(max_per_param)) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(max_per_param));
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

}  // namespace

GradCheckReport gradient_check(const Network<double>& net, const Tensor<double>& input,
                               const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Network<double> work(net.arch(), net.params());
  work.set_mode(net.mode());
  const Tensor<double> probe = work.forward(input);
  Tensor<double> r(probe.shape());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = normal(rng);

  // Analytic gradients on a copy so running statistics stay untouched.
  Network<double> taped(net.arch(), net.params());
  taped.set_mode(net.mode());
  Tape<double> tape;
  taped.forward(input, tape);
  ParamStore<double> grads = taped.zero_grads();
  const Tensor<double> dinput = taped.backward(tape, r, &grads);

  GradCheckReport report;
  const double h = options.step;
  auto record = [&](double analytic, double numeric, const std::string& where) {
    const double e = relative_error(analytic, numeric);
    ++report.checked;
    if (e >= report.max_rel_error) {
      report.max_rel_error = e;
      report.worst = where;
    }
  };

  for (std::size_t pi = 0; pi < work.params().size(); ++pi) {
    auto& p = work.params().params()[pi];
    if (!p.trainable) continue;
    for (std::size_t k : sample_indices(p.values.size(), options.max_per_param, rng)) {
      const double saved = p.values[k];
      p.values[k] = saved + h;
      const double up = weighted_sum(work.forward(input), r);
      p.values[k] = saved - h;
      const double down = weighted_sum(work.forward(input), r);
      p.values[k] = saved;
      record(grads.params()[pi].values[k], (up - down) / (2.0 * h), p.key + "[" + std::to_string(k) + "]");
    }
  }
  if (options.check_input) {
    Tensor<double> x = input;
    for (std::size_t k : sample_indices(x.size(), options.max_per_param, rng)) {
      const double saved = x[k];
      x[k] = saved + h;
      const double up = weighted_sum(work.forward(x), r);
      x[k] = saved - h;
      const double down = weighted_sum(work.forward(x), r);
      x[k] = saved;
      record(dinput[k], (up - down) / (2.0 * h), "input[" + std::to_string(k) + "]");
    }
  }
  return report;
}

}  // namespace soilgen::nn
