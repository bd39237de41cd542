#include <benchmark/benchmark.h>

#include <random>

#include "soilgen/adam.hpp"
#include "soilgen/arch.hpp"
#include "soilgen/nn.hpp"

using namespace soilgen;

namespace {

nn::Tensor<float> noise(int n, int c, int h, int w) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> d;
  nn::Tensor<float> t(n, c, h, w);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

arch::ArchDescriptor by_name(int i) {
  switch (i) {
    case 0: return arch::generator();
    case 1: return arch::discriminator();
    default: return arch::mask_segmentation();
  }
}

void BM_Forward(benchmark::State& state) {
  const auto net = nn::Network<float>::create(by_name(static_cast<int>(state.range(0))), 1);
  const int size = static_cast<int>(state.range(1));
  const auto x = noise(1, 3, size, size);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_Forward)->ArgsProduct({{0, 1, 2}, {16, 64}})->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  auto net = nn::Network<float>::create(by_name(static_cast<int>(state.range(0))), 1);
  const int size = static_cast<int>(state.range(1));
  const auto x = noise(1, 3, size, size);
  auto grads = net.zero_grads();
  for (auto _ : state) {
    nn::Tape<float> tape;
    const auto y = net.forward(x, tape);
    benchmark::DoNotOptimize(net.backward(tape, y, &grads));
  }
}
BENCHMARK(BM_ForwardBackward)->ArgsProduct({{0, 1, 2}, {16, 64}})->Unit(benchmark::kMillisecond);

void BM_AdamGenerator(benchmark::State& state) {
  auto net = nn::Network<float>::create(arch::generator(), 1);
  auto grads = net.zero_grads();
  for (auto& p : grads.params()) std::fill(p.values.begin(), p.values.end(), 1e-3f);
  auto st = nn::adam_init(net.params());
  for (auto _ : state) nn::adam_step(net.params(), grads, st, nn::AdamConfig{1e-5});
  state.counters["params"] = static_cast<double>(net.params().scalar_count());
}
BENCHMARK(BM_AdamGenerator)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
