#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "xsei/explain.hpp"
#include "xsei/features.hpp"
#include "xsei/models.hpp"
#include "xsei/nn.hpp"
#include "xsei/signal.hpp"

using namespace xsei;

namespace {

std::vector<double> noisy_sine(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.05);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * M_PI * static_cast<double>(i) / 400.0) + g(rng);
  return x;
}

}  // namespace

static void BM_ShapleyExact(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  std::vector<double> w(d);
  for (std::size_t i = 0; i < d; ++i) w[i] = 1.0 / static_cast<double>(i + 1);
  explain::CoalitionGame game(d, [&](explain::Coalition s) {
    double v = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (s >> i & 1U) v += w[i];
    }
    return v * v;
  });
  for (auto _ : state) benchmark::DoNotOptimize(explain::shapley_exact_all(game));
  state.SetComplexityN(static_cast<benchmark::IterationCount>(1) << d);
}
BENCHMARK(BM_ShapleyExact)->DenseRange(4, 14, 2)->Complexity();

static void BM_LbnnForward(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  nn::Network net(nn::Shape{1, len}, models::lbnn_layers(models::PoolVariant::avg, 2));
  net.initialize(1);
  const nn::Tensor1D x(nn::Shape{1, len}, noisy_sine(len, 2));
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_LbnnForward)->Arg(1000)->Arg(2000)->Unit(benchmark::kMicrosecond);

static void BM_LbnnGradient(benchmark::State& state) {
  const std::size_t len = 1000;
  const auto batch = static_cast<std::size_t>(state.range(0));
  nn::Network net(nn::Shape{1, len}, models::lbnn_layers(models::PoolVariant::max, 2));
  net.initialize(1);
  std::vector<nn::Tensor1D> xs;
  std::vector<int> labels;
  for (std::size_t i = 0; i < batch; ++i) {
    xs.emplace_back(nn::Shape{1, len}, noisy_sine(len, i));
    labels.push_back(static_cast<int>(i % 2));
  }
  std::vector<const nn::Tensor1D*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  std::vector<double> grad(net.parameter_count());
  for (auto _ : state) benchmark::DoNotOptimize(net.loss_and_gradient(ptrs, labels, grad));
}
BENCHMARK(BM_LbnnGradient)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_FeatureExtract(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto x = noisy_sine(len, 3);
  const auto pool = features::FeaturePool::default_pool();
  for (auto _ : state) benchmark::DoNotOptimize(features::extract(x, signal::kBaseSamplePeriodMs, pool));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_FeatureExtract)->Arg(1000)->Arg(10000);

static void BM_FftMagnitude(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto x = noisy_sine(len, 4);
  for (auto _ : state) benchmark::DoNotOptimize(signal::fft_magnitude(x, signal::kBaseSamplePeriodMs));
}
BENCHMARK(BM_FftMagnitude)->Arg(1000)->Arg(10000);
BENCHMARK_MAIN();
