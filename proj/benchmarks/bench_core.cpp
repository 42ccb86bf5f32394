// Microbenchmarks for the hot paths: the fixed-point codec, the per-bit
// error field, injection, and a forward pass of the desk-scale classifier.

#include <benchmark/benchmark.h>

#include <vector>

#include "biterr/bit_errors.hpp"
#include "biterr/network.hpp"
#include "biterr/quantization.hpp"
#include "biterr/rng.hpp"

using namespace biterr;

namespace {

std::vector<double> random_weights(std::size_t n, std::uint64_t seed) {
  std::vector<double> w(n);
  rng::Stream s(seed);
  for (auto& x : w) x = s.next_in(-0.5, 0.5);
  return w;
}

void BM_Quantize(benchmark::State& state) {
  const auto scheme = state.range(0) ? quant::QuantScheme::rquant(8)
                                     : quant::QuantScheme::normal(8);
  const std::size_t n = 1 << 18;
  const auto w = random_weights(n, 1);
  const quant::GroupRange g{0, n};
  const auto params = quant::fit_range(w, std::span(&g, 1), scheme);
  for (auto _ : state) {
    auto q = quant::quantize(w, std::span(&g, 1), params, scheme);
    benchmark::DoNotOptimize(q.codes.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_Dequantize(benchmark::State& state) {
  const auto scheme = quant::QuantScheme::rquant(8);
  const std::size_t n = 1 << 18;
  const auto w = random_weights(n, 2);
  const quant::GroupRange g{0, n};
  const auto params = quant::fit_range(w, std::span(&g, 1), scheme);
  const auto q = quant::quantize(w, std::span(&g, 1), params, scheme);
  std::vector<double> out(n);
  for (auto _ : state) {
    quant::dequantize(q, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_FlipMask(benchmark::State& state) {
  const std::size_t n = 1 << 16;
  const faults::ChipField chip(7, n, 8);
  std::uint64_t acc = 0;
  for (auto _ : state) {
    for (std::size_t i = 0; i < n; ++i) acc += chip.flip_mask(i, 0.01);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 8));
}

void BM_InjectRandom(benchmark::State& state) {
  const std::size_t n = 1 << 18;
  const auto w = random_weights(n, 3);
  const quant::GroupRange g{0, n};
  const auto scheme = quant::QuantScheme::rquant(8);
  const auto params = quant::fit_range(w, std::span(&g, 1), scheme);
  const auto q = quant::quantize(w, std::span(&g, 1), params, scheme);
  const faults::ChipField chip(9, n, 8);
  for (auto _ : state) {
    auto out = faults::inject_random(q, chip, 0.01);
    benchmark::DoNotOptimize(out.codes.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_Forward(benchmark::State& state) {
  const net::Architecture arch{{784, 256, 128, 10}};
  const auto model = net::Model::init(arch, 4);
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  const auto x = random_weights(batch * 784, 5);
  std::vector<double> logits(batch * 10);
  for (auto _ : state) {
    net::forward(arch, model.weights, x, batch, logits);
    benchmark::DoNotOptimize(logits.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}

}  // namespace

BENCHMARK(BM_Quantize)->Arg(0)->Arg(1);
BENCHMARK(BM_Dequantize);
BENCHMARK(BM_FlipMask);
BENCHMARK(BM_InjectRandom);
BENCHMARK(BM_Forward)->Arg(32)->Arg(128);

BENCHMARK_MAIN();
