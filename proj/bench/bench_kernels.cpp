// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "emoseq/kernels.hpp"
#include "emoseq/model.hpp"
#include "emoseq/train.hpp"

namespace k = emoseq::kernels;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

template <auto Fn>
void band_power(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)) * 16000);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}

template <auto Fn>
void resample(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)) * 44100);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x, 44100, 16000));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}

template <auto Fn>
void conv_forward(benchmark::State& state) {
  const k::ConvShape s{3, static_cast<std::size_t>(state.range(0)), 40};
  const auto in = noise(s.input_count()), w = noise(s.weight_count(), 2), b = noise(s.out_channels, 3);
  std::vector<double> out(s.output_count());
  for (auto _ : state) {
    Fn(s, in, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Fn>
void conv_backward(benchmark::State& state) {
  const k::ConvShape s{3, static_cast<std::size_t>(state.range(0)), 40};
  const auto in = noise(s.input_count()), w = noise(s.weight_count(), 2), go = noise(s.output_count(), 3);
  std::vector<double> gi(s.input_count()), gw(s.weight_count()), gb(s.out_channels);
  for (auto _ : state) {
    Fn(s, in, w, go, gi, gw, gb);
    benchmark::DoNotOptimize(gi.data());
  }
}

template <bool Parallel>
void batch_gradient(benchmark::State& state) {
  emoseq::model::ModelShape shape;
  shape.num_classes = 3;
  const auto params = emoseq::model::init_params(shape, 1);
  std::vector<emoseq::Example> data;
  for (int i = 0; i < 8; ++i) {
    emoseq::model::Sequence seq(10, noise(shape.input_size(), i));
    data.push_back({seq, std::size_t(i % 3), 0.5, 0.0});
  }
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
  for (auto _ : state) {
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(emoseq::batch_gradient(params, data, idx, 1.0));
    } else {
      benchmark::DoNotOptimize(emoseq::batch_gradient_serial(params, data, idx, 1.0));
    }
  }
}

}  // namespace

BENCHMARK(band_power<k::reference::band_power>)->Name("band_power/reference")->Arg(1)->Arg(10)->UseRealTime();
BENCHMARK(band_power<k::band_power>)->Name("band_power/parallel")->Arg(1)->Arg(10)->UseRealTime();
BENCHMARK(resample<k::reference::resample_sinc>)->Name("resample/reference")->Arg(1)->Arg(5)->UseRealTime();
BENCHMARK(resample<k::resample_sinc>)->Name("resample/parallel")->Arg(1)->Arg(5)->UseRealTime();
BENCHMARK(conv_forward<k::reference::conv2d_forward>)->Name("conv_forward/reference")->Arg(4)->Arg(16)->UseRealTime();
BENCHMARK(conv_forward<k::conv2d_forward>)->Name("conv_forward/parallel")->Arg(4)->Arg(16)->UseRealTime();
BENCHMARK(conv_backward<k::reference::conv2d_backward>)->Name("conv_backward/reference")->Arg(4)->Arg(16)->UseRealTime();
BENCHMARK(conv_backward<k::conv2d_backward>)->Name("conv_backward/parallel")->Arg(4)->Arg(16)->UseRealTime();
BENCHMARK(batch_gradient<false>)->Name("batch_gradient/serial")->UseRealTime();
BENCHMARK(batch_gradient<true>)->Name("batch_gradient/parallel")->UseRealTime();

BENCHMARK_MAIN();
