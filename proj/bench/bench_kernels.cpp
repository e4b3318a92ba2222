// Compares the OpenMP kernels against the naive serial reference versions.

#include <benchmark/benchmark.h>

#include <random>

#include "lsn/kernels.hpp"
#include "lsn/ref_kernels.hpp"

using namespace lsn;

namespace {

TensorF rand_tensor(Shape s, unsigned seed) {
  TensorF t(s);
  std::mt19937 rng(seed);
  for (auto& v : t.data) v = static_cast<float>(2.0 * (rng() / 4294967296.0) - 1.0);
  return t;
}

void BM_conv2d_omp(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const TensorF x = rand_tensor({1, c, 96, 96}, 1);
  const TensorF w = rand_tensor({c, c, 3, 3}, 2);
  const TensorF b = rand_tensor({1, c, 1, 1}, 3);
  TensorF y({1, c, 96, 96});
  for (auto _ : state) {
    kernels::conv2d_forward(x, w, b.data.data(), 1, 1, y);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void BM_conv2d_serial(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const TensorF x = rand_tensor({1, c, 96, 96}, 1);
  const TensorF w = rand_tensor({c, c, 3, 3}, 2);
  const TensorF b = rand_tensor({1, c, 1, 1}, 3);
  for (auto _ : state) {
    TensorF y = ref::conv2d(x, w, b.data.data(), 1, 1);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void BM_deconv2d_omp(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const TensorF x = rand_tensor({1, c, 24, 24}, 1);
  const TensorF k = rand_tensor({c, 1, 4, 4}, 2);
  TensorF y({1, c, 48, 48});
  for (auto _ : state) {
    kernels::deconv2d_forward(x, k, 2, y);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void BM_deconv2d_serial(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const TensorF x = rand_tensor({1, c, 24, 24}, 1);
  const TensorF k = rand_tensor({c, 1, 4, 4}, 2);
  for (auto _ : state) {
    TensorF y = ref::deconv2d(x, k, 2);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void BM_maxpool2_omp(benchmark::State& state) {
  const TensorF x = rand_tensor({1, 32, 96, 96}, 1);
  TensorF y({1, 32, 48, 48});
  std::vector<int> argmax;
  for (auto _ : state) {
    kernels::maxpool2_forward(x, y, argmax);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void BM_maxpool2_serial(benchmark::State& state) {
  const TensorF x = rand_tensor({1, 32, 96, 96}, 1);
  for (auto _ : state) {
    TensorF y = ref::maxpool2(x);
    benchmark::DoNotOptimize(y.data.data());
  }
}

}  // namespace

BENCHMARK(BM_conv2d_omp)->Arg(8)->Arg(32);
BENCHMARK(BM_conv2d_serial)->Arg(8)->Arg(32);
BENCHMARK(BM_deconv2d_omp)->Arg(8)->Arg(32);
BENCHMARK(BM_deconv2d_serial)->Arg(8)->Arg(32);
BENCHMARK(BM_maxpool2_omp);
BENCHMARK(BM_maxpool2_serial);
BENCHMARK_MAIN();
