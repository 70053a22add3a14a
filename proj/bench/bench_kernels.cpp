// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "mergelab/core/kernels.hpp"
#include "mergelab/core/prng.hpp"

using namespace mergelab;

namespace {

template <Tensor (*Kernel)(const Tensor&, const Tensor&)>
void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Prng rng(1);
    const Tensor a = prng_gaussian(rng, {n, n});
    const Tensor b = prng_gaussian(rng, {n, n});
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(a, b));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <Tensor (*Kernel)(const Tensor&)>
void bm_softmax(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    Prng rng(2);
    const Tensor x = prng_gaussian(rng, {rows, 64});
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(x));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows * 64));
}

} // namespace

BENCHMARK(bm_matmul<kernels::serial::matmul>)->Name("matmul/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<kernels::parallel::matmul>)->Name("matmul/openmp")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<kernels::serial::matmul_tn>)->Name("matmul_tn/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<kernels::parallel::matmul_tn>)->Name("matmul_tn/openmp")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_softmax<kernels::serial::softmax_rows>)->Name("softmax/serial")->RangeMultiplier(4)->Range(128, 8192);
BENCHMARK(bm_softmax<kernels::parallel::softmax_rows>)->Name("softmax/openmp")->RangeMultiplier(4)->Range(128, 8192);

BENCHMARK_MAIN();
