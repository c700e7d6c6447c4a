// Copyright 2026 The River Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference vs OpenMP kernels, plus one full decode step.
#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "river/engine.hpp"
#include "river/kernels.hpp"

namespace {

using namespace river;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Matrix m(r, c);
    for (float& v : m.flat()) v = u(rng);
    return m;
}

Vector random_vector(std::size_t n, std::uint64_t seed) {
    const Matrix m = random_matrix(1, n, seed);
    return Vector(m.flat().begin(), m.flat().end());
}

template <bool Parallel>
void BM_Vecmat(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix w = random_matrix(n, 4 * n, 1);
    const Vector x = random_vector(n, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? kernels::vecmat(x, w) : kernels::serial::vecmat(x, w));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.size()));
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 3), b = random_matrix(n, n, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? kernels::matmul(a, b) : kernels::serial::matmul(a, b));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Parallel>
void BM_Attention(benchmark::State& state) {
    const auto seq = static_cast<std::size_t>(state.range(0));
    const kernels::AttentionShape shape{32, 8, 64};
    std::vector<Vector> keys, values;
    for (std::size_t t = 0; t < seq; ++t) {
        keys.push_back(random_vector(shape.n_kv_heads * shape.head_dim, 10 + t));
        values.push_back(random_vector(shape.n_kv_heads * shape.head_dim, 90000 + t));
    }
    const std::vector<std::span<const float>> ks(keys.begin(), keys.end()), vs(values.begin(), values.end());
    const Vector q = random_vector(shape.n_heads * shape.head_dim, 5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? kernels::attention(q, ks, vs, shape)
                                          : kernels::serial::attention(q, ks, vs, shape));
    }
}

void BM_DecodeStep(benchmark::State& state) {
    ModelConfig c = *find_preset("toy-8");
    c.hidden_dim = 256;
    c.head_dim = 64;
    c.ffn_dim = 1024;
    c.vocab_size = 4096;
    const Model m = generate_random_model(c, 1);
    const auto kind = static_cast<StrategyKind>(state.range(0));
    const ExitRiver river = build_exit_river(m, 1, 0.97f, QuantConfig{});
    const std::vector<TokenId> prompt{1, 2, 3, 4};
    for (auto _ : state) {
        const GenerationRun run =
            generate(m, &river, Strategy{kind}, prompt, 32, ExitPolicy{1, 0.97f});
        benchmark::DoNotOptimize(run.trace.generated.data());
        state.counters["cost_units"] = run.trace.cost_units();
    }
    state.SetLabel(std::string(to_string(kind)));
}

}  // namespace

BENCHMARK(BM_Vecmat<false>)->Name("vecmat/serial")->Arg(256)->Arg(1024)->Arg(2048);
BENCHMARK(BM_Vecmat<true>)->Name("vecmat/openmp")->Arg(256)->Arg(1024)->Arg(2048);
BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<true>)->Name("matmul/openmp")->Arg(64)->Arg(256);
BENCHMARK(BM_Attention<false>)->Name("attention/serial")->Arg(128)->Arg(1024);
BENCHMARK(BM_Attention<true>)->Name("attention/openmp")->Arg(128)->Arg(1024);
BENCHMARK(BM_DecodeStep)
    ->Name("generate32")
    ->Arg(int(StrategyKind::FullBackbone))
    ->Arg(int(StrategyKind::River))
    ->Arg(int(StrategyKind::BatchingRecompute))
    ->Arg(int(StrategyKind::StatePropagation))
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
