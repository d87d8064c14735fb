// Copyright 2026 The cstgl Authors.
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

#include <benchmark/benchmark.h>

#include <random>

#include "cstgl/forecaster.hpp"
#include "cstgl/metrics.hpp"
#include "cstgl/mtcl.hpp"
#include "cstgl/scorer.hpp"

using namespace cstgl;

namespace {

std::vector<double> uniform(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Default model on N nodes; state.range(0) = N.
ModelConfig default_model(std::size_t nodes) {
  ModelConfig c;
  c.num_nodes = nodes;
  return c;
}

void BM_Forward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0)), batch = 64;
  const ForecastModel model(default_model(n));
  const std::size_t w = model.config().window;
  const DiffArray x({batch, 1, n, w}, uniform(batch * n * w, 1), false);
  for (auto _ : state) {
    NoGradGuard guard;
    benchmark::DoNotOptimize(model.forward(x));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_Forward)->Arg(8)->Arg(51)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0)), batch = 64;
  ForecastModel model(default_model(n));
  const std::size_t w = model.config().window;
  const DiffArray x({batch, 1, n, w}, uniform(batch * n * w, 2), false);
  const DiffArray y({batch, n}, uniform(batch * n, 3), false);
  auto params = model.parameters();
  AdamState adam = AdamState::for_params(params);
  for (auto _ : state) {
    for (auto& p : params) p.zero_grad();
    const DiffArray d = sub(model.forward(x), y);
    backward(mean(mul(d, d)));
    adam_step(params, adam);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(51)->Unit(benchmark::kMillisecond);

void BM_BuildAdjacency(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const LearnedGraph g(static_cast<std::size_t>(state.range(0)), 256, 20.0, 15, rng);
  for (auto _ : state) benchmark::DoNotOptimize(g.sparse_adjacency());
}
BENCHMARK(BM_BuildAdjacency)->Arg(8)->Arg(51)->Arg(127)->Unit(benchmark::kMicrosecond);

void BM_PcaScore(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Matrix errors(2000, n, uniform(2000 * n, 5));
  const PcaScorer scorer = PcaScorer::fit(errors);
  const auto x = uniform(n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(scorer.score(x));
}
BENCHMARK(BM_PcaScore)->Arg(8)->Arg(51)->Arg(127);

struct Series {
  std::vector<double> scores;
  std::vector<int> labels;
};

Series labeled(std::size_t n) {
  Series s{uniform(n, 7), std::vector<int>(n, 0)};
  for (std::size_t t = 100; t < n; t += 400)
    for (std::size_t i = t; i < std::min(n, t + 30); ++i) s.labels[i] = 1;
  return s;
}

void BM_RocAuc(benchmark::State& state) {
  const Series s = labeled(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(roc_auc(s.scores, s.labels));
}
BENCHMARK(BM_RocAuc)->Arg(5000)->Arg(100000);

void BM_BestF1(benchmark::State& state) {
  const Series s = labeled(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(best_f1(s.scores, s.labels));
}
BENCHMARK(BM_BestF1)->Arg(5000)->Arg(100000);

void BM_PointAdjustF1(benchmark::State& state) {
  const Series s = labeled(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(point_adjust_f1(s.scores, s.labels, 6));
}
BENCHMARK(BM_PointAdjustF1)->Arg(5000)->Arg(100000);

}  // namespace

// libbenchmark_main.a ships LTO bytecode from another GCC release; own main.
BENCHMARK_MAIN();
