// Copyright 2026 The pi_irl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "pi_irl/irl_linear.hpp"

using namespace pi_irl;

namespace {

std::vector<FeatureVector> random_set(std::size_t p) {
  Rng rng(7);
  std::vector<FeatureVector> rows(p);
  for (auto& r : rows) {
    for (double& v : r) v = rng.uniform(0.0, 3.0);
  }
  return rows;
}

RewardWeights weights() {
  RewardWeights t;
  Rng rng(8);
  for (double& v : t.theta) v = rng.uniform(0.1, 1.0);
  return t;
}

}  // namespace

static void BM_MaxentDistribution(benchmark::State& state) {
  const auto rows = random_set(static_cast<std::size_t>(state.range(0)));
  const auto theta = weights();
  for (auto _ : state) benchmark::DoNotOptimize(irl::maxent_distribution(rows, theta));
}
BENCHMARK(BM_MaxentDistribution)->Arg(16)->Arg(128)->Arg(1024);

static void BM_LinearGradient(benchmark::State& state) {
  const auto rows = random_set(static_cast<std::size_t>(state.range(0)));
  const auto theta = weights();
  for (auto _ : state) benchmark::DoNotOptimize(irl::linear_gradient(rows, 3, theta));
}
BENCHMARK(BM_LinearGradient)->Arg(128)->Arg(1024);
