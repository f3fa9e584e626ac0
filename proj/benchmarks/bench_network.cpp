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

#include "pi_irl/neuralnet.hpp"

using namespace pi_irl;

namespace {

std::vector<nn::CycleInput> batch(std::size_t n) {
  Rng rng(3);
  std::vector<nn::CycleInput> out(n);
  for (auto& in : out) {
    in.values.resize(nn::kPolicyRows * nn::kInputColumns);
    for (double& v : in.values) v = rng.uniform(-1.0, 1.0);
  }
  return out;
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const auto params = nn::init_params(1);
  const auto inputs = batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(params, inputs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_ForwardBackward(benchmark::State& state) {
  const auto params = nn::init_params(1);
  const auto inputs = batch(static_cast<std::size_t>(state.range(0)));
  std::vector<FeatureVector> seeds(inputs.size());
  for (auto& s : seeds) s.fill(0.01);
  for (auto _ : state) {
    const auto f = nn::forward(params, inputs);
    benchmark::DoNotOptimize(nn::backward(params, f.cache, seeds));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_AdamStep(benchmark::State& state) {
  auto params = nn::init_params(1);
  auto grads = nn::init_params(2);
  auto opt = nn::make_optimizer(params, 1e-3);
  for (auto _ : state) nn::apply_update(params, grads, opt);
}
BENCHMARK(BM_AdamStep)->Unit(benchmark::kMillisecond);
