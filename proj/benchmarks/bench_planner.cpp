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

#include "pi_irl/planner.hpp"

using namespace pi_irl;

namespace {

const track::TrackEnvironment& env() {
  static const auto e = track::build_track(track::make_archetype_spec(track::Archetype::LaneFollow, 14));
  return e;
}

planner::VehicleState start() {
  const auto& c = env().centerline()[50];
  return {c.x, c.y, c.heading, 6.0, 0.0};
}

}  // namespace

static void BM_Rollout(benchmark::State& state) {
  planner::PlannerConfig cfg;
  const auto policies = planner::sample_policy_set(env(), start(), cfg, 1);
  const auto& controls = policies.front().controls;
  for (auto _ : state) benchmark::DoNotOptimize(planner::rollout(env(), start(), controls, cfg));
}
BENCHMARK(BM_Rollout);

static void BM_PolicySet(benchmark::State& state) {
  planner::PlannerConfig cfg;
  cfg.policy_count = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(planner::sample_policy_set(env(), start(), cfg, ++seed));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PolicySet)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_BuildTrack(benchmark::State& state) {
  const auto spec = track::make_archetype_spec(track::Archetype::SharpTurn, 11);
  for (auto _ : state) benchmark::DoNotOptimize(track::build_track(spec));
}
BENCHMARK(BM_BuildTrack)->Unit(benchmark::kMillisecond);
