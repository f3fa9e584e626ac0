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

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pi_irl/common.hpp"
#include "pi_irl/demo_gen.hpp"
#include "pi_irl/planner.hpp"
#include "pi_irl/track_env.hpp"

namespace fixtures {

using pi_irl::FeatureVector;
using pi_irl::RewardWeights;

inline FeatureVector random_features(pi_irl::Rng& rng, double hi = 3.0) {
  FeatureVector f{};
  for (auto& v : f) v = rng.uniform(0.0, hi);
  return f;
}

inline std::vector<FeatureVector> random_set(pi_irl::Rng& rng, std::size_t p, double hi = 3.0) {
  std::vector<FeatureVector> out(p);
  for (auto& f : out) f = random_features(rng, hi);
  return out;
}

inline RewardWeights random_theta(pi_irl::Rng& rng, double lo = -1.0, double hi = 1.0) {
  RewardWeights t;
  for (auto& v : t.theta) v = rng.uniform(lo, hi);
  return t;
}

inline FeatureVector single_feature(double value, std::size_t index = 0) {
  FeatureVector f{};
  f[index] = value;
  return f;
}

/// Cycle with policies built from raw feature rows; no state traces.
inline pi_irl::planner::PlanningCycle make_cycle(const std::vector<FeatureVector>& rows,
                                                 std::size_t demo, std::size_t id = 0,
                                                 int label = 4, std::size_t segment = 0) {
  pi_irl::planner::PlanningCycle c;
  c.cycle_id = id;
  c.segment_label = label;
  c.segment_index = segment;
  c.start_state = {0.0, 0.0, 0.0, 5.0, 0.0};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pi_irl::planner::Policy p;
    p.id = i;
    p.pi_features = rows[i];
    for (std::size_t k = 0; k < pi_irl::kControlSegments; ++k) {
      p.controls.steer[k] = 0.01 * static_cast<double>((i + k) % 7) - 0.03;
      p.controls.accel[k] = 0.1 * static_cast<double>((i * 3 + k) % 11) - 0.5;
    }
    c.policies.push_back(p);
  }
  c.demo_index = demo;
  c.demo_pi_features = rows.at(demo);
  for (auto& v : c.gen_weights.theta) v = 0.5;
  c.selected_index = pi_irl::planner::optimal_policy(c.policies, c.gen_weights);
  return c;
}

/// Buffer of random cycles with ground truth on every segment.
inline pi_irl::demo::CycleBuffer random_buffer(std::uint64_t seed, std::size_t cycles, std::size_t p,
                                               std::size_t segments = 1) {
  pi_irl::Rng rng(seed);
  pi_irl::demo::CycleBuffer b;
  for (std::size_t s = 0; s < segments; ++s) {
    pi_irl::demo::SegmentSpec spec;
    spec.track = pi_irl::track::make_archetype_spec(pi_irl::track::Archetype::LaneFollow, s + 1);
    for (auto& v : spec.theta_star.theta) v = rng.uniform(0.1, 1.0);
    b.segments.push_back(spec);
    b.dropped_per_segment.push_back(0);
  }
  for (std::size_t k = 0; k < cycles; ++k) {
    const std::size_t seg = k % segments;
    auto rows = random_set(rng, p);
    b.cycles.push_back(make_cycle(rows, rng.index(p), k, 4, seg));
  }
  return b;
}

/// Straight track along +x with no stops.
inline pi_irl::track::TrackSpec straight_spec(double length = 100.0) {
  pi_irl::track::TrackSpec s;
  s.archetype = pi_irl::track::Archetype::LaneFollow;
  s.length_m = length;
  s.lane_width_m = 3.5;
  s.curvature_profile = {{0.0, 0.0}, {length, 0.0}};
  s.speed_limit_mps = 8.0;
  return s;
}

}  // namespace fixtures
