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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pi_irl/planner.hpp"
#include "pi_irl/track_env.hpp"

namespace pi_irl::demo {

using planner::PlannerConfig;
using planner::PlanningCycle;
using planner::Policy;
using planner::Trajectory;

/// One recorded segment of an experiment: its track and the expert's ground truth.
struct SegmentSpec {
  track::TrackSpec track;
  RewardWeights theta_star;
  bool has_theta_star = true;
};

struct CycleBuffer {
  std::vector<PlanningCycle> cycles;
  PlannerConfig planner;
  std::vector<SegmentSpec> segments;
  std::vector<std::size_t> dropped_per_segment;
};

/// Throws InvalidSpec on a broken cycle invariant or duplicate cycle ids.
void validate(const CycleBuffer& buffer);

struct ExpertConfig {
  std::size_t policy_count = 1024;
  /// Upper bound on expert driving time.
  double max_duration_s = 90.0;
  /// Stop once the vehicle is this close to the track end.
  double end_margin_m = 12.0;
  double start_speed_fraction = 0.7;
};

/// Start pose at the first centerline sample.
planner::VehicleState track_start_state(const track::TrackEnvironment& env, double speed);

/// Closed-loop MPC under theta_star with a dense policy set; executed segments are concatenated.
Trajectory generate_expert_odometry(const track::TrackEnvironment& env, const RewardWeights& theta_star,
                                    const PlannerConfig& cfg, std::uint64_t seed,
                                    const ExpertConfig& expert = {});

struct SelfDemonstrations {
  CycleBuffer buffer;
  std::vector<Trajectory> odometry;  // executed path per segment
};

/// Closed-loop runs of the collection planner under each segment's theta_star. The planner's own
/// selection is the demonstration, so the buffer is consistent with a single linear reward per
/// segment. Throws MissingGroundTruth when a segment lacks theta_star.
SelfDemonstrations collect_self_demonstrations(std::span<const SegmentSpec> segments,
                                               const PlannerConfig& cfg, std::uint64_t seed,
                                               const ExpertConfig& expert = {});

struct ProjectionWeights {
  double lon = 1.0;
  double lat = 2.0;
  double yaw = 1.0;
};

/// Weighted squared error of a state trace against the odometry over their common window.
double weighted_projection_cost(std::span<const planner::VehicleState> states, const Trajectory& zeta,
                                const ProjectionWeights& w = {});

struct ProjectionResult {
  std::size_t index = 0;
  double cost = 0.0;
};

/// Closest policy to the odometry; lowest id on ties. Throws EmptyPolicySet.
ProjectionResult project_demonstration(std::span<const Policy> policies, const Trajectory& zeta,
                                       const ProjectionWeights& w = {});

struct CollectConfig {
  std::size_t cycles_per_segment = 50;
  /// Cycles whose projected demonstration costs more than this are dropped.
  double gate_threshold = 2.0;
  ProjectionWeights projection;
};

/// theta_0 uniform in [0.1, 1.0] per weight.
RewardWeights draw_initial_weights(std::uint64_t seed, double lo = 0.1, double hi = 1.0);

/// Replays each segment's expert odometry under theta0 and projects the demonstrations.
/// Cycle ids are assigned consecutively across segments.
CycleBuffer collect_cycle_buffer(std::span<const SegmentSpec> segments,
                                 std::span<const Trajectory> experts, const RewardWeights& theta0,
                                 const PlannerConfig& cfg, std::uint64_t seed,
                                 const CollectConfig& collect = {});

/// Line-delimited buffer file: a meta record then one record per cycle.
std::string serialize_buffer(const CycleBuffer& buffer);
CycleBuffer parse_buffer(std::string_view text);
void save_buffer(const std::filesystem::path& path, const CycleBuffer& buffer);
CycleBuffer load_buffer(const std::filesystem::path& path);

/// Version line then CSV rows {time, x, y, heading, speed}.
std::string serialize_trajectory(const Trajectory& trajectory);
Trajectory parse_trajectory(std::string_view text);

/// JSON text for one segment / planner config, as embedded in the buffer meta record.
std::string segment_to_json(const SegmentSpec& segment);
SegmentSpec segment_from_json(std::string_view text);
std::string planner_to_json(const PlannerConfig& cfg);
/// Missing keys keep their defaults.
PlannerConfig planner_from_json(std::string_view text);

/// Sub-buffer containing the selected segment indices only.
CycleBuffer select_segments(const CycleBuffer& buffer, std::span<const std::size_t> segment_indices);

/// Regenerates full state traces of a stored cycle.
std::vector<std::vector<planner::VehicleState>> regenerate_traces(const PlanningCycle& cycle,
                                                                  const track::TrackEnvironment& env,
                                                                  const PlannerConfig& cfg);

}  // namespace pi_irl::demo
