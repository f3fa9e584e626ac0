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

#include "pi_irl/demo_gen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace pi_irl::demo {

void validate(const CycleBuffer& buffer) {
  std::set<std::size_t> ids;
  for (const auto& c : buffer.cycles) {
    if (c.policies.empty()) throw Error(ErrorCode::InvalidSpec, "cycle without policies");
    if (c.demo_index >= c.policies.size()) {
      throw Error(ErrorCode::InvalidSpec, "demo_index out of range in cycle " + std::to_string(c.cycle_id));
    }
    if (c.demo_pi_features != c.policies[c.demo_index].pi_features) {
      throw Error(ErrorCode::InvalidSpec, "demo features differ from the indexed policy");
    }
    if (!ids.insert(c.cycle_id).second) {
      throw Error(ErrorCode::InvalidSpec, "duplicate cycle id " + std::to_string(c.cycle_id));
    }
    if (c.segment_index >= buffer.segments.size() && !buffer.segments.empty()) {
      throw Error(ErrorCode::InvalidSpec, "cycle references an unknown segment");
    }
  }
}

planner::VehicleState track_start_state(const track::TrackEnvironment& env, double speed) {
  const auto& c = env.centerline().front();
  return {c.x, c.y, c.heading, speed, 0.0};
}

namespace {

struct ClosedLoopRun {
  planner::MpcResult result;
  Trajectory zeta;
};

ClosedLoopRun drive_closed_loop(const track::TrackEnvironment& env, const RewardWeights& theta_star,
                                const PlannerConfig& cfg, const ExpertConfig& expert,
                                planner::MpcOptions options) {
  for (double t : theta_star.theta) {
    if (!std::isfinite(t)) throw Error(ErrorCode::NonFiniteInput, "theta_star not finite");
  }
  const auto n_cycles = static_cast<std::size_t>(expert.max_duration_s / cfg.replan_interval_s);
  const double end_arc = env.spec().length_m - expert.end_margin_m;

  planner::FixedWeights provider(theta_star);
  options.stop_when = [&](const planner::VehicleState& s) {
    return env.frame(s.x, s.y).arc_position >= end_arc;
  };
  const auto start = track_start_state(env, expert.start_speed_fraction * env.speed_limit());
  ClosedLoopRun run{planner::run_mpc(env, provider, n_cycles, cfg, start, options), {}};

  run.zeta.dt = cfg.dt;
  run.zeta.samples.reserve(run.result.executed.size());
  for (std::size_t i = 0; i < run.result.executed.size(); ++i) {
    const auto& s = run.result.executed[i];
    // Rebase time on the sample index so the record has an exact constant period.
    run.zeta.samples.push_back({s.x, s.y, s.heading, s.speed, cfg.dt * static_cast<double>(i)});
  }
  return run;
}

}  // namespace

Trajectory generate_expert_odometry(const track::TrackEnvironment& env, const RewardWeights& theta_star,
                                    const PlannerConfig& cfg, std::uint64_t seed,
                                    const ExpertConfig& expert) {
  PlannerConfig dense = cfg;
  dense.policy_count = expert.policy_count;
  dense.seed = seed;
  return drive_closed_loop(env, theta_star, dense, expert, {}).zeta;
}

SelfDemonstrations collect_self_demonstrations(std::span<const SegmentSpec> segments,
                                               const PlannerConfig& cfg, std::uint64_t seed,
                                               const ExpertConfig& expert) {
  SelfDemonstrations out;
  out.buffer.planner = cfg;
  out.buffer.planner.seed = seed;
  out.buffer.segments.assign(segments.begin(), segments.end());
  out.buffer.dropped_per_segment.assign(segments.size(), 0);
  out.odometry.resize(segments.size());

  for (const auto& seg : segments) {
    if (!seg.has_theta_star) throw Error(ErrorCode::MissingGroundTruth, "self-demonstration needs theta_star");
  }
  std::vector<planner::MpcResult> results(segments.size());
  parallel_for(segments.size(), [&](std::size_t si) {
    const auto env = track::build_track(segments[si].track);
    PlannerConfig seg_cfg = cfg;
    seg_cfg.seed = mix_seed(seed, si);
    planner::MpcOptions options;
    options.segment_label = static_cast<int>(segments[si].track.archetype);
    options.segment_index = si;
    auto run = drive_closed_loop(env, segments[si].theta_star, seg_cfg, expert, options);
    results[si] = std::move(run.result);
    out.odometry[si] = std::move(run.zeta);
  });

  for (auto& r : results) {
    for (auto& c : r.cycles) {
      c.cycle_id = out.buffer.cycles.size();
      out.buffer.cycles.push_back(std::move(c));
    }
  }
  return out;
}

namespace {

struct FrameError {
  double lon;
  double lat;
  double yaw;
};

FrameError frame_error(const planner::VehicleState& s, const planner::TrajectorySample& z) {
  const double c = std::cos(z.heading);
  const double sn = std::sin(z.heading);
  const double dx = s.x - z.x;
  const double dy = s.y - z.y;
  return {c * dx + sn * dy, -sn * dx + c * dy, wrap_angle(s.heading - z.heading)};
}

}  // namespace

double weighted_projection_cost(std::span<const planner::VehicleState> states, const Trajectory& zeta,
                                const ProjectionWeights& w) {
  std::vector<double> terms;
  terms.reserve(states.size());
  for (const auto& s : states) {
    const auto idx = zeta.index_at(s.time);
    if (!idx) continue;
    const auto e = frame_error(s, zeta.samples[*idx]);
    terms.push_back(w.lon * e.lon * e.lon + w.lat * e.lat * e.lat + w.yaw * e.yaw * e.yaw);
  }
  if (terms.empty()) return std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double weight = (i == 0 || i + 1 == terms.size()) ? 0.5 : 1.0;
    sum += weight * terms[i];
  }
  return sum * zeta.dt;
}

ProjectionResult project_demonstration(std::span<const Policy> policies, const Trajectory& zeta,
                                       const ProjectionWeights& w) {
  if (policies.empty()) throw Error(ErrorCode::EmptyPolicySet, "no policies to project onto");
  ProjectionResult best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const double cost = weighted_projection_cost(policies[i].states, zeta, w);
    if (cost < best.cost) best = {i, cost};
  }
  return best;
}

RewardWeights draw_initial_weights(std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  RewardWeights theta;
  for (auto& t : theta.theta) t = rng.uniform(lo, hi);
  return theta;
}

CycleBuffer collect_cycle_buffer(std::span<const SegmentSpec> segments,
                                 std::span<const Trajectory> experts, const RewardWeights& theta0,
                                 const PlannerConfig& cfg, std::uint64_t seed,
                                 const CollectConfig& collect) {
  if (segments.size() != experts.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one expert trajectory per segment required");
  }
  CycleBuffer buffer;
  buffer.planner = cfg;
  buffer.planner.seed = seed;
  buffer.segments.assign(segments.begin(), segments.end());
  buffer.dropped_per_segment.assign(segments.size(), 0);

  std::vector<planner::MpcResult> results(segments.size());
  parallel_for(segments.size(), [&](std::size_t si) {
    const auto env = track::build_track(segments[si].track);
    PlannerConfig seg_cfg = cfg;
    seg_cfg.seed = mix_seed(seed, si);
    planner::FixedWeights provider(theta0);
    planner::MpcOptions options;
    options.replay = &experts[si];
    options.segment_label = static_cast<int>(segments[si].track.archetype);
    options.segment_index = si;
    options.projector = [&](std::span<const Policy> policies,
                            const Trajectory& zeta) -> std::optional<std::size_t> {
      const auto r = project_demonstration(policies, zeta, collect.projection);
      if (!(r.cost < collect.gate_threshold)) return std::nullopt;
      return r.index;
    };
    results[si] = planner::run_mpc(env, provider, collect.cycles_per_segment, seg_cfg,
                                   track_start_state(env, 0.0), options);
  });

  std::size_t next_id = 0;
  for (std::size_t si = 0; si < segments.size(); ++si) {
    buffer.dropped_per_segment[si] = results[si].dropped;
    for (auto& c : results[si].cycles) {
      c.cycle_id = next_id++;
      buffer.cycles.push_back(std::move(c));
    }
  }
  return buffer;
}

CycleBuffer select_segments(const CycleBuffer& buffer, std::span<const std::size_t> segment_indices) {
  CycleBuffer out;
  out.planner = buffer.planner;
  out.segments = buffer.segments;
  out.dropped_per_segment = buffer.dropped_per_segment;
  for (const auto& c : buffer.cycles) {
    if (std::find(segment_indices.begin(), segment_indices.end(), c.segment_index) !=
        segment_indices.end()) {
      out.cycles.push_back(c);
    }
  }
  return out;
}

std::vector<std::vector<planner::VehicleState>> regenerate_traces(const PlanningCycle& cycle,
                                                                  const track::TrackEnvironment& env,
                                                                  const PlannerConfig& cfg) {
  std::vector<std::vector<planner::VehicleState>> traces(cycle.policies.size());
  for (std::size_t i = 0; i < cycle.policies.size(); ++i) {
    traces[i] = planner::rollout(env, cycle.start_state, cycle.policies[i].controls, cfg);
  }
  return traces;
}

}  // namespace pi_irl::demo
