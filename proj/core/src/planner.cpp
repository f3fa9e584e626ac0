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

#include "pi_irl/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pi_irl::planner {

std::array<double, kActionCount> action_vector(const ControlSequence& controls) {
  std::array<double, kActionCount> a{};
  for (std::size_t i = 0; i < kControlSegments; ++i) {
    a[i] = controls.steer[i];
    a[kControlSegments + i] = controls.accel[i];
  }
  return a;
}

void validate(const ControlSequence& controls) {
  for (std::size_t i = 0; i < kControlSegments; ++i) {
    if (!(std::abs(controls.steer[i]) <= kMaxSteer)) {
      throw Error(ErrorCode::InvalidSpec, "steer out of range");
    }
    if (!(controls.accel[i] >= kMinAccel && controls.accel[i] <= kMaxAccel)) {
      throw Error(ErrorCode::InvalidSpec, "accel out of range");
    }
  }
}

std::size_t PlannerConfig::steps() const {
  return static_cast<std::size_t>(std::llround(horizon_s / dt));
}

std::size_t PlannerConfig::steps_per_segment() const {
  return std::max<std::size_t>(1, steps() / kControlSegments);
}

void validate(const PlannerConfig& cfg) {
  if (cfg.policy_count < 2) throw Error(ErrorCode::InvalidSpec, "policy_count must be >= 2");
  if (!(cfg.dt > 0.0) || !(cfg.horizon_s > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "dt and horizon must be positive");
  }
  const double ratio = cfg.horizon_s / cfg.dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw Error(ErrorCode::InvalidSpec, "horizon_s / dt must be integral");
  }
  if (!(cfg.gamma_per_s > 0.0 && cfg.gamma_per_s <= 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "gamma_per_s must lie in (0, 1]");
  }
  if (!(cfg.wheelbase_m > 0.0) || !(cfg.lat_accel_max > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "wheelbase and lateral acceleration cap must be positive");
  }
  const double replan = cfg.replan_interval_s / cfg.dt;
  if (!(cfg.replan_interval_s > 0.0) || std::abs(replan - std::round(replan)) > 1e-9 ||
      cfg.replan_interval_s > cfg.horizon_s) {
    throw Error(ErrorCode::InvalidSpec, "replan interval must be a multiple of dt within the horizon");
  }
}

VehicleState step_transition(const VehicleState& s, double steer, double accel, double dt,
                             double wheelbase_m) {
  VehicleState n;
  n.x = s.x + s.speed * std::cos(s.heading) * dt;
  n.y = s.y + s.speed * std::sin(s.heading) * dt;
  n.heading = wrap_angle(s.heading + (s.speed / wheelbase_m) * std::tan(steer) * dt);
  n.speed = std::max(0.0, s.speed + accel * dt);
  n.time = s.time + dt;
  return n;
}

double steer_bound(double speed, const PlannerConfig& cfg) {
  const double v = std::max(speed, 1.0);
  return std::min(kMaxSteer, std::atan(cfg.lat_accel_max * cfg.wheelbase_m / (v * v)));
}

namespace {

std::size_t segment_of(std::size_t step, const PlannerConfig& cfg) {
  return std::min(step / cfg.steps_per_segment(), kControlSegments - 1);
}

bool on_map_edge(const track::Bounds& b, const VehicleState& s) {
  return s.x <= b.x_min || s.x >= b.x_max || s.y <= b.y_min || s.y >= b.y_max;
}

}  // namespace

std::vector<VehicleState> rollout(const track::TrackEnvironment& env, const VehicleState& s0,
                                  const ControlSequence& controls, const PlannerConfig& cfg) {
  const std::size_t n = cfg.steps();
  const auto& b = env.bounds();
  std::vector<VehicleState> states;
  states.reserve(n + 1);
  states.push_back(s0);
  bool truncated = on_map_edge(b, s0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t seg = segment_of(i, cfg);
    VehicleState next =
        step_transition(states.back(), controls.steer[seg], controls.accel[seg], cfg.dt, cfg.wheelbase_m);
    if (truncated) {
      next.x = states.back().x;
      next.y = states.back().y;
    } else if (!b.contains(next.x, next.y)) {
      next.x = std::clamp(next.x, b.x_min, b.x_max);
      next.y = std::clamp(next.y, b.y_min, b.y_max);
      truncated = true;
    }
    states.push_back(next);
  }
  return states;
}

FeatureVector integrate_pi_features(const Policy& policy, const track::TrackEnvironment& env,
                                    const PlannerConfig& cfg) {
  const auto& states = policy.states;
  FeatureVector f{};
  if (states.empty()) return f;
  const std::size_t n = states.size() - 1;
  const double dt = cfg.dt;
  const double log_gamma = std::log(cfg.gamma_per_s);
  const double horizon = dt * static_cast<double>(n);
  const double half_width = 0.5 * env.lane_width();
  const double v_limit = env.speed_limit();
  const auto& b = env.bounds();
  auto discount = [&](std::size_t i) { return std::exp(log_gamma * dt * static_cast<double>(i)); };

  std::vector<track::LaneFrame> frames(n + 1);
  std::vector<bool> clamped(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    clamped[i] = on_map_edge(b, states[i]);
    frames[i] = env.frame(std::clamp(states[i].x, b.x_min, b.x_max),
                          std::clamp(states[i].y, b.y_min, b.y_max));
  }

  std::vector<double> a_lon(n + 1);
  std::vector<double> a_lat(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    a_lon[i] = i < n ? (states[i + 1].speed - states[i].speed) / dt
                     : (n > 0 ? a_lon[n - 1] : 0.0);
    const std::size_t seg = segment_of(std::min(i, n > 0 ? n - 1 : 0), cfg);
    const double v = states[i].speed;
    a_lat[i] = v * v * std::abs(std::tan(policy.controls.steer[seg])) / cfg.wheelbase_m;
  }

  // Per-state features under the discounted trapezoid.
  for (std::size_t i = 0; i <= n; ++i) {
    const double w = discount(i) * dt * ((i == 0 || i == n) ? 0.5 : 1.0);
    const auto& s = states[i];
    const auto& fr = frames[i];
    const double jerk_lon = i == 0 ? 0.0 : (a_lon[i] - a_lon[i - 1]) / dt;
    const double jerk_lat = i == 0 ? 0.0 : (a_lat[i] - a_lat[i - 1]) / dt;
    double v_target = v_limit;
    for (double sp : env.stop_points()) {
      const double d = std::max(0.0, std::abs(fr.arc_position - sp) - kStopHold);
      v_target = std::min(v_target, std::sqrt(2.0 * kStopDecel * d));
    }
    const double dv = (s.speed - v_target) / v_limit;
    auto stat = track::static_features(env, fr, s.heading);
    if (clamped[i]) stat.curb_dist_penalty = 1.0;

    f[0] += w * std::abs(a_lon[i]);
    f[1] += w * std::abs(jerk_lon);
    f[2] += w * dv * dv;
    f[3] += w * a_lat[i];
    f[4] += w * std::abs(jerk_lat);
    f[5] += w * stat.centerline_dist;
    f[6] += w * stat.direction_err;
    f[7] += w * stat.proximity;
    f[8] += w * stat.curb_dist_penalty;
  }

  // Event and terminal terms, discounted at their event time.
  constexpr double kSignEps = 1e-6;
  bool crossed = false;
  for (std::size_t i = 1; i <= n; ++i) {
    const double o0 = frames[i - 1].signed_offset;
    const double o1 = frames[i].signed_offset;
    if (std::abs(o0) > kSignEps && std::abs(o1) > kSignEps && (o0 > 0.0) != (o1 > 0.0)) {
      crossed = true;
      continue;
    }
    if (crossed) {
      f[9] += discount(i) *
              std::max(0.0, frames[i].centerline_dist - frames[i - 1].centerline_dist);
    }
  }

  {
    double delay = horizon;
    std::size_t event = n;
    for (std::size_t i = 0; i <= n; ++i) {
      if (std::abs(frames[i].signed_offset) < 0.2) {
        delay = dt * static_cast<double>(i);
        event = i;
        break;
      }
    }
    f[10] = discount(event) * delay;
  }

  for (std::size_t i = 0; i <= n; ++i) {
    if (clamped[i] || frames[i].centerline_dist > half_width) {
      f[11] = discount(i);
      break;
    }
  }

  {
    double min_clearance = std::numeric_limits<double>::infinity();
    std::size_t at = 0;
    for (std::size_t i = 0; i <= n; ++i) {
      const double c = clamped[i] ? 0.0 : frames[i].boundary_dist;
      if (c < min_clearance) {
        min_clearance = c;
        at = i;
      }
    }
    f[12] = discount(at) * std::max(0.0, 1.0 - min_clearance / 1.0);
  }

  {
    const double err = wrap_angle(states[n].heading - frames[n].lane_heading);
    f[13] = discount(n) * err * err;
  }

  {
    const double progress = frames[n].arc_position - frames[0].arc_position;
    const double expected = std::max(states[0].speed, kMinProgressSpeed) * horizon;
    f[14] = discount(n) * std::max(0.0, 1.0 - progress / expected);
  }
  return f;
}

Policy make_policy(std::size_t id, const track::TrackEnvironment& env, const VehicleState& s0,
                   const ControlSequence& controls, const PlannerConfig& cfg) {
  Policy p;
  p.id = id;
  p.controls = controls;
  p.states = rollout(env, s0, controls, cfg);
  p.pi_features = integrate_pi_features(p, env, cfg);
  return p;
}

std::vector<Policy> sample_policy_set(const track::TrackEnvironment& env, const VehicleState& s0,
                                      const PlannerConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (!env.bounds().contains(s0.x, s0.y)) {
    throw Error(ErrorCode::OutOfBounds, "start state outside track bounds");
  }
  const double bound = steer_bound(s0.speed, cfg);
  std::vector<Policy> policies(cfg.policy_count);
  parallel_for(cfg.policy_count, [&](std::size_t id) {
    Rng rng(mix_seed(seed, id));
    ControlSequence c;
    c.horizon_s = cfg.horizon_s;
    for (auto& s : c.steer) s = rng.uniform(-bound, bound);
    for (auto& a : c.accel) a = rng.uniform(kMinAccel, kMaxAccel);
    policies[id] = make_policy(id, env, s0, c, cfg);
  });
  return policies;
}

double policy_value(std::span<const double> pi_features, std::span<const double> theta) {
  if (pi_features.size() != kFeatureCount || theta.size() != kFeatureCount) {
    throw Error(ErrorCode::DimensionMismatch,
                "policy_value expects " + std::to_string(kFeatureCount) + " features and weights");
  }
  return -dot(pi_features, theta);
}

double policy_value(const FeatureVector& pi_features, const RewardWeights& theta) {
  return policy_value(std::span<const double>(pi_features), std::span<const double>(theta.theta));
}

std::size_t optimal_policy(std::span<const FeatureVector> pi_features, const RewardWeights& theta) {
  if (pi_features.empty()) throw Error(ErrorCode::EmptyPolicySet, "no policies to select from");
  std::size_t best = 0;
  double best_value = policy_value(pi_features[0], theta);
  for (std::size_t i = 1; i < pi_features.size(); ++i) {
    const double v = policy_value(pi_features[i], theta);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  return best;
}

std::size_t optimal_policy(std::span<const Policy> policies, const RewardWeights& theta) {
  if (policies.empty()) throw Error(ErrorCode::EmptyPolicySet, "no policies to select from");
  std::size_t best = 0;
  double best_value = policy_value(policies[0].pi_features, theta);
  for (std::size_t i = 1; i < policies.size(); ++i) {
    const double v = policy_value(policies[i].pi_features, theta);
    if (v > best_value || (v == best_value && policies[i].id < policies[best].id)) {
      best_value = v;
      best = i;
    }
  }
  return policies[best].id;
}

std::optional<std::size_t> Trajectory::index_at(double time) const {
  if (samples.empty()) return std::nullopt;
  const double k = (time - samples.front().time) / dt;
  const long idx = std::lround(k);
  if (idx < 0 || static_cast<std::size_t>(idx) >= samples.size()) return std::nullopt;
  if (std::abs(samples[static_cast<std::size_t>(idx)].time - time) > 1e-6) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

void validate(const Trajectory& trajectory) {
  if (!(trajectory.dt > 0.0)) throw Error(ErrorCode::InvalidSpec, "trajectory dt must be positive");
  for (std::size_t i = 0; i < trajectory.samples.size(); ++i) {
    const auto& s = trajectory.samples[i];
    if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.heading) ||
        !std::isfinite(s.speed) || !std::isfinite(s.time)) {
      throw Error(ErrorCode::InvalidSpec, "trajectory sample not finite");
    }
    if (i > 0) {
      const double step = s.time - trajectory.samples[i - 1].time;
      if (!(step > 0.0) || std::abs(step - trajectory.dt) > 1e-6) {
        throw Error(ErrorCode::InvalidSpec, "trajectory times must advance by dt");
      }
    }
  }
}

MpcResult run_mpc(const track::TrackEnvironment& env, RewardProvider& provider,
                  std::size_t n_cycles, const PlannerConfig& cfg, const VehicleState& start,
                  const MpcOptions& options) {
  validate(cfg);
  if (n_cycles < 1) throw Error(ErrorCode::InvalidSpec, "n_cycles must be >= 1");
  const auto replan_steps =
      static_cast<std::size_t>(std::llround(cfg.replan_interval_s / cfg.dt));
  MpcResult result;
  VehicleState state = start;
  std::optional<PlanningCycle> previous;
  for (std::size_t k = 0; k < n_cycles; ++k) {
    if (options.replay != nullptr) {
      const auto& zeta = *options.replay;
      const double t = zeta.start_time() + cfg.replan_interval_s * static_cast<double>(k);
      const auto idx = zeta.index_at(t);
      if (!idx || !zeta.index_at(t + cfg.horizon_s)) break;
      const auto& z = zeta.samples[*idx];
      state = {z.x, z.y, z.heading, z.speed, z.time};
    }
    if (options.stop_when && options.stop_when(state)) break;
    const RewardWeights theta = provider.next_weights(previous ? &*previous : nullptr);

    PlanningCycle cycle;
    cycle.cycle_id = k;
    cycle.segment_label = options.segment_label;
    cycle.segment_index = options.segment_index;
    cycle.start_state = state;
    cycle.gen_weights = theta;
    cycle.policies = sample_policy_set(env, state, cfg, mix_seed(cfg.seed, k));
    for (auto& p : cycle.policies) p.value = policy_value(p.pi_features, theta);
    cycle.selected_index = optimal_policy(cycle.policies, theta);

    bool keep = true;
    if (options.replay != nullptr && options.projector) {
      const auto demo = options.projector(cycle.policies, *options.replay);
      if (demo) {
        cycle.demo_index = *demo;
      } else {
        keep = false;
      }
    } else {
      cycle.demo_index = cycle.selected_index;
    }
    cycle.demo_pi_features = cycle.policies[cycle.demo_index].pi_features;

    if (options.replay == nullptr) {
      const auto& chosen = cycle.policies[cycle.selected_index].states;
      for (std::size_t i = 0; i < replan_steps; ++i) result.executed.push_back(chosen[i]);
      state = chosen[replan_steps];
    }
    previous = cycle;
    if (!options.keep_states) {
      for (auto& p : cycle.policies) {
        p.states.clear();
        p.states.shrink_to_fit();
      }
    }
    if (keep) {
      result.cycles.push_back(std::move(cycle));
    } else {
      ++result.dropped;
    }
  }
  if (options.replay == nullptr) result.executed.push_back(state);
  return result;
}

}  // namespace pi_irl::planner
