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

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pi_irl/common.hpp"
#include "pi_irl/track_env.hpp"

namespace pi_irl::planner {

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double time = 0.0;

  bool operator==(const VehicleState&) const = default;
};

inline constexpr double kMaxSteer = 0.5;
inline constexpr double kMinAccel = -3.0;
inline constexpr double kMaxAccel = 2.0;

/// Near a stop point the speed target follows a constant-deceleration profile:
/// zero within kStopHold, sqrt(2 a (d - kStopHold)) beyond, capped by the limit.
inline constexpr double kStopHold = 1.0;
inline constexpr double kStopDecel = 1.5;
/// Floor on the start speed in the expected-progress reference of the min-progress term.
inline constexpr double kMinProgressSpeed = 5.0;

/// Piecewise-constant controls, one steer/accel pair per segment of the horizon.
struct ControlSequence {
  std::array<double, kControlSegments> steer{};
  std::array<double, kControlSegments> accel{};
  double horizon_s = 6.0;

  bool operator==(const ControlSequence&) const = default;
};

/// steer[0..3] followed by accel[0..3].
std::array<double, kActionCount> action_vector(const ControlSequence& controls);

/// Throws InvalidSpec when a steer or accel value is outside its actuator range.
void validate(const ControlSequence& controls);

struct Policy {
  std::size_t id = 0;
  ControlSequence controls;
  std::vector<VehicleState> states;
  FeatureVector pi_features{};
  double value = 0.0;
};

struct PlannerConfig {
  std::size_t policy_count = 128;
  double horizon_s = 6.0;
  double dt = 0.1;
  double gamma_per_s = 0.95;
  double wheelbase_m = 2.8;
  double lat_accel_max = 3.0;
  double replan_interval_s = 1.0;
  std::uint64_t seed = 0;

  std::size_t steps() const;
  std::size_t steps_per_segment() const;
};

/// Throws InvalidSpec on P < 2, non-integral horizon/dt, or bad discount.
void validate(const PlannerConfig& cfg);

/// One MPC cycle: the policy set and its projected demonstration.
struct PlanningCycle {
  std::size_t cycle_id = 0;
  int segment_label = 4;
  std::size_t segment_index = 0;  // which track of the experiment produced the cycle
  VehicleState start_state;
  std::vector<Policy> policies;
  std::size_t demo_index = 0;
  FeatureVector demo_pi_features{};
  RewardWeights gen_weights;
  std::size_t selected_index = 0;  // optimal policy under gen_weights
};

/// Kinematic bicycle, explicit Euler.
VehicleState step_transition(const VehicleState& s, double steer, double accel, double dt,
                             double wheelbase_m);

/// Steering bound at a speed under the lateral-acceleration cap.
double steer_bound(double speed, const PlannerConfig& cfg);

/// Integrates the controls from s0. States leaving the map are clamped to its edge.
std::vector<VehicleState> rollout(const track::TrackEnvironment& env, const VehicleState& s0,
                                  const ControlSequence& controls, const PlannerConfig& cfg);

/// Rebuilds a policy (states and features) from stored controls.
Policy make_policy(std::size_t id, const track::TrackEnvironment& env, const VehicleState& s0,
                   const ControlSequence& controls, const PlannerConfig& cfg);

/// Samples cfg.policy_count policies from s0; deterministic in (seed, s0, cfg).
std::vector<Policy> sample_policy_set(const track::TrackEnvironment& env, const VehicleState& s0,
                                      const PlannerConfig& cfg, std::uint64_t seed);

/// Discounted trapezoidal path integral of the per-state features, plus event terms.
FeatureVector integrate_pi_features(const Policy& policy, const track::TrackEnvironment& env,
                                    const PlannerConfig& cfg);

/// V = -theta . f; throws DimensionMismatch unless both have 15 entries.
double policy_value(std::span<const double> pi_features, std::span<const double> theta);
double policy_value(const FeatureVector& pi_features, const RewardWeights& theta);

/// Argmax of policy_value, lowest id on ties. Throws EmptyPolicySet.
std::size_t optimal_policy(std::span<const Policy> policies, const RewardWeights& theta);
std::size_t optimal_policy(std::span<const FeatureVector> pi_features, const RewardWeights& theta);

struct TrajectorySample {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double time = 0.0;
};

/// Odometry record at a constant sample period.
struct Trajectory {
  double dt = 0.1;
  std::vector<TrajectorySample> samples;

  /// Sample index at a time, if one lies within 1e-6 s.
  std::optional<std::size_t> index_at(double time) const;
  double start_time() const { return samples.empty() ? 0.0 : samples.front().time; }
  double end_time() const { return samples.empty() ? 0.0 : samples.back().time; }
};

/// Throws InvalidSpec unless times increase with constant dt and values are finite.
void validate(const Trajectory& trajectory);

/// Supplies the reward weights for the next cycle from the previous one (null on the first).
class RewardProvider {
 public:
  virtual ~RewardProvider() = default;
  virtual RewardWeights next_weights(const PlanningCycle* previous) = 0;
};

class FixedWeights final : public RewardProvider {
 public:
  explicit FixedWeights(RewardWeights theta) : theta_(theta) {}
  RewardWeights next_weights(const PlanningCycle*) override { return theta_; }

 private:
  RewardWeights theta_;
};

/// Picks the demonstration index for a policy set; nullopt drops the cycle.
using DemoProjector =
    std::function<std::optional<std::size_t>(std::span<const Policy>, const Trajectory&)>;

struct MpcOptions {
  /// When set the vehicle is reset onto this odometry at every cycle.
  const Trajectory* replay = nullptr;
  DemoProjector projector;
  int segment_label = 4;
  std::size_t segment_index = 0;
  /// Keep rolled-out state traces in the recorded cycles.
  bool keep_states = false;
  /// Checked before each cycle on the current state; true ends the loop.
  std::function<bool(const VehicleState&)> stop_when;
};

struct MpcResult {
  std::vector<PlanningCycle> cycles;
  std::vector<VehicleState> executed;  // closed-loop vehicle states at dt
  std::size_t dropped = 0;
};

/// Receding-horizon loop: sample, query weights, select, advance (or reset on replay).
MpcResult run_mpc(const track::TrackEnvironment& env, RewardProvider& provider,
                  std::size_t n_cycles, const PlannerConfig& cfg, const VehicleState& start,
                  const MpcOptions& options = {});

}  // namespace pi_irl::planner
