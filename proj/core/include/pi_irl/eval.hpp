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
#include <span>
#include <string>
#include <vector>

#include "pi_irl/demo_gen.hpp"
#include "pi_irl/irl_linear.hpp"
#include "pi_irl/planner.hpp"

namespace pi_irl::eval {

using planner::PlanningCycle;
using planner::Trajectory;
using planner::VehicleState;

/// Integral over the common window of planar error (in the odometry frame) plus
/// w_yaw times the squared yaw error. Throws NoOverlap.
double trajectory_distance(const Trajectory& zeta, std::span<const VehicleState> states,
                           double w_yaw = 1.0);
double trajectory_distance(const Trajectory& zeta, const planner::Policy& policy, double w_yaw = 1.0);

/// sum_i p_i d_i.
double expected_distance(std::span<const double> probs, std::span<const double> distances);

/// Distances of every policy in the cycle, regenerating its traces.
std::vector<double> cycle_distances(const PlanningCycle& cycle, const Trajectory& zeta,
                                    const track::TrackEnvironment& env,
                                    const planner::PlannerConfig& cfg, double w_yaw = 1.0);

/// ED of a stored cycle under theta.
double expected_distance(const PlanningCycle& cycle, const RewardWeights& theta, const Trajectory& zeta,
                         const track::TrackEnvironment& env, const planner::PlannerConfig& cfg,
                         double w_yaw = 1.0);

/// Distance table for a whole buffer; experts are indexed by segment.
irl::DistanceTable distance_table(const demo::CycleBuffer& buffer, std::span<const Trajectory> experts,
                                  double w_yaw = 1.0);

/// V*(pi*_{theta*}) - V*(pi*_theta) under the ground truth value.
double expected_value_difference(std::span<const FeatureVector> pi_features, const RewardWeights& theta,
                                 const RewardWeights& theta_star);
double expected_value_difference(const PlanningCycle& cycle, const RewardWeights& theta,
                                 const RewardWeights& theta_star);

/// Ground truth for a cycle's segment; throws MissingGroundTruth.
const RewardWeights& ground_truth(const demo::CycleBuffer& buffer, const PlanningCycle& cycle);

struct EdEvd {
  double mean_ed = 0.0;   // NaN without distances
  double mean_evd = 0.0;  // NaN without ground truth
};

/// Means over the buffer with one raw-feature weight vector per cycle.
EdEvd summarize(const demo::CycleBuffer& buffer, const irl::DistanceTable& distances,
                std::span<const RewardWeights> raw_thetas);

inline constexpr std::size_t kHistogramBins = 200;
inline constexpr double kHistogramBinWidth = 0.0025;

struct Histogram {
  std::vector<double> bin_left;  // kHistogramBins entries
  std::vector<std::size_t> counts;
  std::size_t overflow = 0;  // values >= kHistogramBins * width
  double mean = 0.0;
  double std_dev = 0.0;  // sample standard deviation; 0 for a single value
};

/// Left-closed bins of fixed width from 0. Throws EmptyInput, NonFiniteInput on negatives/NaN.
Histogram segment_histogram(std::span<const double> distances);

struct SegmentReport {
  std::size_t segment_index = 0;
  int segment_label = 0;
  std::vector<std::size_t> cycle_ids;
  std::vector<double> distances;  // of the optimal policy per cycle
  std::vector<RewardWeights> thetas;
  double mean = 0.0;
  double std_dev = 0.0;
  Histogram histogram;
};

/// Fills mean/std/histogram from distances.
void finalize(SegmentReport& report);

std::string serialize_report_csv(const SegmentReport& report);
std::string serialize_histogram_csv(const Histogram& histogram);
std::string serialize_summary(std::span<const SegmentReport> reports);

}  // namespace pi_irl::eval
