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
#include <span>
#include <string_view>
#include <vector>

#include "pi_irl/common.hpp"

namespace pi_irl::track {

/// Situation archetypes; the numeric value is the segment label.
enum class Archetype : int { SharpTurn = 1, StopStartTurn = 2, StopStart = 3, LaneFollow = 4 };

std::string_view to_string(Archetype a);
Archetype archetype_from_string(std::string_view name);

struct CurvatureKnot {
  double s = 0.0;      // arc position [m]
  double kappa = 0.0;  // curvature [1/m]
};

/// Static disc obstacle.
struct Obstacle {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
};

/// Curvature is linearly interpolated between knots and held constant past the ends.
struct TrackSpec {
  Archetype archetype = Archetype::LaneFollow;
  double length_m = 100.0;
  double lane_width_m = 3.5;
  std::vector<CurvatureKnot> curvature_profile;
  std::vector<double> stop_points;
  double speed_limit_mps = 8.0;
  std::uint64_t seed = 0;
  std::vector<Obstacle> obstacles;
};

/// Throws InvalidSpec with the violated invariant.
void validate(const TrackSpec& spec);

/// Curvature at an arc position under the interpolation rule above.
double curvature_at(const TrackSpec& spec, double s);

/// Synthetic spec for an archetype; the seed jitters turn and stop placement.
TrackSpec make_archetype_spec(Archetype archetype, std::uint64_t seed);

inline constexpr double kCenterlineSpacing = 0.5;
inline constexpr double kCellSize = 0.25;
inline constexpr double kGridMargin = 8.0;
/// Stored obstacle distance when the track has no obstacles.
inline constexpr double kNoObstacleDistance = 1.0e3;

struct CenterlineSample {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double s = 0.0;
};

struct Bounds {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

/// Interpolated lane geometry at a point.
struct LaneFrame {
  double centerline_dist = 0.0;
  double signed_offset = 0.0;  // positive to the left of the driving direction
  double arc_position = 0.0;
  double lane_heading = 0.0;
  double boundary_dist = 0.0;
  double obstacle_dist = 0.0;
};

struct StaticFeatureSample {
  double centerline_dist = 0.0;
  double direction_err = 0.0;
  double proximity = 0.0;
  double curb_dist_penalty = 0.0;
};

/// Immutable road environment with node-centred feature grids.
class TrackEnvironment {
 public:
  const TrackSpec& spec() const { return spec_; }
  std::span<const CenterlineSample> centerline() const { return centerline_; }
  const Bounds& bounds() const { return bounds_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  double lane_width() const { return spec_.lane_width_m; }
  double speed_limit() const { return spec_.speed_limit_mps; }
  std::span<const double> stop_points() const { return spec_.stop_points; }

  /// Node grids in row-major (j * nx + i) order.
  std::span<const double> centerline_dist_grid() const { return centerline_dist_; }
  std::span<const double> boundary_dist_grid() const { return boundary_dist_; }
  std::span<const double> obstacle_dist_grid() const { return obstacle_dist_; }
  std::span<const double> lane_direction_grid() const { return lane_direction_; }

  /// Throws OutOfBounds outside bounds().
  LaneFrame frame(double x, double y) const;

  /// Node position for grid index (i, j).
  double node_x(std::size_t i) const { return bounds_.x_min + kCellSize * static_cast<double>(i); }
  double node_y(std::size_t j) const { return bounds_.y_min + kCellSize * static_cast<double>(j); }

  /// Byte-level fingerprint of all grids for determinism checks.
  std::uint64_t fingerprint() const;

 private:
  friend TrackEnvironment build_track(const TrackSpec& spec);

  TrackSpec spec_;
  std::vector<CenterlineSample> centerline_;
  Bounds bounds_;
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<double> centerline_dist_;
  std::vector<double> boundary_dist_;
  std::vector<double> obstacle_dist_;
  std::vector<double> lane_direction_;
  std::vector<double> dir_cos_;
  std::vector<double> dir_sin_;
  std::vector<double> arc_;
  std::vector<double> offset_;
};

TrackEnvironment build_track(const TrackSpec& spec);

/// Bilinear lookup of the static features at a pose.
StaticFeatureSample query_static(const TrackEnvironment& env, double x, double y, double heading);

/// Static features from an already-interpolated frame.
StaticFeatureSample static_features(const TrackEnvironment& env, const LaneFrame& frame,
                                    double heading);

}  // namespace pi_irl::track
