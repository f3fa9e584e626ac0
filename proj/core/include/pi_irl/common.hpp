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
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pi_irl {

/// Number of path-integral features per policy.
inline constexpr std::size_t kFeatureCount = 15;
/// Piecewise-constant control segments per policy (steer + accel each).
inline constexpr std::size_t kControlSegments = 4;
inline constexpr std::size_t kActionCount = 2 * kControlSegments;

/// Feature labels in storage order.
enum class Feature : std::size_t {
  LonAccel = 0,
  LonJerk = 1,
  LonVelocity = 2,
  LatAccel = 3,
  LatJerk = 4,
  Centerline = 5,
  Direction = 6,
  Proximity = 7,
  Curbs = 8,
  LatOvershoot = 9,
  LaneChangeDelay = 10,
  StateClass = 11,
  ManeuverSpace = 12,
  EndDirection = 13,
  MinProgress = 14,
};

std::string_view feature_name(std::size_t index);

using FeatureVector = std::array<double, kFeatureCount>;

/// Linear reward weights; R(s, a) = -sum_i theta_i f_i(s, a).
struct RewardWeights {
  FeatureVector theta{};

  double& operator[](std::size_t i) { return theta[i]; }
  double operator[](std::size_t i) const { return theta[i]; }
  bool operator==(const RewardWeights&) const = default;
};

enum class ErrorCode {
  InvalidSpec,
  OutOfBounds,
  DimensionMismatch,
  EmptyPolicySet,
  NonFiniteInput,
  EmptyBatch,
  EmptyBuffer,
  EmptyInput,
  ShapeMismatch,
  MissingCache,
  NoOverlap,
  MissingGroundTruth,
  ConfigParse,
  SchemaVersionMismatch,
  MissingInput,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Deterministic generator with portable real/integer draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::array<std::uint64_t, 4> s_{};
};

/// Fisher-Yates with Rng; the result depends only on the seed.
void shuffle(std::span<std::size_t> values, Rng& rng);

/// Worker count: PI_IRL_THREADS if set, otherwise hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n). Writes must go to per-index slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

double wrap_angle(double angle);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace pi_irl
