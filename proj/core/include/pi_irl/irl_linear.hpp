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
#include <span>
#include <string>
#include <vector>

#include "pi_irl/common.hpp"
#include "pi_irl/demo_gen.hpp"
#include "pi_irl/planner.hpp"

namespace pi_irl::irl {

using demo::CycleBuffer;
using planner::PlanningCycle;

/// p_i = exp(-theta.f_i) / Z with Z summed over the given set (max-shifted).
/// Throws NonFiniteInput on non-finite features or weights, EmptyPolicySet on an empty set.
std::vector<double> maxent_distribution(std::span<const FeatureVector> pi_features,
                                        const RewardWeights& theta);

/// ln p(index | theta) over the set.
double log_probability(std::span<const FeatureVector> pi_features, const RewardWeights& theta,
                       std::size_t index);

/// sum_i p_i f_i. Throws DimensionMismatch on size mismatch.
FeatureVector expected_features(std::span<const double> probs,
                                std::span<const FeatureVector> pi_features);

/// Per-cycle log-likelihood gradient E_p[f] - f_demo.
FeatureVector linear_gradient(const PlanningCycle& cycle, const RewardWeights& theta);
FeatureVector linear_gradient(std::span<const FeatureVector> pi_features, std::size_t demo_index,
                              const RewardWeights& theta);

/// ln p(demo | theta) for one cycle.
double cycle_log_likelihood(const PlanningCycle& cycle, const RewardWeights& theta);

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t batch_size = 16;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  double evd_threshold = 0.01;
  double grad_clip = 10.0;
  /// Optional ridge penalty lambda * |theta|^2 on the likelihood.
  double l2 = 0.0;
  /// Gradient steps taken on each mini-batch.
  std::size_t steps_per_batch = 1;
  /// Initial weights drawn uniform in [init_low, init_high].
  double init_low = 0.1;
  double init_high = 1.0;
};

void validate(const TrainConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_ed = 0.0;
  double mean_evd = 0.0;
  double grad_norm = 0.0;
};

/// Per-cycle trajectory distances d(zeta, pi) aligned with buffer.cycles; empty disables ED.
using DistanceTable = std::vector<std::vector<double>>;

/// Buffer-wide mean of each PI feature plus 1e-8.
FeatureVector compute_feature_scales(const CycleBuffer& buffer);

/// Policy features divided columnwise by scales.
std::vector<FeatureVector> scale_features(std::span<const planner::Policy> policies,
                                          const FeatureVector& scales);

/// Weights in scaled-feature space mapped back to raw features.
RewardWeights to_raw_weights(const RewardWeights& scaled_theta, const FeatureVector& scales);

struct LinearModel {
  RewardWeights theta;          // scaled-feature space
  FeatureVector feature_scales{};

  /// Weights that act directly on raw PI features.
  RewardWeights planner_weights() const { return to_raw_weights(theta, feature_scales); }
};

struct LinearTrainResult {
  LinearModel model;
  std::vector<EpochLog> log;
};

/// Mini-batch gradient ascent on the log-likelihood with norm clipping.
/// Epoch 0 in the log is the initial model; later entries follow each epoch.
LinearTrainResult train_linear(const CycleBuffer& buffer, const TrainConfig& cfg,
                               const DistanceTable& distances = {});

/// Version-tagged text object {version, kind:"linear", theta, feature_scales}.
std::string serialize_model(const LinearModel& model);
LinearModel parse_linear_model(std::string_view text);

/// CSV {epoch, mean_ed, mean_evd, grad_norm} with a version line.
std::string serialize_log(std::span<const EpochLog> log);

/// Shared mini-batch machinery.
namespace detail {

struct ScaledCycle {
  std::vector<FeatureVector> features;
  std::size_t demo = 0;
};

std::vector<ScaledCycle> scale_buffer(const CycleBuffer& buffer, const FeatureVector& scales);

/// Epoch order in batches; the order depends on the rng only.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng);

double norm(const FeatureVector& v);
/// Rescales v to norm <= clip.
void clip_norm(FeatureVector& v, double clip);

std::uint64_t init_stream(std::uint64_t seed, std::size_t cluster);
std::uint64_t shuffle_stream(std::uint64_t seed);
std::uint64_t cluster_stream(std::uint64_t seed);

}  // namespace detail

}  // namespace pi_irl::irl
