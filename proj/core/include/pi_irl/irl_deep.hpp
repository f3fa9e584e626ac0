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
#include <deque>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pi_irl/irl_linear.hpp"
#include "pi_irl/neuralnet.hpp"

namespace pi_irl::irl {

using InputScales = std::array<double, nn::kInputColumns>;

inline constexpr std::string_view kOrderingRule = "value_desc_gen_weights_tie_id";

struct DeepModel {
  nn::NetworkParams params;
  InputScales feature_scales{};
  std::string ordering{kOrderingRule};
  std::size_t p_fix = nn::kPolicyRows;
  std::size_t history = 5;
};

/// Throws InvalidSpec on non-positive scales, h < 1 or an unknown ordering rule.
void validate(const DeepModel& model);

/// Mean absolute value of each input column over every policy in the buffer, plus 1e-8.
InputScales compute_input_scales(const CycleBuffer& buffer);

/// Rows sorted by descending value under gen_weights (ties by id), cyclically filled to P_fix,
/// each [features, actions] divided by the scales. Throws EmptyPolicySet.
nn::CycleInput prepare_network_input(const PlanningCycle& cycle, const DeepModel& model);

/// Predicted raw-feature weights for one cycle.
RewardWeights predict(const DeepModel& model, const PlanningCycle& cycle);

struct DeepGradient {
  nn::NetworkParams grads;
  RewardWeights theta;  // prediction at which the seed was taken
  FeatureVector seed{};
};

/// Back-propagates E_p[f] - f_demo over the full raw policy set.
DeepGradient deep_gradient(const PlanningCycle& cycle, const DeepModel& model);

struct DeepTrainResult {
  DeepModel model;
  std::vector<EpochLog> log;
  std::size_t updates = 0;
};

/// Adam ascent over shuffled mini-batches of precomputed cycles; grad_clip and l2 are unused.
DeepTrainResult train_deep(const CycleBuffer& buffer, const TrainConfig& cfg,
                           const DistanceTable& distances = {}, std::size_t history = 5);

/// Last h predictions.
class WeightHistory {
 public:
  explicit WeightHistory(std::size_t capacity);
  void push(const RewardWeights& theta);
  RewardWeights mean() const;
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::deque<RewardWeights> items_;
};

/// Adds this cycle's prediction and returns the window mean, used for the next cycle.
RewardWeights smooth_inference(WeightHistory& history, const PlanningCycle& cycle, const DeepModel& model);

/// Online provider: `initial` on the first cycle, then smoothed predictions from the previous one.
class DeepRewardProvider final : public planner::RewardProvider {
 public:
  DeepRewardProvider(const DeepModel& model, const RewardWeights& initial);
  RewardWeights next_weights(const PlanningCycle* previous) override;

 private:
  const DeepModel& model_;
  RewardWeights initial_;
  WeightHistory history_;
};

std::string serialize_model(const DeepModel& model);
DeepModel parse_deep_model(std::string_view text);

}  // namespace pi_irl::irl
