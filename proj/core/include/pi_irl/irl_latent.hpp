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
#include <string_view>
#include <utility>
#include <vector>

#include "pi_irl/irl_linear.hpp"

namespace pi_irl::irl {

/// C reward functions in scaled-feature space with a prior over clusters.
struct ClusterModel {
  std::size_t C = 1;
  std::vector<RewardWeights> thetas;
  std::vector<double> prior;
  FeatureVector feature_scales{};

  /// Cluster weights acting on raw PI features.
  RewardWeights raw_theta(std::size_t c) const { return to_raw_weights(thetas.at(c), feature_scales); }
};

/// Throws InvalidSpec on shape, sign or normalization problems.
void validate(const ClusterModel& model);

struct Responsibilities {
  std::vector<double> beta;
};

/// Posterior cluster membership of the cycle's demonstration.
Responsibilities e_step(const PlanningCycle& cycle, const ClusterModel& model);
/// Same on pre-scaled features; `thetas` must live in the same space.
Responsibilities e_step(std::span<const FeatureVector> pi_features, std::size_t demo_index,
                        std::span<const RewardWeights> thetas, std::span<const double> prior);

/// Mean responsibility per cluster. Throws EmptyBatch.
std::vector<double> m_step_prior(std::span<const Responsibilities> batch);

/// beta_c * (E_p[f] - f_demo). Throws InvalidSpec unless beta_c is in [0, 1].
FeatureVector latent_gradient(const PlanningCycle& cycle, const RewardWeights& theta_c, double beta_c);
FeatureVector latent_gradient(std::span<const FeatureVector> pi_features, std::size_t demo_index,
                              const RewardWeights& theta_c, double beta_c);

/// sum over demonstrations of ln sum_c psi(c) p(demo | theta_c).
double em_objective(const CycleBuffer& buffer, const ClusterModel& model);

enum class LatentStart {
  /// First E-step under the random initial weights.
  EStep,
  /// First responsibilities from gap_clusters; the weights still start from random draws.
  GapClusters,
};

struct LatentConfig {
  /// Gradient steps per mini-batch and cluster inside one M-step.
  std::size_t m_steps = 5;
  LatentStart start = LatentStart::GapClusters;
  /// Epochs that keep the seeded responsibilities before E-steps resume (GapClusters only).
  std::size_t warmup_epochs = 20;
  /// Wider than the linear default so clusters start apart.
  double init_low = 0.02;
  double init_high = 3.0;
  double collapse_prior = 0.02;
  std::size_t collapse_epochs = 3;
};

struct LatentEpochLog {
  EpochLog stats;
  std::vector<double> prior;
  std::size_t reseeded = 0;
};

struct LatentTrainResult {
  ClusterModel model;
  std::vector<LatentEpochLog> log;
  std::vector<Responsibilities> responsibilities;  // final E-step, one per cycle
};

/// Spherical k-means (k-means++ seeding) on each demonstration's feature gap
/// E_uniform[f] - f_demo, i.e. the likelihood gradient at theta = 0. Returns a label per cycle.
/// Cycles with a zero gap join cluster 0.
std::vector<std::size_t> gap_clusters(std::span<const detail::ScaledCycle> cycles, std::size_t C,
                                      std::uint64_t seed, std::size_t max_iterations = 100);

/// EM over the buffer: E-step, prior update, then per-cluster mini-batch ascent.
LatentTrainResult train_latent(const CycleBuffer& buffer, std::size_t C, const TrainConfig& cfg,
                               const LatentConfig& latent = {}, const DistanceTable& distances = {});

/// Raw weights sum_c beta_c theta_c with beta from the previous cycle's optimal policy;
/// prior-weighted mean when there is no previous cycle.
RewardWeights infer_mixture(const PlanningCycle* previous, const ClusterModel& model);

/// Mixture for an explicit responsibility vector, in raw-feature space.
RewardWeights mix_weights(const ClusterModel& model, std::span<const double> beta);

/// Online provider for run_mpc.
class LatentMixtureProvider final : public planner::RewardProvider {
 public:
  explicit LatentMixtureProvider(ClusterModel model) : model_(std::move(model)) {}
  RewardWeights next_weights(const PlanningCycle* previous) override {
    return infer_mixture(previous, model_);
  }

 private:
  ClusterModel model_;
};

std::string serialize_model(const ClusterModel& model);
ClusterModel parse_latent_model(std::string_view text);

/// CSV {epoch, mean_ed, mean_evd, grad_norm, reseeded, psi_0..psi_{C-1}}.
std::string serialize_log(std::span<const LatentEpochLog> log);

}  // namespace pi_irl::irl
