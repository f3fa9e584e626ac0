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

#include "pi_irl/irl_linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "pi_irl/eval.hpp"
#include "pi_irl/text_io.hpp"

namespace pi_irl::irl {

std::vector<double> maxent_distribution(std::span<const FeatureVector> pi_features,
                                        const RewardWeights& theta) {
  if (pi_features.empty()) throw Error(ErrorCode::EmptyPolicySet, "empty policy set");
  for (double t : theta.theta) {
    if (!std::isfinite(t)) throw Error(ErrorCode::NonFiniteInput, "non-finite reward weight");
  }
  std::vector<double> logits(pi_features.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pi_features.size(); ++i) {
    double v = 0.0;
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      if (!std::isfinite(pi_features[i][k])) {
        throw Error(ErrorCode::NonFiniteInput, "non-finite PI feature");
      }
      v -= theta[k] * pi_features[i][k];
    }
    logits[i] = v;
    max_logit = std::max(max_logit, v);
  }
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - max_logit);
    z += l;
  }
  for (double& l : logits) l /= z;
  return logits;
}

double log_probability(std::span<const FeatureVector> pi_features, const RewardWeights& theta,
                       std::size_t index) {
  if (index >= pi_features.size()) throw Error(ErrorCode::DimensionMismatch, "index out of range");
  std::vector<double> logits(pi_features.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pi_features.size(); ++i) {
    double v = 0.0;
    for (std::size_t k = 0; k < kFeatureCount; ++k) v -= theta[k] * pi_features[i][k];
    logits[i] = v;
    max_logit = std::max(max_logit, v);
  }
  double z = 0.0;
  for (double l : logits) z += std::exp(l - max_logit);
  return logits[index] - max_logit - std::log(z);
}

FeatureVector expected_features(std::span<const double> probs,
                                std::span<const FeatureVector> pi_features) {
  if (probs.size() != pi_features.size()) {
    throw Error(ErrorCode::DimensionMismatch, "probabilities and feature rows differ in count");
  }
  FeatureVector e{};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    for (std::size_t k = 0; k < kFeatureCount; ++k) e[k] += probs[i] * pi_features[i][k];
  }
  return e;
}

FeatureVector linear_gradient(std::span<const FeatureVector> pi_features, std::size_t demo_index,
                              const RewardWeights& theta) {
  if (demo_index >= pi_features.size()) {
    throw Error(ErrorCode::DimensionMismatch, "demo index out of range");
  }
  const auto p = maxent_distribution(pi_features, theta);
  FeatureVector g = expected_features(p, pi_features);
  for (std::size_t k = 0; k < kFeatureCount; ++k) g[k] -= pi_features[demo_index][k];
  return g;
}

namespace {
std::vector<FeatureVector> raw_features(const PlanningCycle& cycle) {
  std::vector<FeatureVector> f;
  f.reserve(cycle.policies.size());
  for (const auto& p : cycle.policies) f.push_back(p.pi_features);
  return f;
}
}  // namespace

FeatureVector linear_gradient(const PlanningCycle& cycle, const RewardWeights& theta) {
  return linear_gradient(raw_features(cycle), cycle.demo_index, theta);
}

double cycle_log_likelihood(const PlanningCycle& cycle, const RewardWeights& theta) {
  return log_probability(raw_features(cycle), theta, cycle.demo_index);
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw Error(ErrorCode::InvalidSpec, "epochs must be >= 1");
  if (cfg.batch_size < 1) throw Error(ErrorCode::InvalidSpec, "batch_size must be >= 1");
  if (cfg.steps_per_batch < 1) throw Error(ErrorCode::InvalidSpec, "steps_per_batch must be >= 1");
  if (!(cfg.evd_threshold >= 0.0)) throw Error(ErrorCode::InvalidSpec, "evd_threshold must be >= 0");
  if (!(cfg.grad_clip > 0.0)) throw Error(ErrorCode::InvalidSpec, "grad_clip must be > 0");
}

FeatureVector compute_feature_scales(const CycleBuffer& buffer) {
  FeatureVector sum{};
  std::size_t count = 0;
  for (const auto& c : buffer.cycles) {
    for (const auto& p : c.policies) {
      for (std::size_t k = 0; k < kFeatureCount; ++k) sum[k] += p.pi_features[k];
      ++count;
    }
  }
  FeatureVector scales{};
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    scales[k] = (count > 0 ? sum[k] / static_cast<double>(count) : 0.0) + 1e-8;
  }
  return scales;
}

std::vector<FeatureVector> scale_features(std::span<const planner::Policy> policies,
                                          const FeatureVector& scales) {
  std::vector<FeatureVector> out(policies.size());
  for (std::size_t i = 0; i < policies.size(); ++i) {
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      out[i][k] = policies[i].pi_features[k] / scales[k];
    }
  }
  return out;
}

RewardWeights to_raw_weights(const RewardWeights& scaled_theta, const FeatureVector& scales) {
  RewardWeights raw;
  for (std::size_t k = 0; k < kFeatureCount; ++k) raw[k] = scaled_theta[k] / scales[k];
  return raw;
}

namespace detail {

std::vector<ScaledCycle> scale_buffer(const CycleBuffer& buffer, const FeatureVector& scales) {
  std::vector<ScaledCycle> out(buffer.cycles.size());
  for (std::size_t i = 0; i < buffer.cycles.size(); ++i) {
    out[i].features = scale_features(buffer.cycles[i].policies, scales);
    out[i].demo = buffer.cycles[i].demo_index;
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

double norm(const FeatureVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void clip_norm(FeatureVector& v, double clip) {
  const double n = norm(v);
  if (n > clip) {
    for (double& x : v) x *= clip / n;
  }
}

std::uint64_t init_stream(std::uint64_t seed, std::size_t cluster) {
  return mix_seed(seed, 0x1417 + cluster);
}

std::uint64_t shuffle_stream(std::uint64_t seed) { return mix_seed(seed, 0x5aff); }
std::uint64_t cluster_stream(std::uint64_t seed) { return mix_seed(seed, 0xc105); }

}  // namespace detail

namespace {

FeatureVector batch_gradient(const std::vector<detail::ScaledCycle>& cycles,
                             std::span<const std::size_t> batch, const RewardWeights& theta) {
  std::vector<FeatureVector> per(batch.size());
  parallel_for(batch.size(), [&](std::size_t b) {
    const auto& c = cycles[batch[b]];
    per[b] = linear_gradient(c.features, c.demo, theta);
  });
  FeatureVector g{};
  for (const auto& p : per) {
    for (std::size_t k = 0; k < kFeatureCount; ++k) g[k] += p[k];
  }
  for (double& x : g) x /= static_cast<double>(batch.size());
  return g;
}

EpochLog epoch_summary(std::size_t epoch, const CycleBuffer& buffer, const DistanceTable& distances,
                       const LinearModel& model, double grad_norm) {
  const std::vector<RewardWeights> thetas(buffer.cycles.size(), model.planner_weights());
  const auto s = eval::summarize(buffer, distances, thetas);
  return {epoch, s.mean_ed, s.mean_evd, grad_norm};
}

}  // namespace

LinearTrainResult train_linear(const CycleBuffer& buffer, const TrainConfig& cfg,
                               const DistanceTable& distances) {
  validate(cfg);
  if (buffer.cycles.empty()) throw Error(ErrorCode::EmptyBuffer, "no cycles to train on");
  LinearTrainResult result;
  result.model.feature_scales = compute_feature_scales(buffer);
  result.model.theta =
      demo::draw_initial_weights(detail::init_stream(cfg.seed, 0), cfg.init_low, cfg.init_high);
  const auto cycles = detail::scale_buffer(buffer, result.model.feature_scales);

  std::vector<std::size_t> all(cycles.size());
  std::iota(all.begin(), all.end(), 0);
  result.log.push_back(epoch_summary(0, buffer, distances, result.model,
                                     detail::norm(batch_gradient(cycles, all, result.model.theta))));

  Rng shuffle_rng(detail::shuffle_stream(cfg.seed));
  auto& theta = result.model.theta;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double norm_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& batch : detail::make_batches(cycles.size(), cfg.batch_size, shuffle_rng)) {
      for (std::size_t s = 0; s < cfg.steps_per_batch; ++s) {
        FeatureVector g = batch_gradient(cycles, batch, theta);
        for (std::size_t k = 0; k < kFeatureCount; ++k) g[k] -= 2.0 * cfg.l2 * theta[k];
        norm_sum += detail::norm(g);
        ++steps;
        detail::clip_norm(g, cfg.grad_clip);
        for (std::size_t k = 0; k < kFeatureCount; ++k) theta[k] += cfg.learning_rate * g[k];
      }
    }
    result.log.push_back(epoch_summary(epoch, buffer, distances, result.model,
                                       norm_sum / static_cast<double>(steps)));
    if (result.log.back().mean_evd < cfg.evd_threshold) break;
  }
  return result;
}

std::string serialize_model(const LinearModel& model) {
  io::JsonWriter w;
  w.begin_object();
  w.key("version").value(io::kFormatVersion);
  w.key("kind").value("linear");
  w.key("theta").array(model.theta.theta);
  w.key("feature_scales").array(model.feature_scales);
  w.end_object();
  return w.take() + "\n";
}

LinearModel parse_linear_model(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("linear model: ") + e.what());
  }
  io::check_version(j.value("version", std::int64_t{-1}), "linear model");
  if (j.value("kind", std::string()) != "linear") {
    throw Error(ErrorCode::ConfigParse, "model kind is not linear");
  }
  LinearModel m;
  try {
    const auto& t = j.at("theta");
    const auto& s = j.at("feature_scales");
    if (t.size() != kFeatureCount || s.size() != kFeatureCount) {
      throw Error(ErrorCode::DimensionMismatch, "linear model needs 15 weights and scales");
    }
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      m.theta[k] = t[k].get<double>();
      m.feature_scales[k] = s[k].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("linear model: ") + e.what());
  }
  return m;
}

std::string serialize_log(std::span<const EpochLog> log) {
  std::string out = io::csv_version_line();
  out += "epoch,mean_ed,mean_evd,grad_norm\n";
  for (const auto& e : log) {
    auto fmt = [](double v) { return std::isnan(v) ? std::string("nan") : io::format_double(v); };
    out += std::to_string(e.epoch) + "," + fmt(e.mean_ed) + "," + fmt(e.mean_evd) + "," +
           fmt(e.grad_norm) + "\n";
  }
  return out;
}

}  // namespace pi_irl::irl
