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

#include "pi_irl/irl_deep.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "pi_irl/eval.hpp"
#include "pi_irl/text_io.hpp"

namespace pi_irl::irl {

namespace {

constexpr std::size_t kEvalChunk = 32;

std::vector<FeatureVector> raw_features(const PlanningCycle& cycle) {
  std::vector<FeatureVector> f;
  f.reserve(cycle.policies.size());
  for (const auto& p : cycle.policies) f.push_back(p.pi_features);
  return f;
}

double flat_norm(const nn::NetworkParams& g) {
  double s = 0.0;
  for (const auto& t : nn::tensors(g)) {
    for (double x : t) s += x * x;
  }
  return std::sqrt(s);
}

}  // namespace

void validate(const DeepModel& model) {
  for (double s : model.feature_scales) {
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidSpec, "input scales must be positive");
  }
  if (model.history < 1) throw Error(ErrorCode::InvalidSpec, "history size must be >= 1");
  if (model.p_fix != nn::kPolicyRows) throw Error(ErrorCode::InvalidSpec, "P_fix must match the network");
  if (model.ordering != kOrderingRule) throw Error(ErrorCode::InvalidSpec, "unknown policy ordering rule");
}

InputScales compute_input_scales(const CycleBuffer& buffer) {
  InputScales sum{};
  std::size_t n = 0;
  for (const auto& c : buffer.cycles) {
    for (const auto& p : c.policies) {
      for (std::size_t k = 0; k < kFeatureCount; ++k) sum[k] += std::abs(p.pi_features[k]);
      const auto a = planner::action_vector(p.controls);
      for (std::size_t k = 0; k < kActionCount; ++k) sum[kFeatureCount + k] += std::abs(a[k]);
      ++n;
    }
  }
  InputScales s{};
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = (n > 0 ? sum[k] / static_cast<double>(n) : 0.0) + 1e-8;
  return s;
}

nn::CycleInput prepare_network_input(const PlanningCycle& cycle, const DeepModel& model) {
  const auto& pol = cycle.policies;
  if (pol.empty()) throw Error(ErrorCode::EmptyPolicySet, "cycle has no policies");
  std::vector<double> value(pol.size());
  for (std::size_t i = 0; i < pol.size(); ++i) {
    double v = 0.0;
    for (std::size_t k = 0; k < kFeatureCount; ++k) v -= cycle.gen_weights[k] * pol[i].pi_features[k];
    value[i] = v;
  }
  std::vector<std::size_t> order(pol.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (value[a] != value[b]) return value[a] > value[b];
    return pol[a].id < pol[b].id;
  });
  nn::CycleInput in;
  in.values.resize(nn::kPolicyRows * nn::kInputColumns);
  for (std::size_t r = 0; r < nn::kPolicyRows; ++r) {
    const auto& p = pol[order[r % order.size()]];
    double* row = in.values.data() + r * nn::kInputColumns;
    for (std::size_t k = 0; k < kFeatureCount; ++k) row[k] = p.pi_features[k] / model.feature_scales[k];
    const auto a = planner::action_vector(p.controls);
    for (std::size_t k = 0; k < kActionCount; ++k) {
      row[kFeatureCount + k] = a[k] / model.feature_scales[kFeatureCount + k];
    }
  }
  return in;
}

RewardWeights predict(const DeepModel& model, const PlanningCycle& cycle) {
  RewardWeights t;
  t.theta = nn::forward(model.params, prepare_network_input(cycle, model));
  return t;
}

DeepGradient deep_gradient(const PlanningCycle& cycle, const DeepModel& model) {
  const auto input = prepare_network_input(cycle, model);
  auto fwd = nn::forward(model.params, std::span<const nn::CycleInput>(&input, 1));
  DeepGradient out;
  out.theta.theta = fwd.outputs.front();
  out.seed = linear_gradient(raw_features(cycle), cycle.demo_index, out.theta);
  out.grads = nn::backward(model.params, fwd.cache, std::span<const FeatureVector>(&out.seed, 1));
  return out;
}

namespace {

std::vector<RewardWeights> predict_all(const nn::NetworkParams& params,
                                       const std::vector<nn::CycleInput>& inputs) {
  std::vector<RewardWeights> out(inputs.size());
  for (std::size_t start = 0; start < inputs.size(); start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, inputs.size() - start);
    const auto res = nn::forward(params, std::span<const nn::CycleInput>(inputs.data() + start, n));
    for (std::size_t i = 0; i < n; ++i) out[start + i].theta = res.outputs[i];
  }
  return out;
}

}  // namespace

DeepTrainResult train_deep(const CycleBuffer& buffer, const TrainConfig& cfg, const DistanceTable& distances,
                           std::size_t history) {
  validate(cfg);
  if (buffer.cycles.empty()) throw Error(ErrorCode::EmptyBuffer, "no cycles to train on");
  DeepTrainResult result;
  DeepModel& model = result.model;
  model.history = history;
  model.feature_scales = compute_input_scales(buffer);
  model.params = nn::init_params(mix_seed(cfg.seed, 0xdee9));
  validate(model);

  const std::size_t n = buffer.cycles.size();
  std::vector<nn::CycleInput> inputs(n);
  std::vector<std::vector<FeatureVector>> features(n);
  for (std::size_t i = 0; i < n; ++i) {
    inputs[i] = prepare_network_input(buffer.cycles[i], model);
    features[i] = raw_features(buffer.cycles[i]);
  }

  auto log_epoch = [&](std::size_t epoch, double grad_norm) {
    const auto thetas = predict_all(model.params, inputs);
    const auto s = eval::summarize(buffer, distances, thetas);
    result.log.push_back({epoch, s.mean_ed, s.mean_evd, grad_norm});
  };
  log_epoch(0, 0.0);

  auto opt = nn::make_optimizer(model.params, cfg.learning_rate);
  Rng shuffle_rng(detail::shuffle_stream(cfg.seed));
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double norm_sum = 0.0;
    std::size_t batches = 0;
    for (const auto& batch : detail::make_batches(n, cfg.batch_size, shuffle_rng)) {
      std::vector<nn::CycleInput> bin;
      bin.reserve(batch.size());
      for (std::size_t i : batch) bin.push_back(inputs[i]);
      auto fwd = nn::forward(model.params, bin);
      std::vector<FeatureVector> seeds(batch.size());
      const double inv = 1.0 / static_cast<double>(batch.size());
      parallel_for(batch.size(), [&](std::size_t b) {
        const std::size_t i = batch[b];
        RewardWeights theta;
        theta.theta = fwd.outputs[b];
        seeds[b] = linear_gradient(features[i], buffer.cycles[i].demo_index, theta);
        for (double& x : seeds[b]) x *= inv;
      });
      const auto grads = nn::backward(model.params, fwd.cache, seeds);
      norm_sum += flat_norm(grads);
      ++batches;
      nn::apply_update(model.params, grads, opt);
      ++result.updates;
    }
    log_epoch(epoch, norm_sum / static_cast<double>(batches));
    if (result.log.back().mean_evd < cfg.evd_threshold) break;
  }
  return result;
}

WeightHistory::WeightHistory(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 1) throw Error(ErrorCode::InvalidSpec, "history size must be >= 1");
}

void WeightHistory::push(const RewardWeights& theta) {
  items_.push_back(theta);
  while (items_.size() > capacity_) items_.pop_front();
}

RewardWeights WeightHistory::mean() const {
  if (items_.empty()) throw Error(ErrorCode::EmptyInput, "weight history is empty");
  RewardWeights m;
  for (const auto& t : items_) {
    for (std::size_t k = 0; k < kFeatureCount; ++k) m[k] += t[k];
  }
  for (double& x : m.theta) x /= static_cast<double>(items_.size());
  return m;
}

RewardWeights smooth_inference(WeightHistory& history, const PlanningCycle& cycle, const DeepModel& model) {
  history.push(predict(model, cycle));
  return history.mean();
}

DeepRewardProvider::DeepRewardProvider(const DeepModel& model, const RewardWeights& initial)
    : model_(model), initial_(initial), history_(model.history) {
  validate(model);
}

RewardWeights DeepRewardProvider::next_weights(const PlanningCycle* previous) {
  if (previous == nullptr) return initial_;
  return smooth_inference(history_, *previous, model_);
}

std::string serialize_model(const DeepModel& model) {
  io::JsonWriter w;
  w.begin_object();
  w.key("version").value(io::kFormatVersion);
  w.key("kind").value("deep");
  w.key("layers").begin_array();
  for (const auto& c : model.params.conv) {
    w.begin_object();
    w.key("type").value("conv");
    w.key("in").value(static_cast<std::uint64_t>(c.in_channels));
    w.key("out").value(static_cast<std::uint64_t>(c.out_channels));
    w.key("kernel").value(static_cast<std::uint64_t>(nn::kKernel));
    w.end_object();
  }
  for (const auto& d : model.params.dense) {
    w.begin_object();
    w.key("type").value("dense");
    w.key("in").value(static_cast<std::uint64_t>(d.in));
    w.key("out").value(static_cast<std::uint64_t>(d.out));
    w.end_object();
  }
  w.end_array();
  w.key("feature_scales").array(model.feature_scales);
  w.key("ordering").value(model.ordering);
  w.key("p_fix").value(static_cast<std::uint64_t>(model.p_fix));
  w.key("h").value(static_cast<std::uint64_t>(model.history));
  w.key("params").begin_array();
  for (const auto& t : nn::tensors(model.params)) w.array(t);
  w.end_array();
  w.end_object();
  return w.take() + "\n";
}

DeepModel parse_deep_model(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("deep model: ") + e.what());
  }
  io::check_version(j.value("version", std::int64_t{-1}), "deep model");
  if (j.value("kind", std::string()) != "deep") throw Error(ErrorCode::ConfigParse, "model kind is not deep");
  DeepModel m;
  m.params = nn::zero_params();
  try {
    const auto& layers = j.at("layers");
    if (layers.size() != m.params.conv.size() + m.params.dense.size()) {
      throw Error(ErrorCode::ShapeMismatch, "deep model layer count differs");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const bool conv = l < m.params.conv.size();
      const auto& L = layers[l];
      const std::size_t in = conv ? m.params.conv[l].in_channels : m.params.dense[l - m.params.conv.size()].in;
      const std::size_t out = conv ? m.params.conv[l].out_channels : m.params.dense[l - m.params.conv.size()].out;
      if (L.at("type").get<std::string>() != (conv ? "conv" : "dense") || L.at("in").get<std::size_t>() != in ||
          L.at("out").get<std::size_t>() != out) {
        throw Error(ErrorCode::ShapeMismatch, "deep model layer " + std::to_string(l) + " has the wrong shape");
      }
    }
    const auto& s = j.at("feature_scales");
    if (s.size() != nn::kInputColumns) throw Error(ErrorCode::ShapeMismatch, "deep model needs 23 scales");
    for (std::size_t k = 0; k < nn::kInputColumns; ++k) m.feature_scales[k] = s[k].get<double>();
    m.ordering = j.at("ordering").get<std::string>();
    m.p_fix = j.at("p_fix").get<std::size_t>();
    m.history = j.at("h").get<std::size_t>();
    const auto& params = j.at("params");
    auto ts = nn::tensors(m.params);
    if (params.size() != ts.size()) throw Error(ErrorCode::ShapeMismatch, "deep model tensor count differs");
    for (std::size_t t = 0; t < ts.size(); ++t) {
      const auto& arr = params[t];
      if (arr.size() != ts[t].size()) throw Error(ErrorCode::ShapeMismatch, "deep model tensor size differs");
      for (std::size_t i = 0; i < ts[t].size(); ++i) ts[t][i] = arr[i].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("deep model: ") + e.what());
  }
  nn::validate(m.params);
  validate(m);
  return m;
}

}  // namespace pi_irl::irl
