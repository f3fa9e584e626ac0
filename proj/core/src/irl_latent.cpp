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

#include "pi_irl/irl_latent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "pi_irl/eval.hpp"
#include "pi_irl/text_io.hpp"

namespace pi_irl::irl {

void validate(const ClusterModel& model) {
  if (model.C < 1) throw Error(ErrorCode::InvalidSpec, "cluster model needs C >= 1");
  if (model.thetas.size() != model.C || model.prior.size() != model.C) {
    throw Error(ErrorCode::InvalidSpec, "cluster model shapes disagree with C");
  }
  double sum = 0.0;
  for (double p : model.prior) {
    if (!(p >= 0.0)) throw Error(ErrorCode::InvalidSpec, "negative cluster prior");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidSpec, "cluster prior does not sum to 1");
  for (double s : model.feature_scales) {
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidSpec, "feature scales must be positive");
  }
}

Responsibilities e_step(std::span<const FeatureVector> pi_features, std::size_t demo_index,
                        std::span<const RewardWeights> thetas, std::span<const double> prior) {
  if (thetas.size() != prior.size() || thetas.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "one prior entry per cluster required");
  }
  const std::size_t C = thetas.size();
  std::vector<double> logw(C);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < C; ++c) {
    logw[c] = prior[c] > 0.0 ? log_probability(pi_features, thetas[c], demo_index) + std::log(prior[c])
                             : -std::numeric_limits<double>::infinity();
    best = std::max(best, logw[c]);
  }
  if (!std::isfinite(best)) throw Error(ErrorCode::InvalidSpec, "no cluster has positive prior");
  Responsibilities r;
  r.beta.resize(C);
  double z = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    r.beta[c] = std::exp(logw[c] - best);
    z += r.beta[c];
  }
  for (double& b : r.beta) b /= z;
  return r;
}

Responsibilities e_step(const PlanningCycle& cycle, const ClusterModel& model) {
  validate(model);
  const auto f = scale_features(cycle.policies, model.feature_scales);
  return e_step(f, cycle.demo_index, model.thetas, model.prior);
}

std::vector<double> m_step_prior(std::span<const Responsibilities> batch) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "prior update needs at least one demonstration");
  std::vector<double> psi(batch.front().beta.size(), 0.0);
  for (const auto& r : batch) {
    if (r.beta.size() != psi.size()) throw Error(ErrorCode::DimensionMismatch, "ragged responsibilities");
    for (std::size_t c = 0; c < psi.size(); ++c) psi[c] += r.beta[c];
  }
  for (double& p : psi) p /= static_cast<double>(batch.size());
  return psi;
}

FeatureVector latent_gradient(std::span<const FeatureVector> pi_features, std::size_t demo_index,
                              const RewardWeights& theta_c, double beta_c) {
  if (!(beta_c >= 0.0 && beta_c <= 1.0)) throw Error(ErrorCode::InvalidSpec, "beta must lie in [0, 1]");
  FeatureVector g = linear_gradient(pi_features, demo_index, theta_c);
  for (double& x : g) x *= beta_c;
  return g;
}

FeatureVector latent_gradient(const PlanningCycle& cycle, const RewardWeights& theta_c, double beta_c) {
  std::vector<FeatureVector> f;
  f.reserve(cycle.policies.size());
  for (const auto& p : cycle.policies) f.push_back(p.pi_features);
  return latent_gradient(f, cycle.demo_index, theta_c, beta_c);
}

namespace {

double objective_scaled(const std::vector<detail::ScaledCycle>& cycles, const ClusterModel& model) {
  std::vector<double> per(cycles.size());
  parallel_for(cycles.size(), [&](std::size_t i) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(model.C);
    for (std::size_t c = 0; c < model.C; ++c) {
      terms[c] = model.prior[c] > 0.0
                     ? log_probability(cycles[i].features, model.thetas[c], cycles[i].demo) +
                           std::log(model.prior[c])
                     : -std::numeric_limits<double>::infinity();
      best = std::max(best, terms[c]);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - best);
    per[i] = best + std::log(s);
  });
  return std::accumulate(per.begin(), per.end(), 0.0);
}

std::vector<Responsibilities> e_step_all(const std::vector<detail::ScaledCycle>& cycles,
                                         const ClusterModel& model) {
  std::vector<Responsibilities> out(cycles.size());
  parallel_for(cycles.size(), [&](std::size_t i) {
    out[i] = e_step(cycles[i].features, cycles[i].demo, model.thetas, model.prior);
  });
  return out;
}

EpochLog epoch_summary(std::size_t epoch, const CycleBuffer& buffer, const DistanceTable& distances,
                       const ClusterModel& model, const std::vector<Responsibilities>& resp,
                       double grad_norm) {
  std::vector<RewardWeights> thetas(buffer.cycles.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) thetas[i] = mix_weights(model, resp[i].beta);
  const auto s = eval::summarize(buffer, distances, thetas);
  return {epoch, s.mean_ed, s.mean_evd, grad_norm};
}

}  // namespace

double em_objective(const CycleBuffer& buffer, const ClusterModel& model) {
  validate(model);
  return objective_scaled(detail::scale_buffer(buffer, model.feature_scales), model);
}

RewardWeights mix_weights(const ClusterModel& model, std::span<const double> beta) {
  if (beta.size() != model.C) throw Error(ErrorCode::DimensionMismatch, "one beta per cluster required");
  RewardWeights mix;
  for (std::size_t c = 0; c < model.C; ++c) {
    for (std::size_t k = 0; k < kFeatureCount; ++k) mix[k] += beta[c] * model.thetas[c][k];
  }
  return to_raw_weights(mix, model.feature_scales);
}

RewardWeights infer_mixture(const PlanningCycle* previous, const ClusterModel& model) {
  validate(model);
  if (previous == nullptr) return mix_weights(model, model.prior);
  if (previous->selected_index >= previous->policies.size()) {
    throw Error(ErrorCode::EmptyPolicySet, "previous cycle has no optimal policy");
  }
  const auto f = scale_features(previous->policies, model.feature_scales);
  const auto r = e_step(f, previous->selected_index, model.thetas, model.prior);
  return mix_weights(model, r.beta);
}

namespace {

constexpr double kMinBatchMass = 1e-12;

FeatureVector unit_gap(const detail::ScaledCycle& cycle) {
  FeatureVector g{};
  const double inv = 1.0 / static_cast<double>(cycle.features.size());
  for (const auto& f : cycle.features) {
    for (std::size_t k = 0; k < kFeatureCount; ++k) g[k] += f[k] * inv;
  }
  for (std::size_t k = 0; k < kFeatureCount; ++k) g[k] -= cycle.features[cycle.demo][k];
  const double n = detail::norm(g);
  if (n > 0.0) {
    for (double& x : g) x /= n;
  }
  return g;
}

std::size_t nearest(const FeatureVector& g, const std::vector<FeatureVector>& centers) {
  std::size_t best = 0;
  double best_cos = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double cs = dot(g, centers[c]);
    if (cs > best_cos) {
      best_cos = cs;
      best = c;
    }
  }
  return best;
}

}  // namespace

std::vector<std::size_t> gap_clusters(std::span<const detail::ScaledCycle> cycles, std::size_t C,
                                      std::uint64_t seed, std::size_t max_iterations) {
  if (C < 1) throw Error(ErrorCode::InvalidSpec, "C must be >= 1");
  if (cycles.empty()) throw Error(ErrorCode::EmptyBuffer, "no cycles to cluster");
  const std::size_t n = cycles.size();
  std::vector<std::size_t> labels(n, 0);
  if (C == 1) return labels;

  std::vector<FeatureVector> gaps(n);
  parallel_for(n, [&](std::size_t i) { gaps[i] = unit_gap(cycles[i]); });

  // k-means++ on cosine distance.
  Rng rng(seed);
  std::vector<FeatureVector> centers;
  centers.push_back(gaps[rng.index(n)]);
  std::vector<double> d2(n);
  while (centers.size() < C) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, std::max(0.0, 1.0 - dot(gaps[i], c)));
      d2[i] = best * best;
      total += d2[i];
    }
    if (!(total > 0.0)) {
      centers.push_back(gaps[rng.index(n)]);
      continue;
    }
    double u = rng.uniform(0.0, total);
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      u -= d2[i];
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(gaps[pick]);
  }

  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto l = nearest(gaps[i], centers);
      if (l != labels[i]) changed = true;
      labels[i] = l;
    }
    if (!changed) break;
    std::vector<FeatureVector> sums(C, FeatureVector{});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kFeatureCount; ++k) sums[labels[i]][k] += gaps[i][k];
    }
    for (std::size_t c = 0; c < C; ++c) {
      const double len = detail::norm(sums[c]);
      if (len > 0.0) {
        for (std::size_t k = 0; k < kFeatureCount; ++k) centers[c][k] = sums[c][k] / len;
      }
      // an emptied cluster keeps its previous center
    }
  }
  return labels;
}

LatentTrainResult train_latent(const CycleBuffer& buffer, std::size_t C, const TrainConfig& cfg,
                               const LatentConfig& latent, const DistanceTable& distances) {
  validate(cfg);
  if (C < 1) throw Error(ErrorCode::InvalidSpec, "C must be >= 1");
  if (latent.m_steps < 1) throw Error(ErrorCode::InvalidSpec, "m_steps must be >= 1");
  if (buffer.cycles.empty()) throw Error(ErrorCode::EmptyBuffer, "no cycles to train on");

  LatentTrainResult result;
  ClusterModel& model = result.model;
  model.C = C;
  model.feature_scales = compute_feature_scales(buffer);
  model.prior.assign(C, 1.0 / static_cast<double>(C));
  for (std::size_t c = 0; c < C; ++c) {
    model.thetas.push_back(
        demo::draw_initial_weights(detail::init_stream(cfg.seed, c), latent.init_low, latent.init_high));
  }
  const auto cycles = detail::scale_buffer(buffer, model.feature_scales);
  const std::size_t n = cycles.size();

  std::vector<Responsibilities> resp;
  const bool seeded = latent.start == LatentStart::GapClusters && C > 1;
  bool held = seeded;
  if (seeded) {
    const auto labels = gap_clusters(cycles, C, detail::cluster_stream(cfg.seed));
    resp.assign(n, Responsibilities{std::vector<double>(C, 0.0)});
    for (std::size_t i = 0; i < n; ++i) resp[i].beta[labels[i]] = 1.0;
  } else {
    resp = e_step_all(cycles, model);
  }
  {
    double g0 = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      FeatureVector g{};
      for (std::size_t i = 0; i < n; ++i) {
        const auto gi = latent_gradient(cycles[i].features, cycles[i].demo, model.thetas[c], resp[i].beta[c]);
        for (std::size_t k = 0; k < kFeatureCount; ++k) g[k] += gi[k] / static_cast<double>(n);
      }
      g0 += detail::norm(g);
    }
    result.log.push_back({epoch_summary(0, buffer, distances, model, resp, g0 / static_cast<double>(C)),
                          model.prior, 0});
  }

  Rng shuffle_rng(detail::shuffle_stream(cfg.seed));
  std::vector<std::size_t> low_epochs(C, 0);
  std::size_t reseed_draws = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    model.prior = m_step_prior(resp);
    const auto batches = detail::make_batches(n, cfg.batch_size, shuffle_rng);
    double norm_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t c = 0; c < C; ++c) {
      auto& theta = model.thetas[c];
      for (const auto& batch : batches) {
        for (std::size_t s = 0; s < latent.m_steps; ++s) {
          std::vector<FeatureVector> per(batch.size());
          parallel_for(batch.size(), [&](std::size_t b) {
            const auto i = batch[b];
            per[b] = latent_gradient(cycles[i].features, cycles[i].demo, theta, resp[i].beta[c]);
          });
          FeatureVector g{};
          for (const auto& p : per) {
            for (std::size_t k = 0; k < kFeatureCount; ++k) g[k] += p[k];
          }
          // Responsibility-weighted mean: a sparsely occupied cluster still moves at full rate.
          double mass = 0.0;
          for (const auto i : batch) mass += resp[i].beta[c];
          const double denom = mass > kMinBatchMass ? mass : 1.0;
          for (double& x : g) x /= denom;
          for (std::size_t k = 0; k < kFeatureCount; ++k) g[k] -= 2.0 * cfg.l2 * theta[k];
          norm_sum += detail::norm(g);
          ++steps;
          detail::clip_norm(g, cfg.grad_clip);
          for (std::size_t k = 0; k < kFeatureCount; ++k) theta[k] += cfg.learning_rate * g[k];
        }
      }
    }

    std::size_t reseeded = 0;
    if (C > 1) {
      for (std::size_t c = 0; c < C; ++c) {
        low_epochs[c] = model.prior[c] < latent.collapse_prior ? low_epochs[c] + 1 : 0;
        if (low_epochs[c] >= latent.collapse_epochs) {
          model.thetas[c] = demo::draw_initial_weights(detail::init_stream(cfg.seed, C + reseed_draws++),
                                                       latent.init_low, latent.init_high);
          model.prior[c] = 1.0 / static_cast<double>(C);
          low_epochs[c] = 0;
          ++reseeded;
        }
      }
      if (reseeded > 0) {
        const double z = std::accumulate(model.prior.begin(), model.prior.end(), 0.0);
        for (double& p : model.prior) p /= z;
      }
    }

    held = seeded && epoch <= latent.warmup_epochs;
    if (!held) resp = e_step_all(cycles, model);
    result.log.push_back({epoch_summary(epoch, buffer, distances, model, resp,
                                        norm_sum / static_cast<double>(steps)),
                          model.prior, reseeded});
    if (result.log.back().stats.mean_evd < cfg.evd_threshold) break;
  }
  if (held) resp = e_step_all(cycles, model);
  result.responsibilities = std::move(resp);
  return result;
}

std::string serialize_model(const ClusterModel& model) {
  io::JsonWriter w;
  w.begin_object();
  w.key("version").value(io::kFormatVersion);
  w.key("kind").value("latent");
  w.key("C").value(static_cast<std::uint64_t>(model.C));
  w.key("thetas").begin_array();
  for (const auto& t : model.thetas) w.array(t.theta);
  w.end_array();
  w.key("prior").array(model.prior);
  w.key("feature_scales").array(model.feature_scales);
  w.end_object();
  return w.take() + "\n";
}

ClusterModel parse_latent_model(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("latent model: ") + e.what());
  }
  io::check_version(j.value("version", std::int64_t{-1}), "latent model");
  if (j.value("kind", std::string()) != "latent") throw Error(ErrorCode::ConfigParse, "model kind is not latent");
  ClusterModel m;
  try {
    m.C = j.at("C").get<std::size_t>();
    const auto& th = j.at("thetas");
    if (th.size() != m.C) throw Error(ErrorCode::DimensionMismatch, "latent model needs C weight vectors");
    for (const auto& row : th) {
      if (row.size() != kFeatureCount) throw Error(ErrorCode::DimensionMismatch, "cluster weights need 15 entries");
      RewardWeights t;
      for (std::size_t k = 0; k < kFeatureCount; ++k) t[k] = row[k].get<double>();
      m.thetas.push_back(t);
    }
    m.prior = j.at("prior").get<std::vector<double>>();
    const auto& s = j.at("feature_scales");
    if (s.size() != kFeatureCount) throw Error(ErrorCode::DimensionMismatch, "latent model needs 15 scales");
    for (std::size_t k = 0; k < kFeatureCount; ++k) m.feature_scales[k] = s[k].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("latent model: ") + e.what());
  }
  validate(m);
  return m;
}

std::string serialize_log(std::span<const LatentEpochLog> log) {
  auto fmt = [](double v) { return std::isnan(v) ? std::string("nan") : io::format_double(v); };
  std::string out = io::csv_version_line();
  out += "epoch,mean_ed,mean_evd,grad_norm,reseeded";
  const std::size_t C = log.empty() ? 0 : log.front().prior.size();
  for (std::size_t c = 0; c < C; ++c) out += ",psi_" + std::to_string(c);
  out += "\n";
  for (const auto& e : log) {
    out += std::to_string(e.stats.epoch) + "," + fmt(e.stats.mean_ed) + "," + fmt(e.stats.mean_evd) + "," +
           fmt(e.stats.grad_norm) + "," + std::to_string(e.reseeded);
    for (double p : e.prior) out += "," + fmt(p);
    out += "\n";
  }
  return out;
}

}  // namespace pi_irl::irl
