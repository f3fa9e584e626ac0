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

#include "pi_irl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pi_irl/text_io.hpp"

namespace pi_irl::eval {

double trajectory_distance(const Trajectory& zeta, std::span<const VehicleState> states, double w_yaw) {
  std::vector<double> terms;
  terms.reserve(states.size());
  for (const auto& s : states) {
    const auto idx = zeta.index_at(s.time);
    if (!idx) continue;
    const auto& z = zeta.samples[*idx];
    const double c = std::cos(z.heading);
    const double sn = std::sin(z.heading);
    const double dx = s.x - z.x;
    const double dy = s.y - z.y;
    const double lon = c * dx + sn * dy;
    const double lat = -sn * dx + c * dy;
    const double yaw = wrap_angle(s.heading - z.heading);
    terms.push_back(std::sqrt(lon * lon + lat * lat) + w_yaw * yaw * yaw);
  }
  if (terms.empty()) throw Error(ErrorCode::NoOverlap, "trajectory and policy share no samples");
  if (terms.size() == 1) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    sum += ((i == 0 || i + 1 == terms.size()) ? 0.5 : 1.0) * terms[i];
  }
  return sum * zeta.dt;
}

double trajectory_distance(const Trajectory& zeta, const planner::Policy& policy, double w_yaw) {
  return trajectory_distance(zeta, policy.states, w_yaw);
}

double expected_distance(std::span<const double> probs, std::span<const double> distances) {
  if (probs.size() != distances.size()) {
    throw Error(ErrorCode::DimensionMismatch, "probabilities and distances differ in count");
  }
  double ed = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) ed += probs[i] * distances[i];
  return ed;
}

std::vector<double> cycle_distances(const PlanningCycle& cycle, const Trajectory& zeta,
                                    const track::TrackEnvironment& env,
                                    const planner::PlannerConfig& cfg, double w_yaw) {
  const auto traces = demo::regenerate_traces(cycle, env, cfg);
  std::vector<double> d(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) d[i] = trajectory_distance(zeta, traces[i], w_yaw);
  return d;
}

namespace {
std::vector<FeatureVector> features_of(const PlanningCycle& cycle) {
  std::vector<FeatureVector> f;
  f.reserve(cycle.policies.size());
  for (const auto& p : cycle.policies) f.push_back(p.pi_features);
  return f;
}
}  // namespace

double expected_distance(const PlanningCycle& cycle, const RewardWeights& theta, const Trajectory& zeta,
                         const track::TrackEnvironment& env, const planner::PlannerConfig& cfg,
                         double w_yaw) {
  const auto probs = irl::maxent_distribution(features_of(cycle), theta);
  return expected_distance(probs, cycle_distances(cycle, zeta, env, cfg, w_yaw));
}

irl::DistanceTable distance_table(const demo::CycleBuffer& buffer, std::span<const Trajectory> experts,
                                  double w_yaw) {
  if (experts.size() < buffer.segments.size()) {
    throw Error(ErrorCode::MissingInput, "one expert trajectory per segment required");
  }
  std::vector<std::optional<track::TrackEnvironment>> envs(buffer.segments.size());
  for (const auto& c : buffer.cycles) {
    if (!envs[c.segment_index]) envs[c.segment_index] = track::build_track(buffer.segments[c.segment_index].track);
  }
  irl::DistanceTable table(buffer.cycles.size());
  parallel_for(buffer.cycles.size(), [&](std::size_t i) {
    const auto& c = buffer.cycles[i];
    table[i] = cycle_distances(c, experts[c.segment_index], *envs[c.segment_index], buffer.planner, w_yaw);
  });
  return table;
}

double expected_value_difference(std::span<const FeatureVector> pi_features, const RewardWeights& theta,
                                 const RewardWeights& theta_star) {
  const std::size_t best_star = planner::optimal_policy(pi_features, theta_star);
  const std::size_t best = planner::optimal_policy(pi_features, theta);
  const double diff = planner::policy_value(pi_features[best_star], theta_star) -
                      planner::policy_value(pi_features[best], theta_star);
  return std::max(0.0, diff);
}

double expected_value_difference(const PlanningCycle& cycle, const RewardWeights& theta,
                                 const RewardWeights& theta_star) {
  return expected_value_difference(features_of(cycle), theta, theta_star);
}

const RewardWeights& ground_truth(const demo::CycleBuffer& buffer, const PlanningCycle& cycle) {
  if (cycle.segment_index >= buffer.segments.size() ||
      !buffer.segments[cycle.segment_index].has_theta_star) {
    throw Error(ErrorCode::MissingGroundTruth, "no ground-truth weights for the cycle's segment");
  }
  return buffer.segments[cycle.segment_index].theta_star;
}

EdEvd summarize(const demo::CycleBuffer& buffer, const irl::DistanceTable& distances,
                std::span<const RewardWeights> raw_thetas) {
  const std::size_t n = buffer.cycles.size();
  if (raw_thetas.size() != n) throw Error(ErrorCode::DimensionMismatch, "one theta per cycle required");
  const bool have_d = distances.size() == n;
  bool have_gt = n > 0;
  for (const auto& c : buffer.cycles) {
    if (c.segment_index >= buffer.segments.size() || !buffer.segments[c.segment_index].has_theta_star) {
      have_gt = false;
    }
  }
  std::vector<double> ed(n, 0.0);
  std::vector<double> evd(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const auto& c = buffer.cycles[i];
    const auto f = features_of(c);
    if (have_d) ed[i] = expected_distance(irl::maxent_distribution(f, raw_thetas[i]), distances[i]);
    if (have_gt) evd[i] = expected_value_difference(f, raw_thetas[i], ground_truth(buffer, c));
  });
  EdEvd out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double sed = 0.0;
  double sevd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sed += ed[i];
    sevd += evd[i];
  }
  out.mean_ed = have_d && n > 0 ? sed / static_cast<double>(n) : nan;
  out.mean_evd = have_gt ? sevd / static_cast<double>(n) : nan;
  return out;
}

Histogram segment_histogram(std::span<const double> distances) {
  if (distances.empty()) throw Error(ErrorCode::EmptyInput, "no distances to bin");
  Histogram h;
  h.bin_left.resize(kHistogramBins);
  h.counts.assign(kHistogramBins, 0);
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    h.bin_left[b] = kHistogramBinWidth * static_cast<double>(b);
  }
  double sum = 0.0;
  for (double d : distances) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw Error(ErrorCode::NonFiniteInput, "distances must be finite and >= 0");
    }
    const double idx = std::floor(d / kHistogramBinWidth);
    if (idx >= static_cast<double>(kHistogramBins)) {
      ++h.overflow;
    } else {
      ++h.counts[static_cast<std::size_t>(idx)];
    }
    sum += d;
  }
  const double n = static_cast<double>(distances.size());
  h.mean = sum / n;
  if (distances.size() > 1) {
    double ss = 0.0;
    for (double d : distances) ss += (d - h.mean) * (d - h.mean);
    h.std_dev = std::sqrt(ss / (n - 1.0));
  }
  return h;
}

void finalize(SegmentReport& report) {
  report.histogram = segment_histogram(report.distances);
  report.mean = report.histogram.mean;
  report.std_dev = report.histogram.std_dev;
}

std::string serialize_report_csv(const SegmentReport& report) {
  std::string out = io::csv_version_line();
  out += "cycle_id,distance";
  for (std::size_t k = 0; k < kFeatureCount; ++k) out += ",theta_" + std::to_string(k);
  out += "\n";
  for (std::size_t i = 0; i < report.cycle_ids.size(); ++i) {
    out += std::to_string(report.cycle_ids[i]) + "," + io::format_double(report.distances[i]);
    for (double t : report.thetas[i].theta) out += "," + io::format_double(t);
    out += "\n";
  }
  return out;
}

std::string serialize_histogram_csv(const Histogram& histogram) {
  std::string out = io::csv_version_line();
  out += "bin_left,count\n";
  for (std::size_t b = 0; b < histogram.counts.size(); ++b) {
    out += io::format_double(histogram.bin_left[b]) + "," + std::to_string(histogram.counts[b]) + "\n";
  }
  out += "overflow," + std::to_string(histogram.overflow) + "\n";
  return out;
}

std::string serialize_summary(std::span<const SegmentReport> reports) {
  io::JsonWriter w;
  w.begin_object();
  w.key("version").value(io::kFormatVersion);
  w.key("segments").begin_array();
  for (const auto& r : reports) {
    w.begin_object();
    w.key("segment").value(r.segment_index);
    w.key("label").value(r.segment_label);
    w.key("mean").value(r.mean);
    w.key("std").value(r.std_dev);
    w.key("n").value(r.distances.size());
    w.key("overflow").value(r.histogram.overflow);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.take() + "\n";
}

}  // namespace pi_irl::eval
