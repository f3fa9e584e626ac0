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

#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <iostream>
#include <memory>

#include "json.hpp"
#include "pi_irl/eval.hpp"
#include "pi_irl/irl_deep.hpp"
#include "pi_irl/text_io.hpp"

namespace pi_irl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::Latent: return "latent";
    case ModelKind::Deep: return "deep";
  }
  return "unknown";
}

ModelKind kind_from_string(std::string_view name) {
  for (auto k : {ModelKind::Linear, ModelKind::Latent, ModelKind::Deep}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::ConfigParse, "unknown model kind '" + std::string(name) + "'");
}

namespace {

void read_train(const json& j, irl::TrainConfig& t) {
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.evd_threshold = j.value("evd_threshold", t.evd_threshold);
  t.grad_clip = j.value("grad_clip", t.grad_clip);
  t.l2 = j.value("l2", t.l2);
  t.steps_per_batch = j.value("steps_per_batch", t.steps_per_batch);
  t.init_low = j.value("init_low", t.init_low);
  t.init_high = j.value("init_high", t.init_high);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  try {
    io::check_version(j.at("version").get<std::int64_t>(), "config");
    c.seed = j.value("seed", c.seed);
    const std::string mode = j.value("mode", std::string("replay"));
    if (mode == "replay") {
      c.mode = EvalMode::Replay;
    } else if (mode == "closed_loop") {
      c.mode = EvalMode::ClosedLoop;
    } else {
      throw Error(ErrorCode::ConfigParse, "mode must be replay or closed_loop");
    }
    if (j.contains("planner")) c.planner = demo::planner_from_json(j.at("planner").dump());
    if (j.contains("expert")) {
      const auto& e = j.at("expert");
      c.expert.policy_count = e.value("policy_count", c.expert.policy_count);
      c.expert.max_duration_s = e.value("max_duration_s", c.expert.max_duration_s);
      c.expert.end_margin_m = e.value("end_margin_m", c.expert.end_margin_m);
      c.expert.start_speed_fraction = e.value("start_speed_fraction", c.expert.start_speed_fraction);
    }
    if (j.contains("collect")) {
      const auto& k = j.at("collect");
      c.collect.cycles_per_segment = k.value("cycles_per_segment", c.collect.cycles_per_segment);
      c.collect.gate_threshold = k.value("gate_threshold", c.collect.gate_threshold);
      c.theta0_low = k.value("theta0_low", c.theta0_low);
      c.theta0_high = k.value("theta0_high", c.theta0_high);
      if (k.contains("projection")) {
        const auto& p = k.at("projection");
        c.collect.projection.lon = p.value("lon", c.collect.projection.lon);
        c.collect.projection.lat = p.value("lat", c.collect.projection.lat);
        c.collect.projection.yaw = p.value("yaw", c.collect.projection.yaw);
      }
    }
    if (j.contains("train")) {
      read_train(j.at("train"), c.linear);
      read_train(j.at("train"), c.latent);
      read_train(j.at("train"), c.deep);
    }
    // Adam wants a smaller step than the shared default; only the deep block sets it.
    c.deep.learning_rate = 1e-3;
    if (j.contains("linear")) read_train(j.at("linear"), c.linear);
    if (j.contains("latent")) {
      const auto& l = j.at("latent");
      read_train(l, c.latent);
      c.clusters = l.value("clusters", c.clusters);
      c.latent_em.m_steps = l.value("m_steps", c.latent_em.m_steps);
      c.latent_em.init_low = l.value("cluster_init_low", c.latent_em.init_low);
      c.latent_em.init_high = l.value("cluster_init_high", c.latent_em.init_high);
      c.latent_em.collapse_prior = l.value("collapse_prior", c.latent_em.collapse_prior);
      c.latent_em.collapse_epochs = l.value("collapse_epochs", c.latent_em.collapse_epochs);
      c.latent_em.warmup_epochs = l.value("warmup_epochs", c.latent_em.warmup_epochs);
      if (l.contains("start")) {
        const auto start = l.at("start").get<std::string>();
        if (start == "gap_clusters") {
          c.latent_em.start = irl::LatentStart::GapClusters;
        } else if (start == "e_step") {
          c.latent_em.start = irl::LatentStart::EStep;
        } else {
          throw Error(ErrorCode::ConfigParse, "latent.start must be gap_clusters or e_step");
        }
      }
    }
    if (j.contains("deep")) {
      read_train(j.at("deep"), c.deep);
      c.history = j.at("deep").value("history", c.history);
    }
    for (const auto& s : j.at("segments")) {
      demo::SegmentSpec seg;
      seg.track = track::make_archetype_spec(track::archetype_from_string(s.at("archetype").get<std::string>()),
                                             s.at("seed").get<std::uint64_t>());
      if (s.contains("theta_star")) {
        const auto& t = s.at("theta_star");
        if (t.size() != kFeatureCount) throw Error(ErrorCode::ConfigParse, "theta_star needs 15 entries");
        for (std::size_t k = 0; k < kFeatureCount; ++k) seg.theta_star[k] = t[k].get<double>();
      } else {
        seg.has_theta_star = false;
      }
      c.segments.push_back(seg);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("config: ") + e.what());
  }
  if (c.segments.empty()) throw Error(ErrorCode::ConfigParse, "config lists no segments");
  planner::validate(c.planner);
  irl::validate(c.linear);
  irl::validate(c.latent);
  irl::validate(c.deep);
  return c;
}

ExperimentConfig load_config(const fs::path& path) { return parse_config(io::read_file(path)); }

std::uint64_t stage_seed(const ExperimentConfig& cfg, std::string_view stage, std::size_t index) {
  return mix_seed(mix_seed(cfg.seed, fnv1a(stage)), index);
}

std::vector<std::size_t> parse_segment_list(std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const auto item = text.substr(start, end - start);
    std::size_t v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw Error(ErrorCode::ConfigParse, "bad segment list '" + std::string(text) + "'");
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

namespace paths {
fs::path tracks(const RunOptions& o) { return o.out / "tracks.json"; }
fs::path expert(const RunOptions& o, std::size_t i) { return o.out / ("expert_" + std::to_string(i) + ".csv"); }
fs::path buffer(const RunOptions& o) { return o.out / "buffer.jsonl"; }
fs::path model(const RunOptions& o, ModelKind k) {
  return o.out / ("model_" + std::string(to_string(k)) + ".json");
}
fs::path train_log(const RunOptions& o, ModelKind k) {
  return o.out / ("train_log_" + std::string(to_string(k)) + ".csv");
}
fs::path report(const RunOptions& o, ModelKind k, std::size_t i) {
  return o.out / ("report_" + std::string(to_string(k)) + "_seg" + std::to_string(i) + ".csv");
}
fs::path histogram(const RunOptions& o, ModelKind k, std::size_t i) {
  return o.out / ("hist_" + std::string(to_string(k)) + "_seg" + std::to_string(i) + ".csv");
}
fs::path summary(const RunOptions& o, ModelKind k) {
  return o.out / ("summary_" + std::string(to_string(k)) + ".json");
}
fs::path theta_trace(const RunOptions& o, ModelKind k) {
  return o.out / ("theta_trace_" + std::string(to_string(k)) + ".csv");
}
}  // namespace paths

void cmd_generate(const ExperimentConfig& cfg, const RunOptions& opt) {
  fs::create_directories(opt.out);
  io::JsonWriter w;
  w.begin_object();
  w.key("version").value(io::kFormatVersion);
  w.key("kind").value("tracks");
  w.key("segments").begin_array();
  for (const auto& seg : cfg.segments) w.raw(demo::segment_to_json(seg));
  w.end_array();
  w.end_object();
  io::write_file(paths::tracks(opt), w.take() + "\n");

  for (std::size_t i = 0; i < cfg.segments.size(); ++i) {
    const auto& seg = cfg.segments[i];
    if (!seg.has_theta_star) {
      throw Error(ErrorCode::MissingGroundTruth, "segment " + std::to_string(i) + " has no theta_star");
    }
    const auto env = track::build_track(seg.track);
    const auto zeta =
        demo::generate_expert_odometry(env, seg.theta_star, cfg.planner, stage_seed(cfg, "expert", i), cfg.expert);
    io::write_file(paths::expert(opt, i), demo::serialize_trajectory(zeta));
  }
}

std::vector<demo::SegmentSpec> load_tracks(const RunOptions& opt) {
  const auto text = io::read_file(paths::tracks(opt));
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("tracks: ") + e.what());
  }
  io::check_version(j.value("version", std::int64_t{-1}), "tracks");
  std::vector<demo::SegmentSpec> out;
  try {
    for (const auto& s : j.at("segments")) out.push_back(demo::segment_from_json(s.dump()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("tracks: ") + e.what());
  }
  return out;
}

std::vector<planner::Trajectory> load_experts(const RunOptions& opt, std::size_t count) {
  std::vector<planner::Trajectory> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(demo::parse_trajectory(io::read_file(paths::expert(opt, i))));
  }
  return out;
}

void cmd_collect(const ExperimentConfig& cfg, const RunOptions& opt) {
  const auto tracks = load_tracks(opt);
  const auto experts = load_experts(opt, tracks.size());
  const auto theta0 = demo::draw_initial_weights(stage_seed(cfg, "theta0"), cfg.theta0_low, cfg.theta0_high);
  auto planner_cfg = cfg.planner;
  planner_cfg.seed = stage_seed(cfg, "planner");
  const auto buffer =
      demo::collect_cycle_buffer(tracks, experts, theta0, planner_cfg, stage_seed(cfg, "collect"), cfg.collect);
  demo::save_buffer(paths::buffer(opt), buffer);
}

namespace {

ModelKind require_kind(const RunOptions& opt) {
  if (!opt.kind) throw Error(ErrorCode::ConfigParse, "--kind is required");
  return *opt.kind;
}

demo::CycleBuffer load_selected_buffer(const RunOptions& opt) {
  auto buffer = demo::load_buffer(paths::buffer(opt));
  if (!opt.segments.empty()) {
    for (std::size_t s : opt.segments) {
      if (s >= buffer.segments.size()) {
        throw Error(ErrorCode::ConfigParse, "segment " + std::to_string(s) + " not in the buffer");
      }
    }
    buffer = demo::select_segments(buffer, opt.segments);
  }
  if (buffer.cycles.empty()) throw Error(ErrorCode::EmptyBuffer, "no cycles in the selected segments");
  return buffer;
}

/// A loaded model of any kind, able to hand out fresh online providers.
struct LoadedModel {
  ModelKind kind = ModelKind::Linear;
  irl::LinearModel linear;
  irl::ClusterModel latent;
  irl::DeepModel deep;

  std::unique_ptr<planner::RewardProvider> provider(const RewardWeights& initial) const {
    switch (kind) {
      case ModelKind::Linear: return std::make_unique<planner::FixedWeights>(linear.planner_weights());
      case ModelKind::Latent: return std::make_unique<irl::LatentMixtureProvider>(latent);
      case ModelKind::Deep: return std::make_unique<irl::DeepRewardProvider>(deep, initial);
    }
    return nullptr;
  }
};

LoadedModel load_model(const RunOptions& opt, ModelKind kind) {
  const auto text = io::read_file(paths::model(opt, kind));
  LoadedModel m;
  m.kind = kind;
  switch (kind) {
    case ModelKind::Linear: m.linear = irl::parse_linear_model(text); break;
    case ModelKind::Latent: m.latent = irl::parse_latent_model(text); break;
    case ModelKind::Deep: m.deep = irl::parse_deep_model(text); break;
  }
  return m;
}

std::vector<std::size_t> segments_in(const demo::CycleBuffer& buffer) {
  std::vector<std::size_t> segs;
  for (const auto& c : buffer.cycles) {
    if (std::find(segs.begin(), segs.end(), c.segment_index) == segs.end()) segs.push_back(c.segment_index);
  }
  std::sort(segs.begin(), segs.end());
  return segs;
}

RewardWeights initial_weights(const ExperimentConfig& cfg) {
  return demo::draw_initial_weights(stage_seed(cfg, "theta0"), cfg.theta0_low, cfg.theta0_high);
}

}  // namespace

void cmd_train(const ExperimentConfig& cfg, const RunOptions& opt) {
  const ModelKind kind = require_kind(opt);
  const auto buffer = load_selected_buffer(opt);
  const auto experts = load_experts(opt, buffer.segments.size());
  const auto distances = eval::distance_table(buffer, experts);
  std::string model_text;
  std::string log_text;
  switch (kind) {
    case ModelKind::Linear: {
      auto t = cfg.linear;
      t.seed = stage_seed(cfg, "train_linear");
      const auto r = irl::train_linear(buffer, t, distances);
      model_text = irl::serialize_model(r.model);
      log_text = irl::serialize_log(r.log);
      break;
    }
    case ModelKind::Latent: {
      auto t = cfg.latent;
      t.seed = stage_seed(cfg, "train_latent");
      const auto r = irl::train_latent(buffer, cfg.clusters, t, cfg.latent_em, distances);
      model_text = irl::serialize_model(r.model);
      log_text = irl::serialize_log(r.log);
      break;
    }
    case ModelKind::Deep: {
      auto t = cfg.deep;
      t.seed = stage_seed(cfg, "train_deep");
      const auto r = irl::train_deep(buffer, t, distances, cfg.history);
      model_text = irl::serialize_model(r.model);
      log_text = irl::serialize_log(r.log);
      break;
    }
  }
  fs::create_directories(opt.out);
  io::write_file(paths::model(opt, kind), model_text);
  io::write_file(paths::train_log(opt, kind), log_text);
}

void cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& opt) {
  const ModelKind kind = require_kind(opt);
  const auto buffer = load_selected_buffer(opt);
  const auto experts = load_experts(opt, buffer.segments.size());
  const auto model = load_model(opt, kind);
  const auto theta0 = initial_weights(cfg);

  std::vector<eval::SegmentReport> reports;
  for (std::size_t s : segments_in(buffer)) {
    const auto& seg = buffer.segments[s];
    const auto env = track::build_track(seg.track);
    const auto& zeta = experts[s];
    eval::SegmentReport rep;
    rep.segment_index = s;
    rep.segment_label = static_cast<int>(seg.track.archetype);
    auto provider = model.provider(theta0);

    if (cfg.mode == EvalMode::Replay) {
      std::optional<planner::PlanningCycle> shadow;
      for (const auto& c : buffer.cycles) {
        if (c.segment_index != s) continue;
        const auto theta = provider->next_weights(shadow ? &*shadow : nullptr);
        std::vector<FeatureVector> f;
        f.reserve(c.policies.size());
        for (const auto& p : c.policies) f.push_back(p.pi_features);
        const std::size_t best = planner::optimal_policy(f, theta);
        const auto states = planner::rollout(env, c.start_state, c.policies[best].controls, buffer.planner);
        rep.cycle_ids.push_back(c.cycle_id);
        rep.distances.push_back(eval::trajectory_distance(zeta, states));
        rep.thetas.push_back(theta);
        // The replayed cycle as the online loop would have seen it.
        shadow = c;
        shadow->selected_index = best;
      }
    } else {
      std::size_t n = 0;
      for (const auto& c : buffer.cycles) n += c.segment_index == s ? 1 : 0;
      planner::MpcOptions mo;
      mo.keep_states = true;
      mo.segment_label = rep.segment_label;
      mo.segment_index = s;
      const auto& z0 = zeta.samples.front();
      const planner::VehicleState start{z0.x, z0.y, z0.heading, z0.speed, z0.time};
      const auto run = planner::run_mpc(env, *provider, n, buffer.planner, start, mo);
      for (const auto& c : run.cycles) {
        double d = 0.0;
        try {
          d = eval::trajectory_distance(zeta, c.policies[c.selected_index]);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NoOverlap) throw;
          break;
        }
        rep.cycle_ids.push_back(c.cycle_id);
        rep.distances.push_back(d);
        rep.thetas.push_back(c.gen_weights);
      }
    }
    eval::finalize(rep);
    reports.push_back(std::move(rep));
  }
  for (const auto& r : reports) {
    io::write_file(paths::report(opt, kind, r.segment_index), eval::serialize_report_csv(r));
    io::write_file(paths::histogram(opt, kind, r.segment_index), eval::serialize_histogram_csv(r.histogram));
  }
  io::write_file(paths::summary(opt, kind), eval::serialize_summary(reports));
}

void cmd_infer(const ExperimentConfig& cfg, const RunOptions& opt) {
  const ModelKind kind = require_kind(opt);
  const auto tracks = load_tracks(opt);
  const auto model = load_model(opt, kind);
  std::vector<std::size_t> segs = opt.segments;
  if (segs.empty()) {
    for (std::size_t i = 0; i < tracks.size(); ++i) segs.push_back(i);
  }
  auto planner_cfg = cfg.planner;
  planner_cfg.seed = stage_seed(cfg, "infer");
  std::string out = io::csv_version_line();
  out += "segment,cycle,time,x,y,heading,speed";
  for (std::size_t k = 0; k < kFeatureCount; ++k) out += ",theta_" + std::to_string(k);
  out += "\n";
  for (std::size_t s : segs) {
    if (s >= tracks.size()) throw Error(ErrorCode::ConfigParse, "segment " + std::to_string(s) + " not in tracks");
    const auto env = track::build_track(tracks[s].track);
    auto provider = model.provider(initial_weights(cfg));
    planner::MpcOptions mo;
    mo.segment_index = s;
    mo.segment_label = static_cast<int>(tracks[s].track.archetype);
    const double end_arc = env.spec().length_m - cfg.expert.end_margin_m;
    mo.stop_when = [&](const planner::VehicleState& st) { return env.frame(st.x, st.y).arc_position >= end_arc; };
    const auto start = demo::track_start_state(env, cfg.expert.start_speed_fraction * env.speed_limit());
    const auto run = planner::run_mpc(env, *provider, cfg.collect.cycles_per_segment, planner_cfg, start, mo);
    for (const auto& c : run.cycles) {
      const auto& st = c.start_state;
      out += std::to_string(s) + "," + std::to_string(c.cycle_id) + "," + io::format_double(st.time) + "," +
             io::format_double(st.x) + "," + io::format_double(st.y) + "," + io::format_double(st.heading) + "," +
             io::format_double(st.speed);
      for (double t : c.gen_weights.theta) out += "," + io::format_double(t);
      out += "\n";
    }
  }
  io::write_file(paths::theta_trace(opt, kind), out);
}

int run(int argc, char** argv) {
  CLI::App app{"Planner-in-the-loop maximum-entropy IRL toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "out";
  std::string kind_name;
  std::string segment_list;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub, bool kind) {
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Override the base seed");
    sub->add_option("--segments", segment_list, "Comma-separated segment indices");
    if (kind) {
      sub->add_option("--kind", kind_name, "linear | latent | deep")->required();
    } else {
      sub->add_option("--kind", kind_name, "linear | latent | deep");
    }
  };
  auto* gen = app.add_subcommand("generate", "Build tracks and expert odometry");
  auto* col = app.add_subcommand("collect", "Collect the planning-cycle buffer");
  auto* trn = app.add_subcommand("train", "Train a reward model");
  auto* evl = app.add_subcommand("evaluate", "Per-segment distance reports");
  auto* inf = app.add_subcommand("infer", "Closed-loop replay with a trained model");
  add_common(gen, false);
  add_common(col, false);
  add_common(trn, true);
  add_common(evl, true);
  add_common(inf, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    auto cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    RunOptions opt;
    opt.out = out_dir;
    if (!kind_name.empty()) opt.kind = kind_from_string(kind_name);
    if (!segment_list.empty()) opt.segments = parse_segment_list(segment_list);
    if (gen->parsed()) cmd_generate(cfg, opt);
    if (col->parsed()) cmd_collect(cfg, opt);
    if (trn->parsed()) cmd_train(cfg, opt);
    if (evl->parsed()) cmd_evaluate(cfg, opt);
    if (inf->parsed()) cmd_infer(cfg, opt);
  } catch (const Error& e) {
    std::cerr << "error code=" << to_string(e.code()) << " message=" << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error code=Internal message=" << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace pi_irl::cli
