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

#include <charconv>
#include <cmath>
#include <sstream>
#include <string>

#include "json.hpp"
#include "pi_irl/demo_gen.hpp"
#include "pi_irl/text_io.hpp"

namespace pi_irl::demo {

using nlohmann::json;
using io::JsonWriter;

namespace {

double num(const json& j) {
  if (j.is_null()) return std::nan("");
  return j.get<double>();
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& j, std::string_view what) {
  if (!j.is_array() || j.size() != N) {
    throw Error(ErrorCode::ConfigParse, std::string(what) + " must have " + std::to_string(N) + " entries");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = num(j[i]);
  return out;
}

void write_track(JsonWriter& w, const track::TrackSpec& t) {
  w.begin_object();
  w.key("archetype").value(track::to_string(t.archetype));
  w.key("length_m").value(t.length_m);
  w.key("lane_width_m").value(t.lane_width_m);
  w.key("curvature_profile").begin_array();
  for (const auto& k : t.curvature_profile) {
    w.begin_array().value(k.s).value(k.kappa).end_array();
  }
  w.end_array();
  w.key("stop_points").array(t.stop_points);
  w.key("speed_limit_mps").value(t.speed_limit_mps);
  w.key("seed").value(t.seed);
  w.key("obstacles").begin_array();
  for (const auto& o : t.obstacles) {
    w.begin_array().value(o.x).value(o.y).value(o.radius).end_array();
  }
  w.end_array();
  w.end_object();
}

track::TrackSpec read_track(const json& j) {
  track::TrackSpec t;
  t.archetype = track::archetype_from_string(j.at("archetype").get<std::string>());
  t.length_m = j.at("length_m").get<double>();
  t.lane_width_m = j.at("lane_width_m").get<double>();
  for (const auto& k : j.at("curvature_profile")) {
    t.curvature_profile.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
  }
  for (const auto& s : j.at("stop_points")) t.stop_points.push_back(s.get<double>());
  t.speed_limit_mps = j.at("speed_limit_mps").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("obstacles")) {
    for (const auto& o : j.at("obstacles")) {
      t.obstacles.push_back({o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()});
    }
  }
  return t;
}

void write_planner(JsonWriter& w, const PlannerConfig& c) {
  w.begin_object();
  w.key("policy_count").value(c.policy_count);
  w.key("horizon_s").value(c.horizon_s);
  w.key("dt").value(c.dt);
  w.key("gamma_per_s").value(c.gamma_per_s);
  w.key("wheelbase_m").value(c.wheelbase_m);
  w.key("lat_accel_max").value(c.lat_accel_max);
  w.key("replan_interval_s").value(c.replan_interval_s);
  w.key("seed").value(c.seed);
  w.end_object();
}

PlannerConfig read_planner(const json& j, PlannerConfig c = {}) {
  c.policy_count = j.value("policy_count", c.policy_count);
  c.horizon_s = j.value("horizon_s", c.horizon_s);
  c.dt = j.value("dt", c.dt);
  c.gamma_per_s = j.value("gamma_per_s", c.gamma_per_s);
  c.wheelbase_m = j.value("wheelbase_m", c.wheelbase_m);
  c.lat_accel_max = j.value("lat_accel_max", c.lat_accel_max);
  c.replan_interval_s = j.value("replan_interval_s", c.replan_interval_s);
  c.seed = j.value("seed", c.seed);
  return c;
}

void write_segment(JsonWriter& w, const SegmentSpec& s) {
  w.begin_object();
  w.key("track");
  write_track(w, s.track);
  w.key("theta_star");
  if (s.has_theta_star) {
    w.array(s.theta_star.theta);
  } else {
    w.value(std::string_view("none"));
  }
  w.end_object();
}

SegmentSpec read_segment(const json& j) {
  SegmentSpec s;
  s.track = read_track(j.at("track"));
  const auto& t = j.at("theta_star");
  if (t.is_array()) {
    s.theta_star.theta = fixed_array<kFeatureCount>(t, "theta_star");
    s.has_theta_star = true;
  } else {
    s.has_theta_star = false;
  }
  return s;
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string serialize_buffer(const CycleBuffer& buffer) {
  validate(buffer);
  std::string out;
  {
    JsonWriter w;
    w.begin_object();
    w.key("version").value(io::kFormatVersion);
    w.key("kind").value("cycle_buffer");
    w.key("planner");
    write_planner(w, buffer.planner);
    w.key("segments").begin_array();
    for (const auto& s : buffer.segments) write_segment(w, s);
    w.end_array();
    w.key("dropped_per_segment").begin_array();
    for (auto d : buffer.dropped_per_segment) w.value(d);
    w.end_array();
    w.key("cycle_count").value(buffer.cycles.size());
    w.end_object();
    out += w.take();
    out.push_back('\n');
  }
  for (const auto& c : buffer.cycles) {
    JsonWriter w;
    w.begin_object();
    w.key("version").value(io::kFormatVersion);
    w.key("cycle_id").value(c.cycle_id);
    w.key("segment_label").value(c.segment_label);
    w.key("segment_index").value(c.segment_index);
    w.key("start_state").begin_array();
    w.value(c.start_state.x).value(c.start_state.y).value(c.start_state.heading);
    w.value(c.start_state.speed).value(c.start_state.time);
    w.end_array();
    w.key("gen_weights").array(c.gen_weights.theta);
    w.key("demo_index").value(c.demo_index);
    w.key("policies").begin_array();
    for (const auto& p : c.policies) {
      w.begin_object();
      w.key("id").value(p.id);
      w.key("steer").array(p.controls.steer);
      w.key("accel").array(p.controls.accel);
      w.key("pi_features").array(p.pi_features);
      w.end_object();
    }
    w.end_array();
    w.end_object();
    out += w.take();
    out.push_back('\n');
  }
  return out;
}

CycleBuffer parse_buffer(std::string_view text) {
  CycleBuffer buffer;
  std::size_t pos = 0;
  bool have_meta = false;
  std::size_t expected = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    const json j = parse_json(line, "cycle buffer record");
    if (!j.contains("version")) throw Error(ErrorCode::SchemaVersionMismatch, "record without version");
    io::check_version(j.at("version").get<std::int64_t>(), "cycle buffer");
    try {
      if (!have_meta) {
        if (j.value("kind", std::string()) != "cycle_buffer") {
          throw Error(ErrorCode::ConfigParse, "first record must be the cycle_buffer meta record");
        }
        buffer.planner = read_planner(j.at("planner"));
        for (const auto& s : j.at("segments")) buffer.segments.push_back(read_segment(s));
        for (const auto& d : j.at("dropped_per_segment")) {
          buffer.dropped_per_segment.push_back(d.get<std::size_t>());
        }
        expected = j.at("cycle_count").get<std::size_t>();
        have_meta = true;
        continue;
      }
      planner::PlanningCycle c;
      c.cycle_id = j.at("cycle_id").get<std::size_t>();
      c.segment_label = j.at("segment_label").get<int>();
      c.segment_index = j.at("segment_index").get<std::size_t>();
      const auto s = fixed_array<5>(j.at("start_state"), "start_state");
      c.start_state = {s[0], s[1], s[2], s[3], s[4]};
      c.gen_weights.theta = fixed_array<kFeatureCount>(j.at("gen_weights"), "gen_weights");
      c.demo_index = j.at("demo_index").get<std::size_t>();
      for (const auto& pj : j.at("policies")) {
        planner::Policy p;
        p.id = pj.at("id").get<std::size_t>();
        p.controls.steer = fixed_array<kControlSegments>(pj.at("steer"), "steer");
        p.controls.accel = fixed_array<kControlSegments>(pj.at("accel"), "accel");
        p.controls.horizon_s = buffer.planner.horizon_s;
        p.pi_features = fixed_array<kFeatureCount>(pj.at("pi_features"), "pi_features");
        p.value = planner::policy_value(p.pi_features, c.gen_weights);
        c.policies.push_back(std::move(p));
      }
      if (c.demo_index >= c.policies.size()) {
        throw Error(ErrorCode::ConfigParse, "demo_index out of range");
      }
      c.demo_pi_features = c.policies[c.demo_index].pi_features;
      c.selected_index = planner::optimal_policy(c.policies, c.gen_weights);
      buffer.cycles.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigParse, std::string("cycle buffer: ") + e.what());
    }
  }
  if (!have_meta) throw Error(ErrorCode::ConfigParse, "cycle buffer is empty");
  if (buffer.cycles.size() != expected) {
    throw Error(ErrorCode::ConfigParse, "cycle buffer is truncated");
  }
  validate(buffer);
  return buffer;
}

void save_buffer(const std::filesystem::path& path, const CycleBuffer& buffer) {
  io::write_file(path, serialize_buffer(buffer));
}

CycleBuffer load_buffer(const std::filesystem::path& path) { return parse_buffer(io::read_file(path)); }

std::string serialize_trajectory(const Trajectory& trajectory) {
  std::string out = io::csv_version_line();
  out += "time,x,y,heading,speed\n";
  for (const auto& s : trajectory.samples) {
    out += io::format_double(s.time) + "," + io::format_double(s.x) + "," + io::format_double(s.y) +
           "," + io::format_double(s.heading) + "," + io::format_double(s.speed) + "\n";
  }
  return out;
}

Trajectory parse_trajectory(std::string_view text) {
  auto body = io::strip_csv_version(text, "trajectory");
  Trajectory t;
  std::size_t pos = 0;
  bool header = true;
  while (pos < body.size()) {
    auto eol = body.find('\n', pos);
    if (eol == std::string_view::npos) eol = body.size();
    const auto line = body.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::array<double, 5> v{};
    std::size_t start = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      auto end = line.find(',', start);
      if (end == std::string_view::npos) end = line.size();
      const auto field = line.substr(start, end - start);
      const auto r = std::from_chars(field.data(), field.data() + field.size(), v[k]);
      if (r.ec != std::errc()) throw Error(ErrorCode::ConfigParse, "bad trajectory field");
      start = end + 1;
    }
    t.samples.push_back({v[1], v[2], v[3], v[4], v[0]});
  }
  if (t.samples.size() >= 2) t.dt = std::round((t.samples[1].time - t.samples[0].time) * 1e9) / 1e9;
  planner::validate(t);
  return t;
}

std::string segment_to_json(const SegmentSpec& segment) {
  JsonWriter w;
  write_segment(w, segment);
  return w.take();
}

SegmentSpec segment_from_json(std::string_view text) {
  const json j = parse_json(text, "segment");
  try {
    return read_segment(j);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("segment: ") + e.what());
  }
}

std::string planner_to_json(const PlannerConfig& cfg) {
  JsonWriter w;
  write_planner(w, cfg);
  return w.take();
}

PlannerConfig planner_from_json(std::string_view text) {
  const json j = parse_json(text, "planner config");
  try {
    return read_planner(j);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigParse, std::string("planner config: ") + e.what());
  }
}

}  // namespace pi_irl::demo
