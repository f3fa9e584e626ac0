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

#include "pi_irl/track_env.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>

namespace pi_irl::track {

std::string_view to_string(Archetype a) {
  switch (a) {
    case Archetype::SharpTurn: return "SharpTurn";
    case Archetype::StopStartTurn: return "StopStartTurn";
    case Archetype::StopStart: return "StopStart";
    case Archetype::LaneFollow: return "LaneFollow";
  }
  return "Unknown";
}

Archetype archetype_from_string(std::string_view name) {
  for (auto a : {Archetype::SharpTurn, Archetype::StopStartTurn, Archetype::StopStart,
                 Archetype::LaneFollow}) {
    if (name == to_string(a)) return a;
  }
  throw Error(ErrorCode::ConfigParse, "unknown archetype '" + std::string(name) + "'");
}

void validate(const TrackSpec& spec) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (!std::isfinite(spec.length_m) || spec.length_m < 50.0) fail("length_m must be >= 50");
  if (!(spec.lane_width_m >= 2.5 && spec.lane_width_m <= 5.0)) {
    fail("lane_width_m must lie in [2.5, 5.0]");
  }
  if (!(spec.speed_limit_mps > 0.0) || !std::isfinite(spec.speed_limit_mps)) {
    fail("speed_limit_mps must be > 0");
  }
  for (std::size_t i = 0; i < spec.curvature_profile.size(); ++i) {
    const auto& k = spec.curvature_profile[i];
    if (!std::isfinite(k.s) || !std::isfinite(k.kappa)) fail("curvature knot not finite");
    if (std::abs(k.kappa) > 0.2) fail("|curvature| must be <= 0.2");
    if (i > 0 && k.s < spec.curvature_profile[i - 1].s) fail("curvature knots must be sorted");
  }
  for (std::size_t i = 0; i < spec.stop_points.size(); ++i) {
    const double sp = spec.stop_points[i];
    if (!(sp >= 0.0 && sp <= spec.length_m)) fail("stop point outside [0, length_m]");
    if (i > 0 && !(sp > spec.stop_points[i - 1])) fail("stop points must be strictly increasing");
  }
  for (const auto& o : spec.obstacles) {
    if (!std::isfinite(o.x) || !std::isfinite(o.y) || !(o.radius >= 0.0)) fail("bad obstacle");
  }
}

double curvature_at(const TrackSpec& spec, double s) {
  const auto& knots = spec.curvature_profile;
  if (knots.empty()) return 0.0;
  if (s <= knots.front().s) return knots.front().kappa;
  if (s >= knots.back().s) return knots.back().kappa;
  auto it = std::upper_bound(knots.begin(), knots.end(), s,
                             [](double v, const CurvatureKnot& k) { return v < k.s; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  if (b.s <= a.s) return b.kappa;
  const double t = (s - a.s) / (b.s - a.s);
  return a.kappa + t * (b.kappa - a.kappa);
}

namespace {

// Exact integral of the piecewise-linear curvature over [0, s].
double heading_integral(const TrackSpec& spec, double s) {
  const auto& knots = spec.curvature_profile;
  if (knots.empty() || s <= 0.0) return knots.empty() ? 0.0 : knots.front().kappa * s;
  double total = 0.0;
  double prev_s = 0.0;
  double prev_k = curvature_at(spec, 0.0);
  for (const auto& k : knots) {
    if (k.s <= prev_s) continue;
    if (k.s >= s) break;
    total += 0.5 * (prev_k + k.kappa) * (k.s - prev_s);
    prev_s = k.s;
    prev_k = k.kappa;
  }
  const double end_k = curvature_at(spec, s);
  total += 0.5 * (prev_k + end_k) * (s - prev_s);
  return total;
}

void add_turn(TrackSpec& spec, double start, double length, double kappa, double ramp = 4.0) {
  spec.curvature_profile.push_back({start - ramp, 0.0});
  spec.curvature_profile.push_back({start, kappa});
  spec.curvature_profile.push_back({start + length, kappa});
  spec.curvature_profile.push_back({start + length + ramp, 0.0});
}

}  // namespace

TrackSpec make_archetype_spec(Archetype archetype, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x7ac4));
  TrackSpec spec;
  spec.archetype = archetype;
  spec.seed = seed;
  spec.lane_width_m = 3.5;
  spec.curvature_profile.push_back({0.0, 0.0});
  auto jitter = [&](double amount) { return rng.uniform(-amount, amount); };
  auto sign = [&] { return rng.uniform01() < 0.5 ? -1.0 : 1.0; };
  switch (archetype) {
    case Archetype::SharpTurn: {
      spec.length_m = 280.0;
      spec.speed_limit_mps = 8.0;
      double s = 50.0 + jitter(5.0);
      double dir = sign();
      for (int i = 0; i < 3; ++i) {
        const double kappa = dir * (0.085 + jitter(0.01));
        const double arc = (std::numbers::pi / 2.0) / std::abs(kappa) - 4.0;
        add_turn(spec, s, arc, kappa);
        s += arc + 55.0 + jitter(5.0);
        dir = -dir;
      }
      break;
    }
    case Archetype::StopStartTurn: {
      spec.length_m = 260.0;
      spec.speed_limit_mps = 8.0;
      double s = 70.0 + jitter(5.0);
      double dir = sign();
      for (int i = 0; i < 2; ++i) {
        spec.stop_points.push_back(s);
        const double kappa = dir * (0.07 + jitter(0.01));
        const double arc = (std::numbers::pi / 2.0) / std::abs(kappa) - 4.0;
        add_turn(spec, s + 8.0, arc, kappa);
        s += arc + 85.0 + jitter(5.0);
        dir = -dir;
      }
      break;
    }
    case Archetype::StopStart: {
      spec.length_m = 280.0;
      spec.speed_limit_mps = 8.0;
      double s = 70.0 + jitter(5.0);
      for (int i = 0; i < 2; ++i) {
        spec.stop_points.push_back(s);
        s += 100.0 + jitter(10.0);
      }
      const double kappa = sign() * 0.004;
      spec.curvature_profile.push_back({140.0, kappa});
      spec.curvature_profile.push_back({200.0, 0.0});
      break;
    }
    case Archetype::LaneFollow: {
      spec.length_m = 420.0;
      spec.speed_limit_mps = 8.0;
      for (double s = 40.0; s < spec.length_m; s += 60.0) {
        spec.curvature_profile.push_back({s + jitter(5.0), jitter(0.012)});
      }
      break;
    }
  }
  std::sort(spec.curvature_profile.begin(), spec.curvature_profile.end(),
            [](const CurvatureKnot& a, const CurvatureKnot& b) { return a.s < b.s; });
  validate(spec);
  return spec;
}

namespace {

// Exact nearest centerline sample for every node of one grid row: lower envelope of the
// parabolas (x - x_k)^2 + (y - y_k)^2 over samples pre-sorted by x.
class RowNearest {
 public:
  explicit RowNearest(std::span<const CenterlineSample> samples) : samples_(samples), order_(samples.size()) {
    for (std::size_t k = 0; k < order_.size(); ++k) order_[k] = k;
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return samples_[a].x != samples_[b].x ? samples_[a].x < samples_[b].x : a < b;
    });
    hull_.reserve(order_.size());
    breaks_.reserve(order_.size() + 1);
  }

  /// Fills out[i] with the nearest sample to (x0 + i * dx, y).
  void fill(double y, double x0, double dx, std::vector<std::size_t>& out) {
    hull_.clear();
    breaks_.clear();
    for (std::size_t k : order_) {
      const double xk = samples_[k].x;
      const double key = height(k, y) + xk * xk;
      if (!hull_.empty() && samples_[hull_.back()].x == xk) {
        if (height(k, y) >= height(hull_.back(), y)) continue;
        hull_.pop_back();
        breaks_.pop_back();
      }
      double cut = -std::numeric_limits<double>::infinity();
      while (!hull_.empty()) {
        const std::size_t q = hull_.back();
        const double xq = samples_[q].x;
        cut = (key - (height(q, y) + xq * xq)) / (2.0 * (xk - xq));
        if (cut > breaks_.back()) break;
        hull_.pop_back();
        breaks_.pop_back();
        cut = -std::numeric_limits<double>::infinity();
      }
      hull_.push_back(k);
      breaks_.push_back(cut);
    }
    std::size_t h = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double x = x0 + dx * static_cast<double>(i);
      while (h + 1 < hull_.size() && breaks_[h + 1] < x) ++h;
      out[i] = hull_[h];
    }
  }

 private:
  double height(std::size_t k, double y) const {
    const double d = samples_[k].y - y;
    return d * d;
  }

  std::span<const CenterlineSample> samples_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> hull_;
  std::vector<double> breaks_;
};

struct Projection {
  double dist;
  double offset;
  double arc;
  double heading;
};

// Refines a nearest sample onto the adjacent polyline segments.
Projection project_onto_centerline(std::span<const CenterlineSample> cl, std::size_t k, double x,
                                   double y) {
  Projection best{std::hypot(x - cl[k].x, y - cl[k].y), 0.0, cl[k].s, cl[k].heading};
  {
    const double c = std::cos(cl[k].heading);
    const double s = std::sin(cl[k].heading);
    best.offset = -(x - cl[k].x) * s + (y - cl[k].y) * c;
    best.offset = std::copysign(best.dist, best.offset);
  }
  auto try_segment = [&](std::size_t a) {
    const auto& p = cl[a];
    const auto& q = cl[a + 1];
    const double dx = q.x - p.x;
    const double dy = q.y - p.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 <= 0.0) return;
    const double t = std::clamp(((x - p.x) * dx + (y - p.y) * dy) / len2, 0.0, 1.0);
    const double px = p.x + t * dx;
    const double py = p.y + t * dy;
    const double d = std::hypot(x - px, y - py);
    if (d < best.dist) {
      const double len = std::sqrt(len2);
      const double cross = (dx * (y - p.y) - dy * (x - p.x)) / len;
      best = {d, std::copysign(d, cross), p.s + t * (q.s - p.s),
              p.heading + t * wrap_angle(q.heading - p.heading)};
    }
  };
  if (k > 0) try_segment(k - 1);
  if (k + 1 < cl.size()) try_segment(k);
  return best;
}

double bilinear(std::span<const double> grid, std::size_t nx, std::size_t i, std::size_t j,
                double tx, double ty) {
  const double v00 = grid[j * nx + i];
  const double v10 = grid[j * nx + i + 1];
  const double v01 = grid[(j + 1) * nx + i];
  const double v11 = grid[(j + 1) * nx + i + 1];
  return (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11);
}

}  // namespace

TrackEnvironment build_track(const TrackSpec& spec) {
  validate(spec);
  TrackEnvironment env;
  env.spec_ = spec;

  const std::size_t n = static_cast<std::size_t>(std::floor(spec.length_m / kCenterlineSpacing)) + 1;
  env.centerline_.reserve(n);
  constexpr int kSubsteps = 10;
  double x = 0.0;
  double y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = kCenterlineSpacing * static_cast<double>(i);
    env.centerline_.push_back({x, y, wrap_angle(heading_integral(spec, s)), s});
    // Simpson over substeps using the exact heading integral.
    const double h = kCenterlineSpacing / kSubsteps;
    for (int k = 0; k < kSubsteps; ++k) {
      const double a = s + h * k;
      const double h0 = heading_integral(spec, a);
      const double hm = heading_integral(spec, a + 0.5 * h);
      const double h1 = heading_integral(spec, a + h);
      x += h / 6.0 * (std::cos(h0) + 4.0 * std::cos(hm) + std::cos(h1));
      y += h / 6.0 * (std::sin(h0) + 4.0 * std::sin(hm) + std::sin(h1));
    }
  }

  Bounds b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& c : env.centerline_) {
    b.x_min = std::min(b.x_min, c.x);
    b.y_min = std::min(b.y_min, c.y);
    b.x_max = std::max(b.x_max, c.x);
    b.y_max = std::max(b.y_max, c.y);
  }
  b.x_min = std::floor((b.x_min - kGridMargin) / kCellSize) * kCellSize;
  b.y_min = std::floor((b.y_min - kGridMargin) / kCellSize) * kCellSize;
  env.nx_ = static_cast<std::size_t>(std::ceil((b.x_max + kGridMargin - b.x_min) / kCellSize)) + 1;
  env.ny_ = static_cast<std::size_t>(std::ceil((b.y_max + kGridMargin - b.y_min) / kCellSize)) + 1;
  b.x_max = b.x_min + kCellSize * static_cast<double>(env.nx_ - 1);
  b.y_max = b.y_min + kCellSize * static_cast<double>(env.ny_ - 1);
  env.bounds_ = b;

  const std::size_t cells = env.nx_ * env.ny_;
  env.centerline_dist_.resize(cells);
  env.boundary_dist_.resize(cells);
  env.obstacle_dist_.resize(cells);
  env.lane_direction_.resize(cells);
  env.dir_cos_.resize(cells);
  env.dir_sin_.resize(cells);
  env.arc_.resize(cells);
  env.offset_.resize(cells);

  RowNearest nearest(env.centerline_);
  std::vector<std::size_t> row(env.nx_);
  const double half_width = 0.5 * spec.lane_width_m;
  for (std::size_t j = 0; j < env.ny_; ++j) {
    nearest.fill(env.node_y(j), env.node_x(0), kCellSize, row);
    for (std::size_t i = 0; i < env.nx_; ++i) {
      const double px = env.node_x(i);
      const double py = env.node_y(j);
      const Projection proj = project_onto_centerline(env.centerline_, row[i], px, py);
      const std::size_t c = j * env.nx_ + i;
      env.centerline_dist_[c] = proj.dist;
      env.boundary_dist_[c] = std::max(0.0, half_width - proj.dist);
      env.lane_direction_[c] = wrap_angle(proj.heading);
      env.dir_cos_[c] = std::cos(proj.heading);
      env.dir_sin_[c] = std::sin(proj.heading);
      env.arc_[c] = proj.arc;
      env.offset_[c] = proj.offset;
      double obstacle = kNoObstacleDistance;
      for (const auto& o : spec.obstacles) {
        obstacle = std::min(obstacle, std::max(0.0, std::hypot(px - o.x, py - o.y) - o.radius));
      }
      env.obstacle_dist_[c] = obstacle;
    }
  }
  return env;
}

LaneFrame TrackEnvironment::frame(double x, double y) const {
  if (!bounds_.contains(x, y) || !std::isfinite(x) || !std::isfinite(y)) {
    throw Error(ErrorCode::OutOfBounds,
                "query (" + std::to_string(x) + ", " + std::to_string(y) + ") outside track bounds");
  }
  const double fx = (x - bounds_.x_min) / kCellSize;
  const double fy = (y - bounds_.y_min) / kCellSize;
  const std::size_t i = std::min(static_cast<std::size_t>(fx), nx_ - 2);
  const std::size_t j = std::min(static_cast<std::size_t>(fy), ny_ - 2);
  const double tx = fx - static_cast<double>(i);
  const double ty = fy - static_cast<double>(j);
  LaneFrame f;
  f.centerline_dist = bilinear(centerline_dist_, nx_, i, j, tx, ty);
  f.signed_offset = bilinear(offset_, nx_, i, j, tx, ty);
  f.arc_position = bilinear(arc_, nx_, i, j, tx, ty);
  f.lane_heading = std::atan2(bilinear(dir_sin_, nx_, i, j, tx, ty),
                              bilinear(dir_cos_, nx_, i, j, tx, ty));
  f.boundary_dist = bilinear(boundary_dist_, nx_, i, j, tx, ty);
  f.obstacle_dist = bilinear(obstacle_dist_, nx_, i, j, tx, ty);
  return f;
}

std::uint64_t TrackEnvironment::fingerprint() const {
  // FNV-1a over the raw bytes of every grid.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::span<const double> v) {
    for (double d : v) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      for (int k = 0; k < 8; ++k) {
        h ^= (bits >> (8 * k)) & 0xffu;
        h *= 0x100000001b3ULL;
      }
    }
  };
  feed(centerline_dist_);
  feed(boundary_dist_);
  feed(obstacle_dist_);
  feed(lane_direction_);
  feed(arc_);
  feed(offset_);
  return h;
}

StaticFeatureSample static_features(const TrackEnvironment& env, const LaneFrame& frame,
                                    double heading) {
  StaticFeatureSample out;
  out.centerline_dist = std::max(0.0, frame.centerline_dist);
  const double err = wrap_angle(heading - frame.lane_heading);
  out.direction_err = err * err;
  out.proximity = std::exp(-std::max(0.0, frame.obstacle_dist) / 2.0);
  out.curb_dist_penalty = std::max(0.0, 1.0 - frame.boundary_dist / (0.5 * env.lane_width()));
  return out;
}

StaticFeatureSample query_static(const TrackEnvironment& env, double x, double y, double heading) {
  return static_features(env, env.frame(x, y), heading);
}

}  // namespace pi_irl::track
