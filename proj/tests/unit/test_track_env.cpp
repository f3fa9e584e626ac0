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

#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "pi_irl/track_env.hpp"

using namespace pi_irl;
using namespace pi_irl::track;

namespace {

// Accumulated heading change along the sampled centerline.
double unwrapped_heading_change(const TrackEnvironment& env) {
  const auto cl = env.centerline();
  double total = 0.0;
  for (std::size_t i = 1; i < cl.size(); ++i) total += wrap_angle(cl[i].heading - cl[i - 1].heading);
  return total;
}

double brute_nearest(const TrackEnvironment& env, double x, double y) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : env.centerline()) best = std::min(best, std::hypot(c.x - x, c.y - y));
  return best;
}

}  // namespace

TEST_CASE("spec validation rejects each broken invariant") {
  auto ok = fixtures::straight_spec();
  CHECK_NOTHROW(validate(ok));

  auto s = ok;
  s.length_m = 49.0;
  CHECK_THROWS_AS(validate(s), Error);
  s = ok;
  s.lane_width_m = 5.5;
  CHECK_THROWS_AS(validate(s), Error);
  s = ok;
  s.curvature_profile = {{0.0, 0.25}};
  CHECK_THROWS_AS(validate(s), Error);
  s = ok;
  s.stop_points = {30.0, 20.0};
  CHECK_THROWS_AS(validate(s), Error);
  s = ok;
  s.stop_points = {120.0};
  CHECK_THROWS_AS(validate(s), Error);
  try {
    build_track(s);
    FAIL("expected InvalidSpec");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSpec);
  }
}

TEST_CASE("straight track has a constant heading and the right length") {
  const auto env = build_track(fixtures::straight_spec(100.0));
  const auto cl = env.centerline();
  REQUIRE(cl.size() >= 2);
  for (const auto& c : cl) {
    CHECK(c.heading == doctest::Approx(0.0));
    CHECK(c.y == doctest::Approx(0.0));
  }
  const double length = cl.back().s;
  CHECK(std::abs(length - 100.0) <= kCenterlineSpacing);
  CHECK(cl.back().x == doctest::Approx(length).epsilon(1e-9));
}

TEST_CASE("constant curvature turns the heading by kappa times length") {
  TrackSpec s;
  s.archetype = Archetype::SharpTurn;
  s.length_m = 60.0;
  s.curvature_profile = {{0.0, 0.05}};
  const auto env = build_track(s);
  CHECK(unwrapped_heading_change(env) == doctest::Approx(0.05 * 60.0).epsilon(1e-9));

  // Independent trapezoidal integration of the stored curvature profile.
  double numeric = 0.0;
  const int n = 6000;
  for (int i = 0; i < n; ++i) {
    const double a = 60.0 * i / n;
    const double b = 60.0 * (i + 1) / n;
    numeric += 0.5 * (curvature_at(s, a) + curvature_at(s, b)) * (b - a);
  }
  CHECK(numeric == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("curvature interpolates linearly and holds past the ends") {
  TrackSpec s = fixtures::straight_spec();
  s.curvature_profile = {{10.0, 0.0}, {20.0, 0.1}};
  CHECK(curvature_at(s, 0.0) == 0.0);
  CHECK(curvature_at(s, 15.0) == doctest::Approx(0.05));
  CHECK(curvature_at(s, 99.0) == doctest::Approx(0.1));
}

TEST_CASE("build_track is a pure function of its TrackSpec") {
  const auto spec = make_archetype_spec(Archetype::SharpTurn, 5);
  const auto a = build_track(spec);
  const auto b = build_track(spec);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(std::equal(a.centerline_dist_grid().begin(), a.centerline_dist_grid().end(),
                   b.centerline_dist_grid().begin()));
  const auto other = build_track(make_archetype_spec(Archetype::SharpTurn, 6));
  CHECK(other.fingerprint() != a.fingerprint());
}

TEST_CASE("grid covers every centerline sample with margin") {
  for (auto arch : {Archetype::SharpTurn, Archetype::StopStartTurn, Archetype::StopStart,
                    Archetype::LaneFollow}) {
    const auto env = build_track(make_archetype_spec(arch, 3));
    const auto& b = env.bounds();
    for (const auto& c : env.centerline()) {
      REQUIRE(c.x - b.x_min >= 5.0);
      REQUIRE(b.x_max - c.x >= 5.0);
      REQUIRE(c.y - b.y_min >= 5.0);
      REQUIRE(b.y_max - c.y >= 5.0);
    }
  }
}

TEST_CASE("on-centerline query has near-zero distance and direction error") {
  const auto env = build_track(make_archetype_spec(Archetype::StopStartTurn, 2));
  const auto cl = env.centerline();
  for (std::size_t i = 0; i < cl.size(); i += 37) {
    const auto f = query_static(env, cl[i].x, cl[i].y, cl[i].heading);
    CHECK(f.centerline_dist <= kCellSize);
    CHECK(f.direction_err < 1e-3);
  }
}

TEST_CASE("lateral offset from a straight line") {
  const auto env = build_track(fixtures::straight_spec());
  const auto f = query_static(env, 40.1, 1.0, 0.0);
  CHECK(std::abs(f.centerline_dist - 1.0) <= 0.25);
  const auto frame = env.frame(40.1, 1.0);
  CHECK(frame.signed_offset > 0.0);
  CHECK(env.frame(40.1, -1.0).signed_offset < 0.0);
}

TEST_CASE("no obstacles means vanishing proximity") {
  const auto env = build_track(fixtures::straight_spec());
  const auto f = query_static(env, 20.0, 0.5, 0.0);
  CHECK(f.proximity < 1e-100);
  CHECK(f.proximity >= 0.0);
}

TEST_CASE("obstacle raises proximity nearby") {
  auto s = fixtures::straight_spec();
  s.obstacles.push_back({30.0, 0.0, 0.5});
  const auto env = build_track(s);
  const auto near = query_static(env, 30.0, 1.0, 0.0);
  const auto far = query_static(env, 60.0, 1.0, 0.0);
  CHECK(near.proximity > 0.5);
  CHECK(near.proximity > far.proximity);
}

TEST_CASE("queries outside the grid throw OutOfBounds") {
  const auto env = build_track(fixtures::straight_spec());
  try {
    (void)env.frame(env.bounds().x_max + 1.0, 0.0);
    FAIL("expected OutOfBounds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfBounds);
  }
}

TEST_CASE("grid distance matches brute-force nearest sample") {
  for (auto arch : {Archetype::SharpTurn, Archetype::StopStartTurn}) {
    const auto env = build_track(make_archetype_spec(arch, 9));
    const auto& b = env.bounds();
    Rng rng(17);
    for (int k = 0; k < 100; ++k) {
      const double x = rng.uniform(b.x_min, b.x_max);
      const double y = rng.uniform(b.y_min, b.y_max);
      const double grid = env.frame(x, y).centerline_dist;
      CHECK(std::abs(grid - brute_nearest(env, x, y)) <= 0.354);
    }
  }
}

TEST_CASE("static features are finite and non-negative everywhere") {
  for (auto arch : {Archetype::SharpTurn, Archetype::StopStartTurn, Archetype::StopStart,
                    Archetype::LaneFollow}) {
    const auto env = build_track(make_archetype_spec(arch, 1));
    const auto& b = env.bounds();
    Rng rng(mix_seed(99, static_cast<std::uint64_t>(arch)));
    for (int k = 0; k < 10000; ++k) {
      const auto f = query_static(env, rng.uniform(b.x_min, b.x_max), rng.uniform(b.y_min, b.y_max),
                                  rng.uniform(-4.0, 4.0));
      for (double v : {f.centerline_dist, f.direction_err, f.proximity, f.curb_dist_penalty}) {
        REQUIRE(std::isfinite(v));
        REQUIRE(v >= 0.0);
      }
    }
  }
}

TEST_CASE("distance grids are non-negative") {
  const auto env = build_track(make_archetype_spec(Archetype::LaneFollow, 4));
  for (auto grid : {env.centerline_dist_grid(), env.boundary_dist_grid(), env.obstacle_dist_grid()}) {
    for (double v : grid) REQUIRE(v >= 0.0);
  }
}

TEST_CASE("archetype names round-trip") {
  for (auto a : {Archetype::SharpTurn, Archetype::StopStartTurn, Archetype::StopStart,
                 Archetype::LaneFollow}) {
    CHECK(archetype_from_string(to_string(a)) == a);
  }
  CHECK_THROWS_AS(archetype_from_string("Roundabout"), Error);
}
