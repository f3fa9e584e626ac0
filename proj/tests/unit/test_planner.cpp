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

#include "fixtures.hpp"
#include "pi_irl/demo_gen.hpp"
#include "pi_irl/planner.hpp"

using namespace pi_irl;
using namespace pi_irl::planner;

namespace {

// Continuous bicycle integrated with classical RK4.
VehicleState rk4(VehicleState s, double steer, double accel, double T, double h, double L) {
  auto deriv = [&](const std::array<double, 4>& q) {
    return std::array<double, 4>{q[3] * std::cos(q[2]), q[3] * std::sin(q[2]),
                                 q[3] / L * std::tan(steer), accel};
  };
  std::array<double, 4> q{s.x, s.y, s.heading, s.speed};
  const int n = static_cast<int>(std::llround(T / h));
  for (int i = 0; i < n; ++i) {
    auto add = [&](const std::array<double, 4>& a, const std::array<double, 4>& b, double k) {
      return std::array<double, 4>{a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2], a[3] + k * b[3]};
    };
    const auto k1 = deriv(q);
    const auto k2 = deriv(add(q, k1, h / 2));
    const auto k3 = deriv(add(q, k2, h / 2));
    const auto k4 = deriv(add(q, k3, h));
    for (int j = 0; j < 4; ++j) q[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return {q[0], q[1], q[2], q[3], s.time + T};
}

ControlSequence constant_controls(double steer, double accel) {
  ControlSequence c;
  c.steer.fill(steer);
  c.accel.fill(accel);
  return c;
}

const track::TrackEnvironment& straight_env() {
  static const auto env = track::build_track(fixtures::straight_spec(150.0));
  return env;
}

}  // namespace

TEST_CASE("vehicle at rest only advances time") {
  const VehicleState s{1.0, 2.0, 0.3, 0.0, 4.0};
  const auto n = step_transition(s, 0.0, 0.0, 0.1, 2.8);
  CHECK(n.x == s.x);
  CHECK(n.y == s.y);
  CHECK(n.heading == s.heading);
  CHECK(n.speed == 0.0);
  CHECK(n.time == doctest::Approx(4.1));
}

TEST_CASE("straight motion advances along the heading") {
  const VehicleState s{0.0, 0.0, 0.4, 10.0, 0.0};
  const auto n = step_transition(s, 0.0, 0.0, 0.1, 2.8);
  CHECK(n.x == doctest::Approx(10.0 * std::cos(0.4) * 0.1));
  CHECK(n.y == doctest::Approx(10.0 * std::sin(0.4) * 0.1));
  CHECK(n.heading == 0.4);
}

TEST_CASE("steering changes heading by v/L tan(delta) dt") {
  const VehicleState s{0.0, 0.0, 0.0, 10.0, 0.0};
  const auto n = step_transition(s, 0.1, 0.0, 0.1, 2.8);
  CHECK(n.heading - s.heading == doctest::Approx(0.03584).epsilon(1e-3));
  CHECK(n.heading == doctest::Approx(10.0 / 2.8 * std::tan(0.1) * 0.1).epsilon(1e-14));
  const auto ref = rk4(s, 0.1, 0.0, 0.1, 0.001, 2.8);
  CHECK(std::abs(ref.heading - n.heading) < 1e-3);
  CHECK(std::abs(ref.x - n.x) < 1e-3);
}

TEST_CASE("speed never goes negative and heading stays wrapped") {
  Rng rng(3);
  VehicleState s{0.0, 0.0, 3.0, 0.5, 0.0};
  for (int i = 0; i < 500; ++i) {
    s = step_transition(s, rng.uniform(-0.5, 0.5), rng.uniform(-3.0, 2.0), 0.1, 2.8);
    REQUIRE(s.speed >= 0.0);
    REQUIRE(s.heading > -M_PI);
    REQUIRE(s.heading <= M_PI);
  }
}

TEST_CASE("config and control validation") {
  PlannerConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  auto bad = cfg;
  bad.policy_count = 1;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = cfg;
  bad.horizon_s = 6.05;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = cfg;
  bad.gamma_per_s = 1.5;
  CHECK_THROWS_AS(validate(bad), Error);
  CHECK(cfg.steps() == 60);

  CHECK_NOTHROW(validate(constant_controls(0.5, 2.0)));
  CHECK_THROWS_AS(validate(constant_controls(0.6, 0.0)), Error);
  CHECK_THROWS_AS(validate(constant_controls(0.0, -3.5)), Error);
}

TEST_CASE("action vector is steer then accel") {
  ControlSequence c;
  c.steer = {0.1, 0.2, 0.3, 0.4};
  c.accel = {1.0, 2.0, -1.0, -2.0};
  const auto a = action_vector(c);
  REQUIRE(a.size() == 8);
  CHECK(a[0] == 0.1);
  CHECK(a[3] == 0.4);
  CHECK(a[4] == 1.0);
  CHECK(a[7] == -2.0);
}

TEST_CASE("steering bound respects the lateral acceleration cap") {
  PlannerConfig cfg;
  CHECK(steer_bound(0.0, cfg) == doctest::Approx(kMaxSteer));
  for (double v : {3.0, 6.0, 10.0, 20.0}) {
    const double b = steer_bound(v, cfg);
    CHECK(b <= kMaxSteer);
    CHECK(v * v * std::tan(b) / cfg.wheelbase_m <= cfg.lat_accel_max + 1e-9);
  }
}

TEST_CASE("sample_policy_set is deterministic and within actuator bounds") {
  PlannerConfig cfg;
  cfg.policy_count = 2;
  const VehicleState s0{10.0, 0.0, 0.0, 6.0, 0.0};
  const auto a = sample_policy_set(straight_env(), s0, cfg, 11);
  const auto b = sample_policy_set(straight_env(), s0, cfg, 11);
  REQUIRE(a.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a[i].controls == b[i].controls);
    CHECK(a[i].pi_features == b[i].pi_features);
  }

  cfg.policy_count = 128;
  const auto set = sample_policy_set(straight_env(), s0, cfg, 12);
  for (const auto& p : set) {
    CHECK_NOTHROW(validate(p.controls));
    REQUIRE(p.states.size() == cfg.steps() + 1);
    CHECK(p.states.front() == s0);
  }
}

TEST_CASE("ideal driving yields zero penalties on the driving features") {
  PlannerConfig cfg;
  const auto& env = straight_env();
  const VehicleState s0{10.0, 0.0, 0.0, env.speed_limit(), 0.0};
  const auto p = make_policy(0, env, s0, constant_controls(0.0, 0.0), cfg);
  for (std::size_t i : {0, 1, 3, 4, 5, 6, 9, 10, 13}) {
    CAPTURE(i);
    CHECK(std::abs(p.pi_features[i]) < 1e-9);
  }
  CHECK(p.pi_features[2] == doctest::Approx(0.0));
  CHECK(p.pi_features[11] == 0.0);
  CHECK(p.pi_features[14] < 1e-6);
}

TEST_CASE("constant unit acceleration integrates to the horizon without discount") {
  PlannerConfig cfg;
  cfg.gamma_per_s = 1.0;
  const VehicleState s0{10.0, 0.0, 0.0, 1.0, 0.0};
  const auto p = make_policy(0, straight_env(), s0, constant_controls(0.0, 1.0), cfg);
  CHECK(std::abs(p.pi_features[0] - 6.0) < 1e-9);
}

TEST_CASE("discounted unit feature matches the closed-form integral") {
  PlannerConfig cfg;
  cfg.gamma_per_s = 0.95;
  const VehicleState s0{10.0, 0.0, 0.0, 1.0, 0.0};
  const auto p = make_policy(0, straight_env(), s0, constant_controls(0.0, 1.0), cfg);
  const double closed = (std::pow(0.95, 6.0) - 1.0) / std::log(0.95);
  CHECK(closed == doctest::Approx(5.1646).epsilon(1e-4));
  CHECK(std::abs(p.pi_features[0] - closed) < 1e-3);
}

TEST_CASE("lower discount never increases a feature") {
  PlannerConfig hi;
  PlannerConfig lo;
  lo.gamma_per_s = 0.8;
  const auto env = track::build_track(track::make_archetype_spec(track::Archetype::StopStartTurn, 4));
  const auto s0 = demo::track_start_state(env, 5.0);
  const auto set = sample_policy_set(env, s0, hi, 5);
  for (const auto& p : set) {
    const auto f_lo = integrate_pi_features(p, env, lo);
    for (std::size_t i = 0; i < kFeatureCount; ++i) REQUIRE(f_lo[i] <= p.pi_features[i] + 1e-12);
  }
}

TEST_CASE("every sampled policy has finite non-negative features") {
  PlannerConfig cfg;
  std::size_t count = 0;
  for (auto arch : {track::Archetype::SharpTurn, track::Archetype::StopStartTurn,
                    track::Archetype::StopStart, track::Archetype::LaneFollow}) {
    const auto env = track::build_track(track::make_archetype_spec(arch, 2));
    const auto cl = env.centerline();
    Rng rng(static_cast<std::uint64_t>(arch));
    for (int k = 0; k < 20; ++k) {
      const auto& c = cl[rng.index(cl.size())];
      const VehicleState s0{c.x + rng.uniform(-1.0, 1.0), c.y + rng.uniform(-1.0, 1.0),
                            c.heading + rng.uniform(-0.3, 0.3), rng.uniform(0.0, 10.0), 0.0};
      for (const auto& p : sample_policy_set(env, s0, cfg, rng.next_u64())) {
        for (double v : p.pi_features) {
          REQUIRE(std::isfinite(v));
          REQUIRE(v >= 0.0);
        }
        ++count;
      }
    }
  }
  CHECK(count >= 10000);
}

TEST_CASE("policy value is the negated dot product") {
  FeatureVector f{};
  RewardWeights zero;
  f.fill(0.7);
  CHECK(policy_value(f, zero) == 0.0);
  RewardWeights ones;
  ones.theta.fill(1.0);
  CHECK(policy_value(FeatureVector{}, ones) == 0.0);
  f.fill(0.1);
  CHECK(policy_value(f, ones) == doctest::Approx(-1.5).epsilon(1e-14));

  const std::vector<double> short_f(14, 0.0);
  try {
    (void)policy_value(std::span<const double>(short_f), std::span<const double>(ones.theta));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("optimal policy picks the best value, lowest id on ties") {
  RewardWeights w;
  w.theta.fill(1.0);
  const std::vector<FeatureVector> one{fixtures::single_feature(2.0)};
  CHECK(optimal_policy(std::span<const FeatureVector>(one), w) == 0);
  const std::vector<FeatureVector> tie{fixtures::single_feature(1.0), fixtures::single_feature(1.0)};
  CHECK(optimal_policy(std::span<const FeatureVector>(tie), w) == 0);

  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rows = fixtures::random_set(rng, 5);
    const auto theta = fixtures::random_theta(rng);
    std::size_t best = 0;
    double best_v = -1e300;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double v = 0.0;
      for (std::size_t k = 0; k < kFeatureCount; ++k) v -= rows[i][k] * theta[k];
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    REQUIRE(optimal_policy(std::span<const FeatureVector>(rows), theta) == best);
  }
  CHECK_THROWS_AS(optimal_policy(std::span<const FeatureVector>(), w), Error);
}

TEST_CASE("positive scaling of theta scales values and keeps the argmax") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rows = fixtures::random_set(rng, 16);
    const auto theta = fixtures::random_theta(rng);
    const double c = rng.uniform(0.01, 100.0);
    RewardWeights scaled = theta;
    for (auto& v : scaled.theta) v *= c;
    for (const auto& f : rows) {
      REQUIRE(policy_value(f, scaled) == doctest::Approx(c * policy_value(f, theta)).epsilon(1e-12));
    }
    REQUIRE(optimal_policy(std::span<const FeatureVector>(rows), scaled) ==
            optimal_policy(std::span<const FeatureVector>(rows), theta));
  }
}

TEST_CASE("single MPC cycle starts at the given state") {
  PlannerConfig cfg;
  cfg.policy_count = 8;
  RewardWeights w;
  w.theta.fill(0.5);
  FixedWeights provider(w);
  const VehicleState s0{10.0, 0.0, 0.0, 5.0, 0.0};
  const auto r = run_mpc(straight_env(), provider, 1, cfg, s0);
  REQUIRE(r.cycles.size() == 1);
  CHECK(r.cycles[0].start_state == s0);
  CHECK(r.cycles[0].demo_index < r.cycles[0].policies.size());
  CHECK(r.cycles[0].demo_pi_features == r.cycles[0].policies[r.cycles[0].demo_index].pi_features);
}

TEST_CASE("replay resets the vehicle onto the odometry each cycle") {
  PlannerConfig cfg;
  cfg.policy_count = 4;
  Trajectory zeta;
  zeta.dt = 0.1;
  for (int i = 0; i <= 200; ++i) {
    const double t = 0.1 * i;
    zeta.samples.push_back({5.0 + 4.0 * t, 0.2, 0.0, 4.0, t});
  }
  RewardWeights w;
  w.theta.fill(0.5);
  FixedWeights provider(w);
  MpcOptions opt;
  opt.replay = &zeta;
  const auto r = run_mpc(straight_env(), provider, 10, cfg, {}, opt);
  REQUIRE(r.cycles.size() == 10);
  for (std::size_t k = 0; k < r.cycles.size(); ++k) {
    const auto& s = r.cycles[k].start_state;
    const auto& z = zeta.samples[10 * k];
    CHECK(std::abs(s.x - z.x) < 1e-9);
    CHECK(std::abs(s.time - 1.0 * static_cast<double>(k)) < 1e-9);
  }
}

TEST_CASE("MPC is deterministic down to the serialized buffer") {
  PlannerConfig cfg;
  cfg.policy_count = 16;
  cfg.seed = 4;
  RewardWeights w;
  w.theta.fill(0.3);
  auto run = [&] {
    FixedWeights provider(w);
    demo::CycleBuffer b;
    b.planner = cfg;
    b.cycles = run_mpc(straight_env(), provider, 5, cfg, {10.0, 0.0, 0.0, 5.0, 0.0}).cycles;
    b.segments.push_back({fixtures::straight_spec(150.0), w, true});
    b.dropped_per_segment = {0};
    return demo::serialize_buffer(b);
  };
  CHECK(run() == run());
}

TEST_CASE("trajectory index lookup needs an exact sample") {
  Trajectory z;
  z.dt = 0.1;
  for (int i = 0; i < 5; ++i) z.samples.push_back({0, 0, 0, 0, 2.0 + 0.1 * i});
  CHECK(z.index_at(2.2) == 2u);
  CHECK_FALSE(z.index_at(2.25).has_value());
  CHECK_FALSE(z.index_at(1.9).has_value());
  CHECK_NOTHROW(validate(z));
  z.samples[3].time = 2.5;
  CHECK_THROWS_AS(validate(z), Error);
}
