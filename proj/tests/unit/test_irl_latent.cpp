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
#include <numeric>

#include "fixtures.hpp"
#include "pi_irl/irl_latent.hpp"

using namespace pi_irl;
using namespace pi_irl::irl;

namespace {

ClusterModel unit_model(std::vector<RewardWeights> thetas, std::vector<double> prior) {
  ClusterModel m;
  m.C = thetas.size();
  m.thetas = std::move(thetas);
  m.prior = std::move(prior);
  m.feature_scales.fill(1.0);
  return m;
}

RewardWeights scalar(double v) {
  RewardWeights t;
  t[0] = v;
  return t;
}

TrainConfig quiet(std::size_t epochs, double lr, std::uint64_t seed = 3) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.learning_rate = lr;
  cfg.evd_threshold = 0.0;
  cfg.seed = seed;
  cfg.batch_size = 4;
  return cfg;
}

}  // namespace

TEST_CASE("single cluster owns every demonstration") {
  Rng rng(1);
  const auto rows = fixtures::random_set(rng, 5);
  const std::vector<RewardWeights> th{fixtures::random_theta(rng)};
  const std::vector<double> prior{1.0};
  const auto r = e_step(rows, 2, th, prior);
  REQUIRE(r.beta.size() == 1);
  CHECK(r.beta[0] == 1.0);
}

TEST_CASE("identical clusters with a uniform prior split evenly") {
  Rng rng(2);
  const auto rows = fixtures::random_set(rng, 6);
  const auto t = fixtures::random_theta(rng);
  const std::vector<RewardWeights> th{t, t};
  const std::vector<double> prior{0.5, 0.5};
  const auto r = e_step(rows, 1, th, prior);
  CHECK(r.beta[0] == doctest::Approx(0.5));
  CHECK(r.beta[1] == doctest::Approx(0.5));
}

TEST_CASE("responsibilities match direct evaluation") {
  const std::vector<FeatureVector> rows{fixtures::single_feature(1.0), fixtures::single_feature(3.0)};
  const std::vector<RewardWeights> th{scalar(1.0), scalar(0.1)};
  const std::vector<double> prior{0.5, 0.5};
  const auto r = e_step(rows, 1, th, prior);
  const long double p1 = std::exp(-3.0L) / (std::exp(-1.0L) + std::exp(-3.0L));
  const long double p2 = std::exp(-0.3L) / (std::exp(-0.1L) + std::exp(-0.3L));
  CHECK(std::abs(r.beta[0] - static_cast<double>(p1 / (p1 + p2))) < 1e-15);
  CHECK(std::abs(r.beta[1] - static_cast<double>(p2 / (p1 + p2))) < 1e-15);

  // The cycle overload scales the features first.
  const auto m = unit_model(th, prior);
  const auto rc = e_step(fixtures::make_cycle(rows, 1), m);
  CHECK(rc.beta[0] == doctest::Approx(r.beta[0]).epsilon(1e-14));
}

TEST_CASE("beta and psi stay normalized under fuzz") {
  Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t C = 1 + rng.index(6);
    const std::size_t P = 2 + rng.index(20);
    const auto rows = fixtures::random_set(rng, P);
    std::vector<RewardWeights> th;
    std::vector<double> prior;
    for (std::size_t c = 0; c < C; ++c) {
      th.push_back(fixtures::random_theta(rng, -20.0, 20.0));
      prior.push_back(rng.uniform(0.0, 1.0));
    }
    const double z = std::accumulate(prior.begin(), prior.end(), 0.0);
    for (auto& p : prior) p /= z;
    std::vector<Responsibilities> batch;
    for (int b = 0; b < 4; ++b) {
      const auto r = e_step(rows, rng.index(P), th, prior);
      REQUIRE(std::abs(std::accumulate(r.beta.begin(), r.beta.end(), 0.0) - 1.0) <= 1e-9);
      for (double v : r.beta) REQUIRE(v >= 0.0);
      batch.push_back(r);
    }
    const auto psi = m_step_prior(batch);
    REQUIRE(std::abs(std::accumulate(psi.begin(), psi.end(), 0.0) - 1.0) <= 1e-9);
    for (double v : psi) REQUIRE(v >= 0.0);
  }
}

TEST_CASE("prior update is the mean responsibility") {
  const std::vector<Responsibilities> one{{{0.3, 0.7}}};
  CHECK(m_step_prior(one) == std::vector<double>{0.3, 0.7});
  const std::vector<Responsibilities> uniform{{{0.5, 0.5}}, {{0.5, 0.5}}};
  CHECK(m_step_prior(uniform) == std::vector<double>{0.5, 0.5});
  const std::vector<Responsibilities> three{{{1.0, 0.0}}, {{0.0, 1.0}}, {{1.0, 0.0}}};
  const auto psi = m_step_prior(three);
  CHECK(psi[0] == doctest::Approx(2.0 / 3.0));
  CHECK(psi[1] == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(m_step_prior(std::vector<Responsibilities>{}), Error);
}

TEST_CASE("latent gradient scales the linear gradient by beta") {
  const std::vector<FeatureVector> rows{fixtures::single_feature(0.0), fixtures::single_feature(2.0)};
  for (double v : latent_gradient(rows, 1, RewardWeights{}, 0.0)) CHECK(v == 0.0);
  const auto full = latent_gradient(rows, 1, RewardWeights{}, 1.0);
  CHECK(full == linear_gradient(rows, 1, RewardWeights{}));
  const auto half = latent_gradient(rows, 1, RewardWeights{}, 0.5);
  CHECK(half[0] == doctest::Approx(-0.5));
  CHECK_THROWS_AS(latent_gradient(rows, 1, RewardWeights{}, 1.5), Error);
}

TEST_CASE("mixture weights") {
  Rng rng(4);
  const auto a = fixtures::random_theta(rng);
  const auto b = fixtures::random_theta(rng);
  const auto one = unit_model({a}, {1.0});
  const auto prev = fixtures::make_cycle(fixtures::random_set(rng, 4), 0);
  CHECK(infer_mixture(&prev, one) == a);
  CHECK(infer_mixture(nullptr, one) == a);

  const auto two = unit_model({a, b}, {0.5, 0.5});
  CHECK(mix_weights(two, std::vector<double>{1.0, 0.0}) == a);
  const auto mix = mix_weights(two, std::vector<double>{0.25, 0.75});
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    CHECK(mix[k] == doctest::Approx(0.25 * a[k] + 0.75 * b[k]).epsilon(1e-14));
  }
  const auto prior_mix = infer_mixture(nullptr, two);
  for (std::size_t k = 0; k < kFeatureCount; ++k) CHECK(prior_mix[k] == doctest::Approx(0.5 * (a[k] + b[k])));

  auto scaled = two;
  scaled.feature_scales.fill(2.0);
  CHECK(mix_weights(scaled, std::vector<double>{1.0, 0.0})[3] == doctest::Approx(a[3] / 2.0));
}

TEST_CASE("online mixture uses the previous optimal policy") {
  const std::vector<FeatureVector> rows{fixtures::single_feature(1.0), fixtures::single_feature(3.0)};
  auto prev = fixtures::make_cycle(rows, 0);
  prev.selected_index = 1;
  const auto m = unit_model({scalar(1.0), scalar(0.1)}, {0.5, 0.5});
  const auto r = e_step(rows, 1, m.thetas, m.prior);
  const auto expect = mix_weights(m, r.beta);
  LatentMixtureProvider provider(m);
  CHECK(provider.next_weights(&prev) == expect);
  CHECK(provider.next_weights(nullptr) == infer_mixture(nullptr, m));
}

TEST_CASE("one cluster reproduces linear training exactly") {
  const auto buffer = fixtures::random_buffer(5, 24, 8);
  for (std::size_t steps : {1u, 3u}) {
    auto cfg = quiet(12, 0.05);
    cfg.steps_per_batch = steps;
    LatentConfig lc;
    lc.m_steps = steps;
    lc.init_low = cfg.init_low;
    lc.init_high = cfg.init_high;
    const auto lin = train_linear(buffer, cfg);
    const auto lat = train_latent(buffer, 1, cfg, lc);
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      CHECK(std::abs(lat.model.thetas[0][k] - lin.model.theta[k]) <= 1e-6);
    }
    CHECK(lat.model.prior == std::vector<double>{1.0});
  }
}

TEST_CASE("EM objective never decreases at a small learning rate") {
  const auto buffer = fixtures::random_buffer(6, 16, 6);
  LatentConfig lc;
  lc.start = LatentStart::EStep;
  std::size_t violations = 0;
  double prev = -INFINITY;
  for (std::size_t epochs = 1; epochs <= 25; ++epochs) {
    const auto r = train_latent(buffer, 2, quiet(epochs, 1e-3), lc);
    const double obj = em_objective(buffer, r.model);
    if (obj < prev - 1e-6) ++violations;
    prev = obj;
  }
  CHECK(violations == 0);
}

TEST_CASE("gap clustering separates orthogonal feature gaps") {
  std::vector<detail::ScaledCycle> cycles;
  Rng rng(7);
  for (int i = 0; i < 30; ++i) {
    detail::ScaledCycle c;
    // Demos that avoid feature 0 in the first group and feature 5 in the second.
    const std::size_t axis = i < 15 ? 0 : 5;
    for (int p = 0; p < 6; ++p) {
      FeatureVector f{};
      f[axis] = 1.0 + rng.uniform(0.0, 0.1);
      f[axis == 0 ? 5 : 0] = 0.01 * rng.uniform01();
      c.features.push_back(f);
    }
    c.features[2][axis] = 0.0;
    c.demo = 2;
    cycles.push_back(c);
  }
  const auto labels = gap_clusters(cycles, 2, 11);
  for (int i = 1; i < 15; ++i) CHECK(labels[i] == labels[0]);
  for (int i = 16; i < 30; ++i) CHECK(labels[i] == labels[15]);
  CHECK(labels[0] != labels[15]);

  CHECK(gap_clusters(cycles, 1, 11) == std::vector<std::size_t>(30, 0));
  CHECK(gap_clusters(cycles, 2, 11) == labels);
  CHECK_THROWS_AS(gap_clusters({}, 2, 1), Error);
  CHECK_THROWS_AS(gap_clusters(cycles, 0, 1), Error);
}

TEST_CASE("training output shapes and determinism") {
  const auto buffer = fixtures::random_buffer(8, 20, 6, 2);
  const auto a = train_latent(buffer, 3, quiet(4, 0.01));
  const auto b = train_latent(buffer, 3, quiet(4, 0.01));
  CHECK(serialize_model(a.model) == serialize_model(b.model));
  CHECK(serialize_log(a.log) == serialize_log(b.log));
  CHECK(a.log.size() == 5);
  CHECK(a.responsibilities.size() == 20);
  CHECK_NOTHROW(validate(a.model));
  for (const auto& e : a.log) {
    CHECK(std::abs(std::accumulate(e.prior.begin(), e.prior.end(), 0.0) - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS(train_latent(buffer, 0, quiet(1, 0.01)), Error);
}

TEST_CASE("a starved cluster gets reseeded") {
  const auto buffer = fixtures::random_buffer(9, 12, 6);
  LatentConfig lc;
  lc.start = LatentStart::EStep;
  lc.collapse_prior = 1.01;  // every cluster counts as collapsed
  lc.collapse_epochs = 2;
  const auto r = train_latent(buffer, 2, quiet(4, 0.01), lc);
  CHECK(r.log[1].reseeded == 0);
  CHECK(r.log[2].reseeded == 2);
}

TEST_CASE("model validation and file round-trip") {
  auto m = unit_model({scalar(1.0), scalar(2.0)}, {0.4, 0.6});
  CHECK_NOTHROW(validate(m));
  const auto text = serialize_model(m);
  const auto back = parse_latent_model(text);
  CHECK(serialize_model(back) == text);
  CHECK(back.C == 2);

  auto bad = m;
  bad.prior = {0.4, 0.4};
  CHECK_THROWS_AS(validate(bad), Error);
  bad = m;
  bad.prior = {1.2, -0.2};
  CHECK_THROWS_AS(validate(bad), Error);
  bad = m;
  bad.thetas.pop_back();
  CHECK_THROWS_AS(validate(bad), Error);
  auto wrong = text;
  wrong.replace(wrong.find("\"version\":1"), 11, "\"version\":3");
  CHECK_THROWS_AS(parse_latent_model(wrong), Error);
}
