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

#include <algorithm>
#include <cmath>

#include "pi_irl/common.hpp"
#include "pi_irl/neuralnet.hpp"

using namespace pi_irl;
using namespace pi_irl::nn;

namespace {

CycleInput random_input(Rng& rng) {
  CycleInput in;
  in.values.resize(kPolicyRows * kInputColumns);
  for (auto& v : in.values) v = rng.uniform(-1.0, 2.0);
  return in;
}

// Straight-line reference: per-row conv stack with explicit loops, then the dense stack.
FeatureVector naive_forward(const NetworkParams& p, const CycleInput& in) {
  std::vector<double> flat(kDenseWidths.front());
  for (std::size_t r = 0; r < kPolicyRows; ++r) {
    std::vector<std::vector<double>> x(1, std::vector<double>(kInputColumns));
    for (std::size_t j = 0; j < kInputColumns; ++j) x[0][j] = in.values[r * kInputColumns + j];
    for (std::size_t blk = 0; blk < kConvBlocks; ++blk) {
      for (std::size_t half = 0; half < 2; ++half) {
        const auto& L = p.conv[2 * blk + half];
        const std::size_t len = x[0].size();
        std::vector<std::vector<double>> y(L.out_channels, std::vector<double>(len));
        for (std::size_t o = 0; o < L.out_channels; ++o) {
          for (std::size_t pos = 0; pos < len; ++pos) {
            double s = L.bias[o];
            for (std::size_t c = 0; c < L.in_channels; ++c) {
              for (std::size_t k = 0; k < kKernel; ++k) {
                const long src = static_cast<long>(pos + k) - 1;
                if (src < 0 || src >= static_cast<long>(len)) continue;
                s += L.weight[(o * L.in_channels + c) * kKernel + k] * x[c][static_cast<std::size_t>(src)];
              }
            }
            y[o][pos] = s > 0.0 ? s : 0.0;
          }
        }
        x = std::move(y);
      }
      const std::size_t len = x[0].size();
      if (len >= 2) {
        for (auto& ch : x) {
          std::vector<double> pooled(len / 2);
          for (std::size_t j = 0; j < len / 2; ++j) pooled[j] = 0.5 * (ch[2 * j] + ch[2 * j + 1]);
          ch = std::move(pooled);
        }
      }
    }
    REQUIRE(x[0].size() == 1);
    for (std::size_t c = 0; c < x.size(); ++c) flat[r * x.size() + c] = x[c][0];
  }
  std::vector<double> a = flat;
  for (std::size_t l = 0; l < p.dense.size(); ++l) {
    const auto& D = p.dense[l];
    std::vector<double> z(D.out);
    for (std::size_t o = 0; o < D.out; ++o) {
      double s = D.bias[o];
      for (std::size_t i = 0; i < D.in; ++i) s += D.weight[o * D.in + i] * a[i];
      z[o] = (l + 1 < p.dense.size() && s < 0.0) ? 0.0 : s;
    }
    a = std::move(z);
  }
  FeatureVector out{};
  std::copy(a.begin(), a.end(), out.begin());
  return out;
}

double projected(const NetworkParams& p, const CycleInput& in, const FeatureVector& g) {
  const auto y = forward(p, in);
  double s = 0.0;
  for (std::size_t k = 0; k < kOutputs; ++k) s += y[k] * g[k];
  return s;
}

NetworkParams scalar_params(double value) {
  NetworkParams p;
  DenseLayer d;
  d.in = 1;
  d.out = 1;
  d.weight = {value};
  p.dense.push_back(d);
  return p;
}

}  // namespace

TEST_CASE("architecture shapes and parameter count") {
  const auto p = zero_params();
  CHECK(p.conv.size() == 10);
  CHECK(p.dense.size() == 8);
  std::size_t expected = 0;
  std::size_t cin = 1;
  for (std::size_t blk = 0; blk < kConvBlocks; ++blk) {
    for (int half = 0; half < 2; ++half) {
      expected += kBlockChannels[blk] * cin * kKernel + kBlockChannels[blk];
      cin = kBlockChannels[blk];
    }
  }
  for (std::size_t l = 0; l + 1 < kDenseWidths.size(); ++l) {
    expected += kDenseWidths[l] * kDenseWidths[l + 1] + kDenseWidths[l + 1];
  }
  CHECK(parameter_count(p) == expected);
  CHECK(tensors(p).size() == 36);
  CHECK_NOTHROW(validate(p));
}

TEST_CASE("pooled length chain") {
  std::size_t len = kInputColumns;
  std::vector<std::size_t> chain;
  for (std::size_t b = 0; b < kConvBlocks; ++b) chain.push_back(len = pooled_length(len));
  CHECK(chain == std::vector<std::size_t>{11, 5, 2, 1, 1});
  CHECK(pooled_length(1) == 1);
  CHECK(pooled_length(0) == 0);
}

TEST_CASE("parameter validation") {
  auto p = zero_params();
  p.dense[3].weight[7] = std::nan("");
  try {
    validate(p);
    FAIL("expected NonFiniteInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteInput);
  }
  p = zero_params();
  p.conv[2].weight.pop_back();
  try {
    validate(p);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("zero network outputs zero, last bias passes through") {
  Rng rng(1);
  const auto in = random_input(rng);
  auto p = zero_params();
  for (double v : forward(p, in)) CHECK(v == 0.0);
  for (std::size_t k = 0; k < kOutputs; ++k) p.dense.back().bias[k] = 0.1 * static_cast<double>(k) - 0.4;
  const auto y = forward(p, in);
  for (std::size_t k = 0; k < kOutputs; ++k) CHECK(y[k] == p.dense.back().bias[k]);
}

TEST_CASE("forward matches the naive reference implementation") {
  Rng rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    auto p = init_params(rng.next_u64());
    for (auto t : tensors(p)) {
      for (double& v : t) v += 0.01 * rng.uniform(-1.0, 1.0);
    }
    const auto in = random_input(rng);
    const auto fast = forward(p, in);
    const auto slow = naive_forward(p, in);
    for (std::size_t k = 0; k < kOutputs; ++k) {
      worst = std::max(worst, std::abs(fast[k] - slow[k]) / std::max(1.0, std::abs(slow[k])));
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("input validation") {
  CycleInput in;
  in.values.assign(10, 0.0);
  CHECK_THROWS_AS(forward(zero_params(), in), Error);
  in.values.assign(kPolicyRows * kInputColumns, 0.0);
  in.values[5] = INFINITY;
  CHECK_THROWS_AS(forward(zero_params(), in), Error);
}

TEST_CASE("batched forward equals per-item forward") {
  Rng rng(3);
  const auto p = init_params(4);
  std::vector<CycleInput> batch{random_input(rng), random_input(rng), random_input(rng)};
  const auto r = forward(p, batch);
  REQUIRE(r.outputs.size() == 3);
  for (std::size_t b = 0; b < 3; ++b) {
    const auto single = forward(p, batch[b]);
    for (std::size_t k = 0; k < kOutputs; ++k) CHECK(r.outputs[b][k] == doctest::Approx(single[k]).epsilon(1e-12));
  }
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
  Rng rng(4);
  const auto p = init_params(5);
  const std::vector<CycleInput> batch{random_input(rng)};
  const auto r = forward(p, batch);
  const std::vector<FeatureVector> seed(1);
  const auto g = backward(p, r.cache, seed);
  for (auto t : tensors(g)) {
    for (double v : t) REQUIRE(v == 0.0);
  }
}

TEST_CASE("backward refuses a missing or mismatched cache") {
  const auto p = zero_params();
  const std::vector<FeatureVector> seed(2);
  try {
    (void)backward(p, ForwardCache{}, seed);
    FAIL("expected MissingCache");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingCache);
  }
  Rng rng(5);
  const std::vector<CycleInput> one{random_input(rng)};
  const auto r = forward(p, one);
  CHECK_THROWS_AS(backward(p, r.cache, seed), Error);
}

TEST_CASE("gradient check against central differences on every tensor") {
  Rng rng(6);
  const auto p = init_params(7);
  const auto in = random_input(rng);
  FeatureVector g{};
  for (auto& v : g) v = rng.uniform(-1.0, 1.0);
  const std::vector<CycleInput> batch{in};
  const auto r = forward(p, batch);
  const std::vector<FeatureVector> seed{g};
  const auto grads = backward(p, r.cache, seed);

  auto probe = p;
  auto pt = tensors(probe);
  const auto gt = tensors(grads);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t t = 0; t < pt.size(); ++t) {
    for (int s = 0; s < 3; ++s) {
      const std::size_t i = rng.index(pt[t].size());
      const double keep = pt[t][i];
      pt[t][i] = keep + h;
      const double up = projected(probe, in, g);
      pt[t][i] = keep - h;
      const double dn = projected(probe, in, g);
      pt[t][i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double a = gt[t][i];
      worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("batch gradients are sums of per-item gradients") {
  Rng rng(8);
  const auto p = init_params(9);
  const std::vector<CycleInput> batch{random_input(rng), random_input(rng)};
  std::vector<FeatureVector> seeds(2);
  for (auto& s : seeds) {
    for (auto& v : s) v = rng.uniform(-1.0, 1.0);
  }
  const auto joint = backward(p, forward(p, batch).cache, seeds);
  auto one = [&](std::size_t b) {
    const std::vector<CycleInput> single{batch[b]};
    const std::vector<FeatureVector> seed{seeds[b]};
    return backward(p, forward(p, single).cache, seed);
  };
  const auto g0 = one(0);
  const auto g1 = one(1);
  const auto tj = tensors(joint);
  const auto t0 = tensors(g0);
  const auto t1 = tensors(g1);
  double worst = 0.0;
  for (std::size_t t = 0; t < tj.size(); ++t) {
    for (std::size_t i = 0; i < tj[t].size(); i += 97) {
      worst = std::max(worst, std::abs(tj[t][i] - t0[t][i] - t1[t][i]));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("He-uniform initialisation") {
  const auto a = init_params(11);
  const auto b = init_params(11);
  CHECK(tensors(a)[5][3] == tensors(b)[5][3]);
  for (std::size_t t = 0; t < tensors(a).size(); ++t) {
    const auto x = tensors(a)[t];
    const auto y = tensors(b)[t];
    REQUIRE(std::equal(x.begin(), x.end(), y.begin()));
  }
  CHECK(tensors(init_params(12))[0][0] != tensors(a)[0][0]);

  auto check_layer = [](std::span<const double> w, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    double mean = 0.0;
    double sq = 0.0;
    for (double v : w) {
      REQUIRE(std::abs(v) <= bound);
      mean += v;
      sq += v * v;
    }
    const double n = static_cast<double>(w.size());
    mean /= n;
    const double var = sq / n - mean * mean;
    const double expected = 2.0 / static_cast<double>(fan_in);
    // Standard error of the variance of a uniform sample is about 0.75 * expected / sqrt(n).
    CHECK(std::abs(var - expected) <= 6.0 * 0.75 * expected / std::sqrt(n));
  };
  for (const auto& c : a.conv) {
    check_layer(c.weight, c.in_channels * kKernel);
    for (double v : c.bias) CHECK(v == 0.0);
  }
  for (const auto& d : a.dense) {
    check_layer(d.weight, d.in);
    for (double v : d.bias) CHECK(v == 0.0);
  }
}

TEST_CASE("Adam leaves parameters alone on a zero gradient") {
  auto p = init_params(13);
  const auto before = p;
  auto opt = make_optimizer(p, 1e-3);
  apply_update(p, zero_params(), opt);
  CHECK(opt.step == 1);
  const auto a = tensors(p);
  const auto b = tensors(before);
  for (std::size_t t = 0; t < a.size(); ++t) REQUIRE(std::equal(a[t].begin(), a[t].end(), b[t].begin()));
}

TEST_CASE("Adam step size approaches the learning rate under a constant gradient") {
  for (double grad : {0.003, 1.0, 250.0}) {
    auto p = scalar_params(0.0);
    const auto g = scalar_params(grad);
    auto opt = make_optimizer(p, 0.01);
    double last = 0.0;
    double step = 0.0;
    for (int i = 0; i < 500; ++i) {
      apply_update(p, g, opt);
      step = p.dense[0].weight[0] - last;
      last = p.dense[0].weight[0];
    }
    CAPTURE(grad);
    CHECK(std::abs(step - 0.01) < 1e-5);
    CHECK(step > 0.0);
  }
  auto p = scalar_params(0.0);
  auto opt = make_optimizer(p, 0.01);
  CHECK_THROWS_AS(apply_update(p, zero_params(), opt), Error);
}
