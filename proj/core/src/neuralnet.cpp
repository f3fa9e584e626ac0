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

#include "pi_irl/neuralnet.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>

namespace pi_irl::nn {

namespace {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<Mat>;
using CMapMat = Eigen::Map<const Mat>;
using CMapRow = Eigen::Map<const RowMat>;
using MapRow = Eigen::Map<RowMat>;

constexpr std::array<std::size_t, kConvBlocks + 1> block_lengths() {
  std::array<std::size_t, kConvBlocks + 1> l{};
  l[0] = kInputColumns;
  for (std::size_t b = 0; b < kConvBlocks; ++b) l[b + 1] = pooled_length(l[b]);
  return l;
}

constexpr auto kLengths = block_lengths();
static_assert(kLengths[1] == 11 && kLengths[2] == 5 && kLengths[3] == 2 && kLengths[4] == 1 &&
              kLengths[5] == 1);
static_assert(kBlockChannels.back() * kPolicyRows == kDenseWidths.front());

std::size_t conv_in_channels(std::size_t layer) {
  if (layer == 0) return 1;
  return layer % 2 == 1 ? kBlockChannels[layer / 2] : kBlockChannels[layer / 2 - 1];
}

/// Rows k*C_in + c of column j hold input channel c at position pos + k - 1.
Mat im2col(const CMapMat& a, std::size_t signals, std::size_t length) {
  const auto cin = static_cast<Eigen::Index>(a.rows());
  Mat col = Mat::Zero(cin * static_cast<Eigen::Index>(kKernel), a.cols());
  for (std::size_t r = 0; r < signals; ++r) {
    for (std::size_t pos = 0; pos < length; ++pos) {
      const auto j = static_cast<Eigen::Index>(r * length + pos);
      for (std::size_t k = 0; k < kKernel; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(pos + k) - 1;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(length)) continue;
        col.block(static_cast<Eigen::Index>(k) * cin, j, cin, 1) = a.col(j + src - static_cast<Eigen::Index>(pos));
      }
    }
  }
  return col;
}

void col2im_add(const Mat& dcol, MapMat& da, std::size_t signals, std::size_t length) {
  const auto cin = da.rows();
  for (std::size_t r = 0; r < signals; ++r) {
    for (std::size_t pos = 0; pos < length; ++pos) {
      const auto j = static_cast<Eigen::Index>(r * length + pos);
      for (std::size_t k = 0; k < kKernel; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(pos + k) - 1;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(length)) continue;
        da.col(j + src - static_cast<Eigen::Index>(pos)) += dcol.block(static_cast<Eigen::Index>(k) * cin, j, cin, 1);
      }
    }
  }
}

/// (C_out, kKernel * C_in) with column k*C_in + c.
Mat conv_matrix(const ConvLayer& layer) {
  Mat w(static_cast<Eigen::Index>(layer.out_channels),
        static_cast<Eigen::Index>(kKernel * layer.in_channels));
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    for (std::size_t c = 0; c < layer.in_channels; ++c) {
      for (std::size_t k = 0; k < kKernel; ++k) {
        w(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(k * layer.in_channels + c)) =
            layer.weight[(o * layer.in_channels + c) * kKernel + k];
      }
    }
  }
  return w;
}

std::vector<double> to_vector(const Mat& m) { return std::vector<double>(m.data(), m.data() + m.size()); }

Mat average_pool(const Mat& a, std::size_t signals, std::size_t length) {
  const std::size_t out_len = pooled_length(length);
  if (out_len == length) return a;
  Mat p(a.rows(), static_cast<Eigen::Index>(signals * out_len));
  for (std::size_t r = 0; r < signals; ++r) {
    for (std::size_t j = 0; j < out_len; ++j) {
      p.col(static_cast<Eigen::Index>(r * out_len + j)) =
          0.5 * (a.col(static_cast<Eigen::Index>(r * length + 2 * j)) +
                 a.col(static_cast<Eigen::Index>(r * length + 2 * j + 1)));
    }
  }
  return p;
}

Mat average_pool_backward(const Mat& dp, std::size_t signals, std::size_t length) {
  const std::size_t out_len = pooled_length(length);
  if (out_len == length) return dp;
  Mat da = Mat::Zero(dp.rows(), static_cast<Eigen::Index>(signals * length));
  for (std::size_t r = 0; r < signals; ++r) {
    for (std::size_t j = 0; j < out_len; ++j) {
      const auto g = 0.5 * dp.col(static_cast<Eigen::Index>(r * out_len + j));
      da.col(static_cast<Eigen::Index>(r * length + 2 * j)) = g;
      da.col(static_cast<Eigen::Index>(r * length + 2 * j + 1)) = g;
    }
  }
  return da;
}

void check_same_shapes(const NetworkParams& a, const NetworkParams& b) {
  const auto ta = tensors(a);
  const auto tb = tensors(b);
  if (ta.size() != tb.size()) throw Error(ErrorCode::ShapeMismatch, "tensor count differs");
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].size() != tb[i].size()) throw Error(ErrorCode::ShapeMismatch, "tensor size differs");
  }
}

}  // namespace

NetworkParams zero_params() {
  NetworkParams p;
  for (std::size_t l = 0; l < 2 * kConvBlocks; ++l) {
    ConvLayer c;
    c.in_channels = conv_in_channels(l);
    c.out_channels = kBlockChannels[l / 2];
    c.weight.assign(c.out_channels * c.in_channels * kKernel, 0.0);
    c.bias.assign(c.out_channels, 0.0);
    p.conv.push_back(std::move(c));
  }
  for (std::size_t l = 0; l + 1 < kDenseWidths.size(); ++l) {
    DenseLayer d;
    d.in = kDenseWidths[l];
    d.out = kDenseWidths[l + 1];
    d.weight.assign(d.in * d.out, 0.0);
    d.bias.assign(d.out, 0.0);
    p.dense.push_back(std::move(d));
  }
  return p;
}

NetworkParams init_params(std::uint64_t seed) {
  NetworkParams p = zero_params();
  std::uint64_t stream = 0;
  auto fill = [&](std::vector<double>& w, std::size_t fan_in) {
    Rng rng(mix_seed(seed, stream++));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& x : w) x = rng.uniform(-bound, bound);
  };
  for (auto& c : p.conv) fill(c.weight, c.in_channels * kKernel);
  for (auto& d : p.dense) fill(d.weight, d.in);
  return p;
}

void validate(const NetworkParams& params) {
  const NetworkParams ref = zero_params();
  if (params.conv.size() != ref.conv.size() || params.dense.size() != ref.dense.size()) {
    throw Error(ErrorCode::ShapeMismatch, "layer count differs from the architecture");
  }
  for (std::size_t l = 0; l < ref.conv.size(); ++l) {
    if (params.conv[l].in_channels != ref.conv[l].in_channels ||
        params.conv[l].out_channels != ref.conv[l].out_channels) {
      throw Error(ErrorCode::ShapeMismatch, "conv channel plan differs");
    }
  }
  for (std::size_t l = 0; l < ref.dense.size(); ++l) {
    if (params.dense[l].in != ref.dense[l].in || params.dense[l].out != ref.dense[l].out) {
      throw Error(ErrorCode::ShapeMismatch, "dense width plan differs");
    }
  }
  check_same_shapes(params, ref);
  for (const auto& t : tensors(params)) {
    for (double x : t) {
      if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "non-finite network parameter");
    }
  }
}

std::size_t parameter_count(const NetworkParams& params) {
  std::size_t n = 0;
  for (const auto& t : tensors(params)) n += t.size();
  return n;
}

std::vector<std::span<double>> tensors(NetworkParams& params) {
  std::vector<std::span<double>> out;
  for (auto& c : params.conv) {
    out.emplace_back(c.weight);
    out.emplace_back(c.bias);
  }
  for (auto& d : params.dense) {
    out.emplace_back(d.weight);
    out.emplace_back(d.bias);
  }
  return out;
}

std::vector<std::span<const double>> tensors(const NetworkParams& params) {
  std::vector<std::span<const double>> out;
  for (const auto& c : params.conv) {
    out.emplace_back(c.weight);
    out.emplace_back(c.bias);
  }
  for (const auto& d : params.dense) {
    out.emplace_back(d.weight);
    out.emplace_back(d.bias);
  }
  return out;
}

void validate(const CycleInput& input) {
  if (input.values.size() != kPolicyRows * kInputColumns) {
    throw Error(ErrorCode::ShapeMismatch, "network input must be 64 x 23");
  }
  for (double x : input.values) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "non-finite network input");
  }
}

ForwardResult forward(const NetworkParams& params, std::span<const CycleInput> inputs) {
  if (params.conv.size() != 2 * kConvBlocks || params.dense.size() + 1 != kDenseWidths.size()) {
    throw Error(ErrorCode::ShapeMismatch, "network layer count differs from the architecture");
  }
  for (const auto& in : inputs) validate(in);
  const std::size_t B = inputs.size();
  const std::size_t signals = B * kPolicyRows;
  ForwardResult res;
  res.cache.batch = B;

  // One channel, one column per (signal, position).
  Mat a(1, static_cast<Eigen::Index>(signals * kInputColumns));
  for (std::size_t b = 0; b < B; ++b) {
    std::copy(inputs[b].values.begin(), inputs[b].values.end(),
              a.data() + b * kPolicyRows * kInputColumns);
  }

  for (std::size_t blk = 0; blk < kConvBlocks; ++blk) {
    const std::size_t len = kLengths[blk];
    for (std::size_t half = 0; half < 2; ++half) {
      const auto& layer = params.conv[2 * blk + half];
      res.cache.conv_in.push_back(to_vector(a));
      const CMapMat in(res.cache.conv_in.back().data(), a.rows(), a.cols());
      Mat z = conv_matrix(layer) * im2col(in, signals, len);
      z.colwise() += Eigen::Map<const Eigen::VectorXd>(layer.bias.data(), static_cast<Eigen::Index>(layer.bias.size()));
      a = z.cwiseMax(0.0);
      res.cache.conv_out.push_back(to_vector(a));
    }
    a = average_pool(a, signals, len);
  }

  // a is 64 x (B * 64); its memory is each cycle's flatten in policy order.
  Mat x = Eigen::Map<const Mat>(a.data(), static_cast<Eigen::Index>(kDenseWidths.front()),
                                static_cast<Eigen::Index>(B));
  for (std::size_t l = 0; l < params.dense.size(); ++l) {
    const auto& d = params.dense[l];
    res.cache.dense_in.push_back(to_vector(x));
    Mat z = CMapRow(d.weight.data(), static_cast<Eigen::Index>(d.out), static_cast<Eigen::Index>(d.in)) * x;
    z.colwise() += Eigen::Map<const Eigen::VectorXd>(d.bias.data(), static_cast<Eigen::Index>(d.out));
    x = (l + 1 < params.dense.size()) ? Mat(z.cwiseMax(0.0)) : z;
  }
  res.outputs.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < kOutputs; ++k) {
      res.outputs[b][k] = x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b));
    }
  }
  return res;
}

FeatureVector forward(const NetworkParams& params, const CycleInput& input) {
  return forward(params, std::span<const CycleInput>(&input, 1)).outputs.front();
}

namespace {
// Fixed summation order, independent of buffer alignment.
void row_sums(const Mat& m, std::vector<double>& out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] += m(r, c);
  }
}
}  // namespace

NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                       std::span<const FeatureVector> output_grads) {
  if (cache.batch == 0 || cache.batch != output_grads.size() ||
      cache.conv_in.size() != params.conv.size() || cache.conv_out.size() != params.conv.size() ||
      cache.dense_in.size() != params.dense.size()) {
    throw Error(ErrorCode::MissingCache, "forward cache missing or from a different batch");
  }
  const std::size_t B = cache.batch;
  const std::size_t signals = B * kPolicyRows;
  NetworkParams grads = zero_params();

  Mat dy(static_cast<Eigen::Index>(kOutputs), static_cast<Eigen::Index>(B));
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < kOutputs; ++k) {
      dy(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b)) = output_grads[b][k];
    }
  }

  for (std::size_t l = params.dense.size(); l-- > 0;) {
    const auto& d = params.dense[l];
    const auto in = static_cast<Eigen::Index>(d.in);
    const auto out = static_cast<Eigen::Index>(d.out);
    const CMapMat x(cache.dense_in[l].data(), in, static_cast<Eigen::Index>(B));
    MapRow(grads.dense[l].weight.data(), out, in).noalias() = dy * x.transpose();
    row_sums(dy, grads.dense[l].bias);
    Mat dx = CMapRow(d.weight.data(), out, in).transpose() * dy;
    // ReLU gate of the previous layer; x is its post-activation.
    if (l > 0) dx = dx.cwiseProduct((x.array() > 0.0).cast<double>().matrix());
    dy = std::move(dx);
  }

  // dy is the gradient of the flattened conv output, i.e. 64 x (B * 64) in memory.
  Mat da = Eigen::Map<const Mat>(dy.data(), static_cast<Eigen::Index>(kBlockChannels.back()),
                                 static_cast<Eigen::Index>(signals));
  for (std::size_t blk = kConvBlocks; blk-- > 0;) {
    const std::size_t len = kLengths[blk];
    da = average_pool_backward(da, signals, len);
    for (std::size_t half = 2; half-- > 0;) {
      const std::size_t l = 2 * blk + half;
      const auto& layer = params.conv[l];
      const auto cin = static_cast<Eigen::Index>(layer.in_channels);
      const auto cols = static_cast<Eigen::Index>(signals * len);
      const CMapMat out(cache.conv_out[l].data(), static_cast<Eigen::Index>(layer.out_channels), cols);
      const Mat dz = da.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
      const CMapMat in(cache.conv_in[l].data(), cin, cols);
      const Mat col = im2col(in, signals, len);
      const Mat dw = dz * col.transpose();
      auto& g = grads.conv[l];
      for (std::size_t o = 0; o < layer.out_channels; ++o) {
        for (std::size_t c = 0; c < layer.in_channels; ++c) {
          for (std::size_t k = 0; k < kKernel; ++k) {
            g.weight[(o * layer.in_channels + c) * kKernel + k] =
                dw(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(k * layer.in_channels + c));
          }
        }
      }
      row_sums(dz, g.bias);
      if (l == 0) break;
      const Mat dcol = conv_matrix(layer).transpose() * dz;
      Mat dprev = Mat::Zero(cin, cols);
      MapMat dmap(dprev.data(), cin, cols);
      col2im_add(dcol, dmap, signals, len);
      da = std::move(dprev);
    }
  }
  return grads;
}

OptimizerState make_optimizer(const NetworkParams& params, double learning_rate) {
  OptimizerState s;
  s.learning_rate = learning_rate;
  const std::size_t n = parameter_count(params);
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

void apply_update(NetworkParams& params, const NetworkParams& grads, OptimizerState& opt) {
  check_same_shapes(params, grads);
  const std::size_t n = parameter_count(params);
  if (opt.m.size() != n || opt.v.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match the parameters");
  }
  ++opt.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  auto pt = tensors(params);
  const auto gt = tensors(grads);
  std::size_t off = 0;
  for (std::size_t t = 0; t < pt.size(); ++t) {
    for (std::size_t i = 0; i < pt[t].size(); ++i, ++off) {
      const double g = gt[t][i];
      opt.m[off] = opt.beta1 * opt.m[off] + (1.0 - opt.beta1) * g;
      opt.v[off] = opt.beta2 * opt.v[off] + (1.0 - opt.beta2) * g * g;
      const double mh = opt.m[off] / c1;
      const double vh = opt.v[off] / c2;
      pt[t][i] += opt.learning_rate * mh / (std::sqrt(vh) + opt.epsilon);
    }
  }
}

}  // namespace pi_irl::nn
