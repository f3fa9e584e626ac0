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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pi_irl/common.hpp"

namespace pi_irl::nn {

inline constexpr std::size_t kPolicyRows = 64;
inline constexpr std::size_t kInputColumns = 23;  // 15 PI features then 8 actions
inline constexpr std::size_t kKernel = 3;
inline constexpr std::size_t kConvBlocks = 5;
inline constexpr std::size_t kOutputs = kFeatureCount;

/// Output channels of each block; both convolutions in a block share it.
inline constexpr std::array<std::size_t, kConvBlocks> kBlockChannels{8, 16, 32, 64, 64};
inline constexpr std::array<std::size_t, 9> kDenseWidths{4096, 1024, 512, 256, 128, 64, 32, 32, 15};

/// Signal length after each block's pool.
constexpr std::size_t pooled_length(std::size_t length) { return length < 2 ? length : length / 2; }

struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<double> weight;  // [out][in][kKernel]
  std::vector<double> bias;    // [out]
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // [out][in]
  std::vector<double> bias;    // [out]
};

/// Also used as the gradient container.
struct NetworkParams {
  std::vector<ConvLayer> conv;    // 2 per block
  std::vector<DenseLayer> dense;  // 8 layers
};

/// All-zero parameters with the fixed architecture's shapes.
NetworkParams zero_params();
/// He-uniform weights with bound sqrt(6 / fan_in), zero biases, deterministic per seed.
NetworkParams init_params(std::uint64_t seed);

/// Throws ShapeMismatch if shapes deviate from the plan, NonFiniteInput on NaN/inf.
void validate(const NetworkParams& params);
std::size_t parameter_count(const NetworkParams& params);

/// Tensors in a fixed order: conv w, b per layer, then dense w, b per layer.
std::vector<std::span<double>> tensors(NetworkParams& params);
std::vector<std::span<const double>> tensors(const NetworkParams& params);

/// kPolicyRows x kInputColumns, row-major.
struct CycleInput {
  std::vector<double> values;
};

void validate(const CycleInput& input);

/// Activations kept for the backward pass; column-major channel x (signal, position).
struct ForwardCache {
  std::size_t batch = 0;
  std::vector<std::vector<double>> conv_in;   // input of each conv layer
  std::vector<std::vector<double>> conv_out;  // post-ReLU output of each conv layer
  std::vector<std::vector<double>> dense_in;  // input of each dense layer
};

struct ForwardResult {
  std::vector<FeatureVector> outputs;
  ForwardCache cache;
};

/// Batched forward pass. Throws ShapeMismatch.
ForwardResult forward(const NetworkParams& params, std::span<const CycleInput> inputs);
FeatureVector forward(const NetworkParams& params, const CycleInput& input);

/// Gradients of sum_b output_b . output_grads_b with respect to every parameter.
/// Throws MissingCache when the cache is absent or does not match the batch.
NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                       std::span<const FeatureVector> output_grads);

struct OptimizerState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;  // flat, tensor order
  std::vector<double> v;
};

OptimizerState make_optimizer(const NetworkParams& params, double learning_rate);

/// Bias-corrected Adam step that ascends along grads. Throws ShapeMismatch.
void apply_update(NetworkParams& params, const NetworkParams& grads, OptimizerState& opt);

}  // namespace pi_irl::nn
