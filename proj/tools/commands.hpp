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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pi_irl/demo_gen.hpp"
#include "pi_irl/irl_latent.hpp"
#include "pi_irl/irl_linear.hpp"

namespace pi_irl::cli {

enum class ModelKind { Linear, Latent, Deep };

std::string_view to_string(ModelKind kind);
/// Throws ConfigParse on an unknown name.
ModelKind kind_from_string(std::string_view name);

enum class EvalMode { Replay, ClosedLoop };

struct ExperimentConfig {
  std::uint64_t seed = 1;
  EvalMode mode = EvalMode::Replay;
  planner::PlannerConfig planner;
  demo::ExpertConfig expert;
  demo::CollectConfig collect;
  double theta0_low = 0.1;
  double theta0_high = 1.0;
  irl::TrainConfig linear;
  irl::TrainConfig latent;
  irl::LatentConfig latent_em;
  std::size_t clusters = 4;
  irl::TrainConfig deep;
  std::size_t history = 5;
  std::vector<demo::SegmentSpec> segments;
};

/// Parses the nested JSON config; missing keys keep their defaults.
/// Throws ConfigParse, SchemaVersionMismatch.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Named seed streams derived from the base seed.
std::uint64_t stage_seed(const ExperimentConfig& cfg, std::string_view stage, std::size_t index = 0);

struct RunOptions {
  std::filesystem::path out = "out";
  std::optional<ModelKind> kind;
  /// Restricts train/evaluate/infer to these segment indices.
  std::vector<std::size_t> segments;
};

/// Parses "0,2,3". Throws ConfigParse.
std::vector<std::size_t> parse_segment_list(std::string_view text);

namespace paths {
std::filesystem::path tracks(const RunOptions& o);
std::filesystem::path expert(const RunOptions& o, std::size_t segment);
std::filesystem::path buffer(const RunOptions& o);
std::filesystem::path model(const RunOptions& o, ModelKind kind);
std::filesystem::path train_log(const RunOptions& o, ModelKind kind);
std::filesystem::path report(const RunOptions& o, ModelKind kind, std::size_t segment);
std::filesystem::path histogram(const RunOptions& o, ModelKind kind, std::size_t segment);
std::filesystem::path summary(const RunOptions& o, ModelKind kind);
std::filesystem::path theta_trace(const RunOptions& o, ModelKind kind);
}  // namespace paths

/// Writes tracks.json and expert_<i>.csv.
void cmd_generate(const ExperimentConfig& cfg, const RunOptions& opt);
/// Writes buffer.jsonl from the generated tracks and experts.
void cmd_collect(const ExperimentConfig& cfg, const RunOptions& opt);
/// Writes model_<kind>.json and train_log_<kind>.csv.
void cmd_train(const ExperimentConfig& cfg, const RunOptions& opt);
/// Writes report/histogram CSVs per segment and summary_<kind>.json.
void cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& opt);
/// Closed-loop MPC under the model; writes theta_trace_<kind>.csv.
void cmd_infer(const ExperimentConfig& cfg, const RunOptions& opt);

/// Loaders shared with the tests.
std::vector<demo::SegmentSpec> load_tracks(const RunOptions& opt);
std::vector<planner::Trajectory> load_experts(const RunOptions& opt, std::size_t count);

/// Runs the CLI; returns the process exit code. Errors print one line
/// "error code=<ErrorCode> message=<text>" to stderr.
int run(int argc, char** argv);

}  // namespace pi_irl::cli
