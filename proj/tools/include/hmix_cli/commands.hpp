// Copyright 2026 The hmix Authors
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
#include <vector>

#include "hmix/aggregate.hpp"
#include "hmix/metrics.hpp"
#include "hmix_cli/config.hpp"
#include "hmix_cli/workspace.hpp"

namespace hmix::cli {

/// Version string recorded in every manifest.
inline constexpr const char* kGeneratorVersion = "hmix-gen/1";

/// Flags shared by every command.
struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
  std::size_t jobs = 1;
  bool force = false;
};

/// Merges defaults, the --config file and flag overrides, in increasing precedence.
json build_config(const CommonOptions& common, const json& overrides);

/// Refuses to reuse an existing output unless --force was given.
void claim_output(const std::filesystem::path& path, bool force, bool directory);

struct GenDataOptions {
  CommonOptions common;
  std::string kind = "toy";
  std::size_t n = 50000;
  std::size_t scenes = 1000;
  std::vector<double> probs;
  std::size_t t_obs = 8;
  std::size_t t_pred = 12;
};

void cmd_gen_data(const GenDataOptions& opt);

struct TrainOptions {
  CommonOptions common;
  json overrides = json::object();
};

struct TrainedRun {
  RunConfig cfg;
  ModelConfig model;
  Ensemble ensemble;
  TrainResult result;
};

/// Trains `cfg` on `data`; with a non-empty `out_dir` the epoch log is appended
/// to out_dir/train_log.csv as epochs finish. Leaves the best parameters loaded.
TrainedRun run_training(const RunConfig& cfg, const LoadedData& data, const std::filesystem::path& out_dir,
                        bool write_checkpoints);

TrainedRun cmd_train(const TrainOptions& opt);

enum class Aggregation { None, TopK, RIP, KMeans, Meta };

std::string to_string(Aggregation a);
Aggregation parse_aggregation(const std::string& s);

struct Evaluation {
  std::vector<MixtureForecast> forecasts;
  /// Meta index per output mode of each forecast, -1 when modes are not grouped.
  std::vector<std::vector<int>> meta_index;
  std::string provenance;
  MetricReport report;
};

Evaluation evaluate_model(Ensemble& model, const ModelConfig& mc, const Dataset& data, Aggregation agg,
                          std::uint64_t seed);

struct EvalOptions {
  CommonOptions common;
  std::string checkpoint;
  std::string data;
  std::string aggregate = "none";
  bool dump = false;
  json overrides = json::object();
};

Evaluation cmd_eval(const EvalOptions& opt);

/// Writes the forecast dump CSV (scene_id, meta_index, mode_index, weight, t, mu_x, mu_y, b_x, b_y).
void write_forecast_dump(const std::filesystem::path& path, const std::vector<std::string>& ids,
                         const Evaluation& ev);

struct SweepOptions {
  CommonOptions common;
  json overrides = json::object();
  /// "key=v1,v2,..." entries, one or two.
  std::vector<std::string> grid;
  std::vector<std::uint64_t> seeds;
  std::string eval_data;
  std::string aggregate = "none";
};

struct SweepSummary {
  std::size_t cells = 0;
  std::size_t skipped = 0;
  std::size_t trained = 0;
};

SweepSummary cmd_sweep(const SweepOptions& opt);

struct PlotOptions {
  CommonOptions common;
  /// "toy" (from a checkpoint) or "traj" (from a forecast dump).
  std::string kind = "toy";
  std::string checkpoint;
  std::string dump;
  std::size_t samples = 1500;
  std::size_t scenes = 4;
};

/// Returns the written file paths.
std::vector<std::filesystem::path> cmd_plot(const PlotOptions& opt);

/// Parses arguments, runs a command and maps failures to exit codes
/// (0 success, 1 validation error, 2 runtime failure).
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace hmix::cli
