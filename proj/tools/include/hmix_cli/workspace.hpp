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

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "hmix/models.hpp"
#include "hmix/optim.hpp"
#include "hmix_cli/config.hpp"

namespace hmix::cli {

struct LoadedData {
  Dataset train;
  Dataset val;
  /// One id per training row, then one per validation row.
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

/// Reads `spec.path` (and `spec.val_path` when set), splitting off a trailing
/// validation fraction otherwise. Throws ConfigError when the file does not
/// match `spec.kind`.
LoadedData load_data(const DataSpec& spec, std::size_t val_rows_override = static_cast<std::size_t>(-1));

/// Reads every row of `path` as an evaluation set.
Dataset load_eval_data(const DataSpec& spec, const std::filesystem::path& path, std::vector<std::string>* ids);

/// Fills the data-dependent fields (input width, steps) of the model config.
ModelConfig resolve_model(const RunConfig& cfg, const Dataset& data);

/// MLP on scenes sees the flattened history.
Tensor model_input(const ModelConfig& model, const Tensor& inputs);
Dataset model_view(const ModelConfig& model, const Dataset& data);

struct Checkpoint {
  json config;
  std::string hash;
  ModelConfig model;
  std::size_t epoch = 0;
  std::vector<std::string> names;
  std::vector<Tensor> values;
  std::size_t adam_steps = 0;
  std::vector<std::vector<double>> adam_m;
  std::vector<std::vector<double>> adam_v;
};

void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, const ModelConfig& model,
                     std::size_t epoch, const std::vector<ParamRef>& params, const std::vector<Tensor>& values,
                     Adam* optimizer);

/// Throws ConfigError when the stored hash does not match the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the ensemble described by a checkpoint and loads its parameters.
Ensemble restore_ensemble(const Checkpoint& ck);

}  // namespace hmix::cli
