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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "hmix/data.hpp"
#include "hmix/error.hpp"
#include "hmix/losses.hpp"
#include "hmix/models.hpp"
#include "hmix/optim.hpp"

namespace hmix {

struct OptimConfig {
  AdamConfig adam;
  std::size_t batch_size = 128;
  std::size_t epochs = 20;
  /// Epochs at which the learning rate is multiplied by `decay`.
  std::vector<std::size_t> milestones;
  double decay = 0.5;
  /// Per-member global gradient norm bound; 0 disables clipping.
  double clip_norm = 5.0;

  void validate() const;
};

/// Learning rate in effect during `epoch` (0-based).
double learning_rate(std::size_t epoch, const OptimConfig& cfg);

struct TrainConfig {
  LossConfig loss;
  OptimConfig optim;
  std::uint64_t seed = 0;
  /// Where to write the offending batch if the loss turns non-finite.
  std::optional<std::filesystem::path> nan_dump;
};

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  /// Batch means, averaged over members.
  LossReport loss;
  std::size_t n_ewta = 0;
  /// Steps in which at least one member's gradient was clipped.
  std::size_t clipped_steps = 0;
  double val_made_1 = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_made_1 = std::numeric_limits<double>::infinity();
  /// Parameter values at the best validation epoch (final values without validation).
  std::vector<Tensor> best_params;
  std::size_t steps = 0;
};

/// Raised when a loss or gradient becomes non-finite. The message names the
/// epoch, step and sample indices of the batch.
class NumericalError : public Error {
 public:
  using Error::Error;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch Adam on the sum of member losses. Members never share a
/// gradient: each one's loss depends only on its own parameters, and clipping
/// is applied per member. Shuffling and dropout draw from streams derived
/// from cfg.seed, so a run is bit-reproducible.
TrainResult train(Ensemble& model, const Dataset& train_set, const Dataset* val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {}, Adam* optimizer = nullptr);

/// Member forecasts for every sample of `data` (no dropout), in batches.
/// Result is [member][sample].
std::vector<std::vector<MixtureForecast>> predict(Ensemble& model, const Dataset& data, std::size_t batch_size = 256);

/// Members pooled into one mixture per sample (weights / M).
std::vector<MixtureForecast> pooled_predictions(const std::vector<std::vector<MixtureForecast>>& per_member);

/// Hierarchical view of every member forecast, [member][sample].
std::vector<std::vector<HierarchicalMixture>> to_hierarchies(const std::vector<std::vector<MixtureForecast>>& per_member,
                                                             const HeadLayout& layout);

std::vector<Tensor> snapshot_params(const std::vector<ParamRef>& params);
void restore_params(const std::vector<ParamRef>& params, const std::vector<Tensor>& values);

}  // namespace hmix
