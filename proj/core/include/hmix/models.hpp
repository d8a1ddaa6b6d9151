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
#include <memory>
#include <string>
#include <vector>

#include "hmix/grouped.hpp"
#include "hmix/head.hpp"

namespace hmix {

enum class ModelKind { MLP, Transformer };
enum class EnsembleStyle { Deep, Packed };

std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);
std::string to_string(EnsembleStyle s);
EnsembleStyle parse_ensemble_style(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::MLP;
  /// MLP: input features per sample. Transformer: features per time step.
  std::size_t input_dim = 1;
  /// Transformer only: observed steps per sample.
  std::size_t t_obs = 1;
  HeadLayout head;

  std::size_t hidden = 50;
  std::size_t hidden_layers = 3;

  std::size_t base_dim = 64;
  std::size_t heads = 2;
  std::size_t blocks = 2;
  std::size_t ffn_expansion = 4;
  double dropout = 0.1;

  void validate() const;
};

/// Every model hosts G packed members. The input is replicated G times along
/// the feature axis and member g only ever touches its own slice, so G = 1 is
/// the ordinary single model.
class Forecaster {
 public:
  virtual ~Forecaster() = default;

  /// Input is [B x input_dim] (MLP) or [B x t_obs x input_dim] (transformer).
  /// Dropout is active iff `rng` is non-null. Returns one head per member.
  virtual std::vector<HeadBatch> forward(Tape& tape, const Tensor& input, Rng* rng) = 0;

  virtual std::size_t groups() const = 0;
  /// Parameters tagged with the owning member, offset by `member_offset`.
  virtual void collect(const std::string& prefix, int member_offset, std::vector<ParamRef>& out) = 0;
  virtual std::size_t param_count() const = 0;
  /// Multiply-adds of one forward pass over `batch` samples.
  virtual std::size_t mac_count(std::size_t batch) const = 0;

  const ModelConfig& config() const noexcept { return cfg_; }

 protected:
  explicit Forecaster(ModelConfig cfg) : cfg_(std::move(cfg)) {}
  void check_input(const Tensor& input) const;
  ModelConfig cfg_;
};

/// Fully-connected ReLU network with a mixture head.
class MLPForecaster final : public Forecaster {
 public:
  MLPForecaster(const ModelConfig& cfg, std::size_t groups, double alpha, Rng& rng);

  std::vector<HeadBatch> forward(Tape& tape, const Tensor& input, Rng* rng) override;
  std::size_t groups() const override { return groups_; }
  void collect(const std::string& prefix, int member_offset, std::vector<ParamRef>& out) override;
  std::size_t param_count() const override;
  std::size_t mac_count(std::size_t batch) const override;

  std::size_t width() const noexcept { return width_; }
  std::vector<GroupedLinear>& layers() { return layers_; }

 private:
  std::size_t groups_;
  std::size_t width_;
  std::vector<GroupedLinear> layers_;  // hidden layers, then the head
};

/// Encoder over the observed time steps of the focal agent (with neighbour
/// features per step): grouped embedding + sinusoidal positions, `blocks` x
/// [attention, add & norm, feed-forward, add & norm], last-step pooling and a
/// grouped mixture head per member.
class GroupedTransformerForecaster final : public Forecaster {
 public:
  GroupedTransformerForecaster(const ModelConfig& cfg, std::size_t groups, double alpha, Rng& rng);

  std::vector<HeadBatch> forward(Tape& tape, const Tensor& input, Rng* rng) override;
  std::size_t groups() const override { return groups_; }
  void collect(const std::string& prefix, int member_offset, std::vector<ParamRef>& out) override;
  std::size_t param_count() const override;
  std::size_t mac_count(std::size_t batch) const override;

  std::size_t width() const noexcept { return width_; }
  GroupedLinear& head() { return head_; }

 private:
  struct Block {
    GroupedAttention attn;
    GroupedNorm norm1;
    GroupedLinear ff1;
    GroupedLinear ff2;
    GroupedNorm norm2;
  };

  std::size_t groups_;
  std::size_t width_;
  GroupedLinear embed_;
  Tensor positions_;  // [t_obs x width]
  std::vector<Block> blocks_;
  GroupedLinear head_;
};

struct EnsembleSpec {
  EnsembleStyle style = EnsembleStyle::Deep;
  std::size_t members = 1;
  double alpha = 1.0;

  void validate(const ModelConfig& cfg) const;
};

/// M members: M separate models (Deep) or one model with G = M groups (Packed).
class Ensemble {
 public:
  Ensemble(const ModelConfig& cfg, const EnsembleSpec& spec, std::uint64_t seed);

  /// One head per member, in member order.
  std::vector<HeadBatch> forward(Tape& tape, const Tensor& input, Rng* rng = nullptr);

  /// All parameters, tagged with their member index.
  std::vector<ParamRef> parameters();
  std::size_t param_count() const;
  std::size_t mac_count(std::size_t batch) const;
  std::size_t members() const noexcept { return spec_.members; }
  /// Embedding width of one model (for the transformer), or hidden width.
  std::size_t resolved_width() const;

  const ModelConfig& config() const noexcept { return cfg_; }
  const EnsembleSpec& spec() const noexcept { return spec_; }
  std::vector<std::unique_ptr<Forecaster>>& models() { return models_; }

 private:
  ModelConfig cfg_;
  EnsembleSpec spec_;
  std::vector<std::unique_ptr<Forecaster>> models_;
};

std::unique_ptr<Forecaster> make_forecaster(const ModelConfig& cfg, std::size_t groups, double alpha, Rng& rng);

/// Sinusoidal position table [steps x width], laid out per group: each group
/// slice of width width/G holds the same encoding.
Tensor sinusoidal_positions(std::size_t steps, std::size_t width, std::size_t groups);

}  // namespace hmix
