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

#include "hmix/models.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix {

namespace {

// Repeats the last axis `groups` times: [..., F] -> [..., G*F].
Tensor replicate_features(const Tensor& input, std::size_t groups) {
  if (groups == 1) return input;
  Shape shape = input.shape();
  const std::size_t f = shape.back();
  const std::size_t rows = input.size() / f;
  shape.back() = f * groups;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t j = 0; j < f; ++j) out[(r * groups + g) * f + j] = input[r * f + j];
    }
  }
  return out;
}

std::vector<HeadBatch> split_heads(const Var& raw, const HeadLayout& layout, std::size_t groups) {
  const std::size_t p = layout.raw_size();
  std::vector<HeadBatch> heads;
  heads.reserve(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    heads.push_back(decode_head(groups == 1 ? raw : ops::slice(raw, 1, g * p, (g + 1) * p), layout));
  }
  return heads;
}

}  // namespace

std::string to_string(ModelKind k) { return k == ModelKind::MLP ? "mlp" : "transformer"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "mlp") return ModelKind::MLP;
  if (s == "transformer") return ModelKind::Transformer;
  throw ConfigError(fmt::format("unknown model '{}' (expected mlp or transformer)", s));
}

std::string to_string(EnsembleStyle s) { return s == EnsembleStyle::Deep ? "deep" : "packed"; }

EnsembleStyle parse_ensemble_style(const std::string& s) {
  if (s == "deep") return EnsembleStyle::Deep;
  if (s == "packed") return EnsembleStyle::Packed;
  throw ConfigError(fmt::format("unknown ensemble style '{}' (expected deep or packed)", s));
}

void ModelConfig::validate() const {
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (head.kstar == 0 || head.kprime == 0 || head.t_pred == 0) throw ConfigError("kstar, kprime and t_pred must be positive");
  if (kind == ModelKind::MLP) {
    if (hidden == 0 || hidden_layers == 0) throw ConfigError("MLP needs at least one hidden layer of positive width");
  } else {
    if (t_obs == 0) throw ConfigError("t_obs must be positive");
    if (base_dim == 0 || heads == 0 || blocks == 0 || ffn_expansion == 0) {
      throw ConfigError("transformer dims, heads, blocks and ffn expansion must be positive");
    }
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError(fmt::format("dropout must be in [0, 1), got {}", dropout));
}

void Forecaster::check_input(const Tensor& input) const {
  const bool ok = cfg_.kind == ModelKind::MLP
                      ? input.rank() == 2 && input.dim(1) == cfg_.input_dim
                      : input.rank() == 3 && input.dim(1) == cfg_.t_obs && input.dim(2) == cfg_.input_dim;
  if (!ok) {
    throw DimensionError(fmt::format("{} expects input {} per sample, got {}", to_string(cfg_.kind),
                                     cfg_.kind == ModelKind::MLP ? fmt::format("[{}]", cfg_.input_dim)
                                                                 : fmt::format("[{}x{}]", cfg_.t_obs, cfg_.input_dim),
                                     shape_str(input.shape())));
  }
}

MLPForecaster::MLPForecaster(const ModelConfig& cfg, std::size_t groups, double alpha, Rng& rng)
    : Forecaster(cfg), groups_(groups), width_(resolve_width({cfg.hidden, alpha, groups, 1})) {
  cfg_.validate();
  std::size_t in = cfg.input_dim * groups;
  for (std::size_t i = 0; i < cfg.hidden_layers; ++i) {
    layers_.emplace_back(in, width_, groups, true, rng);
    in = width_;
  }
  layers_.emplace_back(in, cfg.head.raw_size() * groups, groups, true, rng);
}

std::vector<HeadBatch> MLPForecaster::forward(Tape& tape, const Tensor& input, Rng* rng) {
  check_input(input);
  Var h = tape.constant(replicate_features(input, groups_));
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    h = ops::relu(layers_[i].forward(tape, h));
    if (rng != nullptr && cfg_.dropout > 0.0) h = ops::dropout(h, cfg_.dropout, *rng);
  }
  return split_heads(layers_.back().forward(tape, h), cfg_.head, groups_);
}

void MLPForecaster::collect(const std::string& prefix, int member_offset, std::vector<ParamRef>& out) {
  const std::size_t first = out.size();
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(fmt::format("{}.fc{}", prefix, i), out);
  for (std::size_t i = first; i < out.size(); ++i) out[i].group += member_offset;
}

std::size_t MLPForecaster::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.param_count();
  return n;
}

std::size_t MLPForecaster::mac_count(std::size_t batch) const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.mac_count(batch);
  return n;
}

Tensor sinusoidal_positions(std::size_t steps, std::size_t width, std::size_t groups) {
  const std::size_t w = width / groups;
  Tensor out(Shape{steps, width});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < w; ++j) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (j / 2)) / static_cast<double>(w));
      const double v = j % 2 == 0 ? std::sin(static_cast<double>(t) * freq) : std::cos(static_cast<double>(t) * freq);
      for (std::size_t g = 0; g < groups; ++g) out.at(t, g * w + j) = v;
    }
  }
  return out;
}

GroupedTransformerForecaster::GroupedTransformerForecaster(const ModelConfig& cfg, std::size_t groups, double alpha,
                                                           Rng& rng)
    : Forecaster(cfg), groups_(groups), width_(resolve_width({cfg.base_dim, alpha, groups, cfg.heads})) {
  cfg_.validate();
  embed_ = GroupedLinear(cfg.input_dim * groups, width_, groups, true, rng);
  positions_ = sinusoidal_positions(cfg.t_obs, width_, groups);
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    Block b;
    b.attn = GroupedAttention(width_, groups, cfg.heads, rng, cfg.dropout);
    b.norm1 = GroupedNorm(width_, groups);
    b.ff1 = GroupedLinear(width_, width_ * cfg.ffn_expansion, groups, true, rng);
    b.ff2 = GroupedLinear(width_ * cfg.ffn_expansion, width_, groups, true, rng);
    b.norm2 = GroupedNorm(width_, groups);
    blocks_.push_back(std::move(b));
  }
  head_ = GroupedLinear(width_, cfg.head.raw_size() * groups, groups, true, rng);
}

std::vector<HeadBatch> GroupedTransformerForecaster::forward(Tape& tape, const Tensor& input, Rng* rng) {
  check_input(input);
  const std::size_t batch = input.dim(0);
  const std::size_t steps = cfg_.t_obs;
  const bool drop = rng != nullptr && cfg_.dropout > 0.0;

  Tensor pos(Shape{batch, steps, width_});
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy(positions_.values().begin(), positions_.values().end(), pos.values().begin() + i * steps * width_);
  }
  Var h = ops::add(embed_.forward(tape, tape.constant(replicate_features(input, groups_))),
                   tape.constant(std::move(pos)));
  for (auto& b : blocks_) {
    Var a = b.attn.forward(tape, h, h, h, drop ? rng : nullptr);
    if (drop) a = ops::dropout(a, cfg_.dropout, *rng);
    h = b.norm1.forward(tape, ops::add(h, a));
    Var f = b.ff2.forward(tape, ops::relu(b.ff1.forward(tape, h)));
    if (drop) f = ops::dropout(f, cfg_.dropout, *rng);
    h = b.norm2.forward(tape, ops::add(h, f));
  }
  const Var last = ops::reshape(ops::slice(h, 1, steps - 1, steps), Shape{batch, width_});
  return split_heads(head_.forward(tape, last), cfg_.head, groups_);
}

void GroupedTransformerForecaster::collect(const std::string& prefix, int member_offset, std::vector<ParamRef>& out) {
  const std::size_t first = out.size();
  embed_.collect(prefix + ".embed", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = fmt::format("{}.block{}", prefix, i);
    blocks_[i].attn.collect(p + ".attn", out);
    blocks_[i].norm1.collect(p + ".norm1", out);
    blocks_[i].ff1.collect(p + ".ff1", out);
    blocks_[i].ff2.collect(p + ".ff2", out);
    blocks_[i].norm2.collect(p + ".norm2", out);
  }
  head_.collect(prefix + ".head", out);
  for (std::size_t i = first; i < out.size(); ++i) out[i].group += member_offset;
}

std::size_t GroupedTransformerForecaster::param_count() const {
  std::size_t n = embed_.param_count() + head_.param_count();
  for (const auto& b : blocks_) {
    n += b.attn.param_count() + b.norm1.param_count() + b.ff1.param_count() + b.ff2.param_count() +
         b.norm2.param_count();
  }
  return n;
}

std::size_t GroupedTransformerForecaster::mac_count(std::size_t batch) const {
  const std::size_t tokens = batch * cfg_.t_obs;
  std::size_t n = embed_.mac_count(tokens) + head_.mac_count(batch);
  for (const auto& b : blocks_) {
    n += batch * b.attn.mac_count(cfg_.t_obs, cfg_.t_obs) + b.ff1.mac_count(tokens) + b.ff2.mac_count(tokens);
  }
  return n;
}

std::unique_ptr<Forecaster> make_forecaster(const ModelConfig& cfg, std::size_t groups, double alpha, Rng& rng) {
  if (cfg.kind == ModelKind::MLP) return std::make_unique<MLPForecaster>(cfg, groups, alpha, rng);
  return std::make_unique<GroupedTransformerForecaster>(cfg, groups, alpha, rng);
}

void EnsembleSpec::validate(const ModelConfig& cfg) const {
  if (members == 0) throw ConfigError("ensemble needs at least one member");
  if (!(alpha > 0.0)) throw ConfigError(fmt::format("alpha must be positive, got {}", alpha));
  if (style == EnsembleStyle::Packed && cfg.kind == ModelKind::Transformer) {
    const std::size_t d = resolve_width({cfg.base_dim, alpha, members, cfg.heads});
    if (d % (members * cfg.heads) != 0) {
      throw ConfigError(fmt::format("packed width {} is not divisible by M*H = {}", d, members * cfg.heads));
    }
  }
}

Ensemble::Ensemble(const ModelConfig& cfg, const EnsembleSpec& spec, std::uint64_t seed) : cfg_(cfg), spec_(spec) {
  cfg_.validate();
  spec_.validate(cfg_);
  Rng root(seed);
  if (spec_.style == EnsembleStyle::Packed) {
    Rng rng(root.split());
    models_.push_back(make_forecaster(cfg_, spec_.members, spec_.alpha, rng));
  } else {
    for (std::size_t m = 0; m < spec_.members; ++m) {
      Rng rng(root.split());
      models_.push_back(make_forecaster(cfg_, 1, spec_.alpha, rng));
    }
  }
}

std::vector<HeadBatch> Ensemble::forward(Tape& tape, const Tensor& input, Rng* rng) {
  std::vector<HeadBatch> out;
  out.reserve(spec_.members);
  for (auto& m : models_) {
    auto heads = m->forward(tape, input, rng);
    for (auto& h : heads) out.push_back(std::move(h));
  }
  return out;
}

std::vector<ParamRef> Ensemble::parameters() {
  std::vector<ParamRef> out;
  if (spec_.style == EnsembleStyle::Packed) {
    models_.front()->collect("packed", 0, out);
  } else {
    for (std::size_t m = 0; m < models_.size(); ++m) models_[m]->collect(fmt::format("m{}", m), static_cast<int>(m), out);
  }
  return out;
}

std::size_t Ensemble::param_count() const {
  std::size_t n = 0;
  for (const auto& m : models_) n += m->param_count();
  return n;
}

std::size_t Ensemble::mac_count(std::size_t batch) const {
  std::size_t n = 0;
  for (const auto& m : models_) n += m->mac_count(batch);
  return n;
}

std::size_t Ensemble::resolved_width() const {
  const Forecaster& m = *models_.front();
  if (const auto* mlp = dynamic_cast<const MLPForecaster*>(&m)) return mlp->width();
  return dynamic_cast<const GroupedTransformerForecaster&>(m).width();
}

}  // namespace hmix
