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

#include "hmix/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "hmix/metrics.hpp"

namespace hmix {

namespace {

void accumulate(LossReport& acc, const LossReport& r, double w) {
  acc.total += w * r.total;
  acc.meta_term += w * r.meta_term;
  acc.mwta_term += w * r.mwta_term;
  acc.kl_meta_term += w * r.kl_meta_term;
  acc.kl_mwta_term += w * r.kl_mwta_term;
}

void dump_batch(const std::filesystem::path& path, const Dataset& batch, std::span<const std::size_t> idx) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  const std::size_t in_w = batch.inputs.size() / batch.size();
  const std::size_t out_w = batch.targets.dim(1);
  out << "sample";
  for (std::size_t j = 0; j < in_w; ++j) out << ",in" << j;
  for (std::size_t j = 0; j < out_w; ++j) out << ",target" << j;
  out << "\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out << idx[i];
    for (std::size_t j = 0; j < in_w; ++j) out << fmt::format(",{:.17g}", batch.inputs[i * in_w + j]);
    for (std::size_t j = 0; j < out_w; ++j) out << fmt::format(",{:.17g}", batch.targets.at(i, j));
    out << "\n";
  }
}

bool grads_finite(const std::vector<ParamRef>& params) {
  for (const auto& p : params) {
    for (double g : p.tensor->adjoint()) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

}  // namespace

void OptimConfig::validate() const {
  if (!(adam.lr > 0.0)) throw ConfigError(fmt::format("learning rate must be positive, got {}", adam.lr));
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must be in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("Adam eps must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError(fmt::format("lr decay must be in (0, 1], got {}", decay));
  if (!(clip_norm >= 0.0)) throw ConfigError("clip norm must be non-negative");
  if (!std::is_sorted(milestones.begin(), milestones.end())) throw ConfigError("lr milestones must be increasing");
}

double learning_rate(std::size_t epoch, const OptimConfig& cfg) {
  double lr = cfg.adam.lr;
  for (std::size_t m : cfg.milestones) {
    if (epoch >= m) lr *= cfg.decay;
  }
  return lr;
}

std::vector<Tensor> snapshot_params(const std::vector<ParamRef>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.tensor->shape(), p.tensor->data());
  return out;
}

void restore_params(const std::vector<ParamRef>& params, const std::vector<Tensor>& values) {
  if (params.size() != values.size()) {
    throw DimensionError(fmt::format("restore: {} parameters, {} values", params.size(), values.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].tensor->shape() != values[i].shape()) {
      throw DimensionError(fmt::format("restore: {} has shape {}, value has {}", params[i].name,
                                       shape_str(params[i].tensor->shape()), shape_str(values[i].shape())));
    }
    std::copy(values[i].values().begin(), values[i].values().end(), params[i].tensor->values().begin());
  }
}

std::vector<std::vector<MixtureForecast>> predict(Ensemble& model, const Dataset& data, std::size_t batch_size) {
  std::vector<std::vector<MixtureForecast>> out(model.members());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.resize(std::min(batch_size, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Dataset batch = data.rows(idx);
    Tape tape;
    const auto heads = model.forward(tape, batch.inputs, nullptr);
    for (std::size_t m = 0; m < heads.size(); ++m) {
      for (auto& f : forecast_rows(heads[m])) out[m].push_back(std::move(f));
    }
  }
  return out;
}

std::vector<MixtureForecast> pooled_predictions(const std::vector<std::vector<MixtureForecast>>& per_member) {
  if (per_member.size() == 1) return per_member.front();
  std::vector<MixtureForecast> out(per_member.front().size());
  const double m_count = static_cast<double>(per_member.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (const auto& member : per_member) {
      for (std::size_t k = 0; k < member[i].size(); ++k) {
        out[i].components.push_back(member[i].components[k]);
        out[i].weights.push_back(member[i].weights[k] / m_count);
      }
    }
  }
  return out;
}

std::vector<std::vector<HierarchicalMixture>> to_hierarchies(const std::vector<std::vector<MixtureForecast>>& per_member,
                                                             const HeadLayout& layout) {
  std::vector<std::vector<HierarchicalMixture>> out(per_member.size());
  for (std::size_t m = 0; m < per_member.size(); ++m) {
    for (const auto& f : per_member[m]) out[m].emplace_back(layout.kstar, layout.kprime, f.components, f.weights);
  }
  return out;
}

TrainResult train(Ensemble& model, const Dataset& train_set, const Dataset* val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch, Adam* optimizer) {
  cfg.optim.validate();
  cfg.loss.validate(model.config().head.modes());
  if (train_set.size() == 0) throw ContractError("training set is empty");

  const auto params = model.parameters();
  Adam local(params, cfg.optim.adam);
  Adam& opt = optimizer != nullptr ? *optimizer : local;

  Rng root(cfg.seed);
  Rng shuffle_rng(root.split());
  Rng dropout_rng(root.split());

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const double members = static_cast<double>(model.members());

  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.lr = learning_rate(epoch, cfg.optim);
    if (cfg.loss.variant == LossVariant::EWTA) {
      log.n_ewta = std::min(ewta_schedule(epoch, cfg.loss.ewta_milestones, cfg.loss.ewta_top_n),
                            model.config().head.modes());
    }
    shuffle_rng.shuffle(order);

    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.optim.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(cfg.optim.batch_size, order.size() - start));
      const Dataset batch = train_set.rows(idx);
      opt.zero_grad();
      Tape tape;
      LossReport step_report;
      try {
        const auto heads = model.forward(tape, batch.inputs, &dropout_rng);
        Var total;
        for (const auto& head : heads) {
          const LossResult r = compute_loss(head, batch.targets, cfg.loss, epoch);
          accumulate(step_report, r.report, 1.0 / members);
          total = total.valid() ? ops::add(total, r.total) : r.total;
        }
        if (!std::isfinite(total.item())) throw DomainError("loss is not finite");
        tape.backward(total);
        if (!grads_finite(params)) throw DomainError("gradient is not finite");
      } catch (const DomainError& e) {
        if (cfg.nan_dump) dump_batch(*cfg.nan_dump, batch, idx);
        std::string ids;
        for (std::size_t i = 0; i < idx.size() && i < 16; ++i) ids += fmt::format("{}{}", i ? "," : "", idx[i]);
        throw NumericalError(fmt::format("non-finite value at epoch {} step {} (samples {}{}): {}{}", epoch,
                                         result.steps, ids, idx.size() > 16 ? ",..." : "", e.what(),
                                         cfg.nan_dump ? fmt::format("; batch written to {}", cfg.nan_dump->string())
                                                      : std::string()));
      }
      if (cfg.optim.clip_norm > 0.0) {
        const auto norms = clip_grad_norm_by_group(params, cfg.optim.clip_norm);
        if (std::any_of(norms.begin(), norms.end(), [&](double n) { return n > cfg.optim.clip_norm; })) {
          ++log.clipped_steps;
        }
      }
      opt.step(log.lr);
      accumulate(log.loss, step_report, 1.0);
      ++batches;
      ++result.steps;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    log.loss.total *= inv;
    log.loss.meta_term *= inv;
    log.loss.mwta_term *= inv;
    log.loss.kl_meta_term *= inv;
    log.loss.kl_mwta_term *= inv;

    if (val_set != nullptr && val_set->size() > 0) {
      const auto pooled = pooled_predictions(predict(model, *val_set));
      double made = 0.0;
      for (std::size_t i = 0; i < pooled.size(); ++i) made += made_k(val_set->target(i), pooled[i], 1);
      log.val_made_1 = made / static_cast<double>(pooled.size());
      if (log.val_made_1 < result.best_val_made_1) {
        result.best_val_made_1 = log.val_made_1;
        result.best_epoch = epoch;
        result.best_params = snapshot_params(params);
      }
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  if (result.best_params.empty()) {
    result.best_params = snapshot_params(params);
    result.best_epoch = cfg.optim.epochs == 0 ? 0 : cfg.optim.epochs - 1;
  }
  return result;
}

}  // namespace hmix
