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
#include <string>
#include <utility>
#include <vector>

#include "hmix/head.hpp"

namespace hmix {

enum class LossVariant { WTA, EpsWTA, EWTA, HWTA, NLL };

/// Per-mode error used to pick winners and as the regression term.
enum class ErrorMetric {
  NLL,  ///< -log p_k(y), no weight term
  L2,   ///< mean over steps of the squared 2-D displacement
};

/// What the classification KL terms compare the snapshot posterior against.
enum class KlTarget {
  Posterior,  ///< current posterior P(Z | y), as written
  Prior,      ///< current mixture weights
};

std::string to_string(LossVariant v);
LossVariant parse_loss_variant(const std::string& s);
std::string to_string(ErrorMetric m);
ErrorMetric parse_error_metric(const std::string& s);

struct LossConfig {
  LossVariant variant = LossVariant::HWTA;
  double gamma = 0.6;
  double epsilon = 0.05;
  std::size_t ewta_top_n = 6;
  std::vector<std::size_t> ewta_milestones;
  ErrorMetric metric = ErrorMetric::NLL;
  MetaStats meta_stats = MetaStats::Verbatim;
  /// Treat 1/pi_{k*} in the MWTA term as a constant.
  bool detach_meta_weight = true;
  bool use_kl = true;
  KlTarget kl_target = KlTarget::Posterior;

  /// Throws ConfigError on out-of-range values. Returns warnings, e.g. for
  /// epsilon >= 1/(K-1).
  std::vector<std::string> validate(std::size_t modes) const;
};

/// Loss decomposition, averaged over the batch.
struct LossReport {
  double total = 0.0;
  double meta_term = 0.0;
  double mwta_term = 0.0;
  double kl_meta_term = 0.0;
  double kl_mwta_term = 0.0;
  /// Winner of the first sample (-1 when not applicable).
  int winner_index = -1;
  int winner_meta_index = -1;
};

struct LossResult {
  Var total;  // scalar, batch mean
  LossReport report;
  std::vector<std::size_t> winners;       // flat mode per sample
  std::vector<std::size_t> meta_winners;  // meta-mode per sample (HWTA)
};

/// Snapshot of posteriors under the parameters before the optimizer step.
struct Posteriors {
  Tensor meta;    // [B x K*], P(Z | y)
  Tensor within;  // [B x K'], P(Z' | y, Z = winner)
  std::vector<std::size_t> meta_winners;
};

/// [B x K] per-mode errors on the tape.
Var per_mode_error(const HeadBatch& head, const Tensor& y, ErrorMetric metric);

LossResult wta_loss(const HeadBatch& head, const Tensor& y, ErrorMetric metric = ErrorMetric::NLL);
LossResult eps_wta_loss(const HeadBatch& head, const Tensor& y, double epsilon,
                        ErrorMetric metric = ErrorMetric::NLL);
LossResult ewta_loss(const HeadBatch& head, const Tensor& y, std::size_t top_n,
                     ErrorMetric metric = ErrorMetric::NLL);
/// n0 minus the number of milestones reached by `epoch`, floored at 1.
std::size_t ewta_schedule(std::size_t epoch, const std::vector<std::size_t>& milestones, std::size_t n0);
LossResult nll_loss(const HeadBatch& head, const Tensor& y);

/// Meta-mode with the lowest meta-component NLL, per sample.
std::vector<std::size_t> select_meta_winners(const HeadBatch& head, const MetaBatch& meta, const Tensor& y);
Posteriors snapshot_posteriors(const HeadBatch& head, const Tensor& y, MetaStats mode = MetaStats::Verbatim);

/// Per-sample sum over meta-modes of -log pi_{k*} - log p_{k*}(y), [B x 1].
Var l_meta(const HeadBatch& head, const MetaBatch& meta, const Tensor& y);
/// Per-sample (1/pi_{k*}) sum over the winner's sub-modes of -log pi - log p(y), [B x 1].
Var l_mwta(const HeadBatch& head, const Tensor& y, const std::vector<std::size_t>& meta_winners,
           bool detach_meta_weight = true);
/// (KL_meta / K, KL_mwta / K'), each [B x 1]. Gradients flow through the
/// current distributions only.
std::pair<Var, Var> kl_terms(const HeadBatch& head, const Tensor& y, const Posteriors& q,
                             KlTarget target = KlTarget::Posterior);

/// Full hierarchical loss. `q` defaults to a snapshot of the current head.
LossResult hwta_loss(const HeadBatch& head, const Tensor& y, const LossConfig& cfg, const Posteriors* q = nullptr);

/// Dispatch on cfg.variant. `epoch` drives the EWTA schedule.
LossResult compute_loss(const HeadBatch& head, const Tensor& y, const LossConfig& cfg, std::size_t epoch = 0,
                        const Posteriors* q = nullptr);

// Single-sample value-level forms.
std::vector<double> per_mode_error(const Tensor& y, const MixtureForecast& m, ErrorMetric metric);
LossReport wta_loss(const Tensor& y, const MixtureForecast& m, ErrorMetric metric = ErrorMetric::NLL);
LossReport eps_wta_loss(const Tensor& y, const MixtureForecast& m, double epsilon,
                        ErrorMetric metric = ErrorMetric::NLL);
LossReport ewta_loss(const Tensor& y, const MixtureForecast& m, std::size_t top_n,
                     ErrorMetric metric = ErrorMetric::NLL);
LossReport hwta_loss(const Tensor& y, const HierarchicalMixture& h, const LossConfig& cfg);
double l_meta(const Tensor& y, const HierarchicalMixture& h, MetaStats mode = MetaStats::Verbatim);
double l_mwta(const Tensor& y, const HierarchicalMixture& h, MetaStats mode = MetaStats::Verbatim);

/// KL(q || p) for two discrete distributions, with 0 log 0 = 0.
double kl_divergence(const std::vector<double>& q, const std::vector<double>& p);

}  // namespace hmix
