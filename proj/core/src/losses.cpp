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

#include "hmix/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix {

namespace {

double mean_of(const Var& v) {
  const auto xs = v.value().values();
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

Tensor errors_value(const Var& err) { return err.value(); }

// Shared body of WTA, eps-WTA and EWTA: weighted regression plus -log pi of the winner.
LossResult assigned_loss(const HeadBatch& head, const Var& err, const Tensor& assign,
                         std::vector<std::size_t> winners) {
  Tape& tape = head.mu.tape();
  const Var regression = ops::reduce_sum(ops::mul(err, tape.constant(assign)), 1);
  const Var onehot = tape.constant(one_hot(winners, head.layout.modes()));
  const Var ce = ops::neg(ops::reduce_sum(ops::mul(head.log_pi, onehot), 1));
  LossResult r;
  r.total = ops::mean(ops::add(regression, ce));
  r.report.total = r.total.item();
  r.report.winner_index = static_cast<int>(winners.front());
  r.winners = std::move(winners);
  return r;
}

// Indices of one row sorted by (error, index).
std::vector<std::size_t> rank_row(const Tensor& err, std::size_t row) {
  std::vector<std::size_t> idx(err.dim(1));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return err.at(row, a) < err.at(row, b); });
  return idx;
}

// Mask [B x K] selecting every sub-mode of each sample's winning meta-mode.
Tensor group_mask(const HeadLayout& l, const std::vector<std::size_t>& meta_winners) {
  Tensor m(Shape{meta_winners.size(), l.modes()});
  for (std::size_t i = 0; i < meta_winners.size(); ++i) {
    for (std::size_t s = 0; s < l.kprime; ++s) m.at(i, meta_winners[i] * l.kprime + s) = 1.0;
  }
  return m;
}

// [K x K']: sends mode (m, s) to column s.
Tensor sub_index(const HeadLayout& l) {
  Tensor c(Shape{l.modes(), l.kprime});
  for (std::size_t m = 0; m < l.kstar; ++m) {
    for (std::size_t s = 0; s < l.kprime; ++s) c.at(m * l.kprime + s, s) = 1.0;
  }
  return c;
}

// [K* x K]: repeats each meta column over its sub-modes.
Tensor meta_repeat(const HeadLayout& l) {
  Tensor r(Shape{l.kstar, l.modes()});
  for (std::size_t m = 0; m < l.kstar; ++m) {
    for (std::size_t s = 0; s < l.kprime; ++s) r.at(m, m * l.kprime + s) = 1.0;
  }
  return r;
}

Var group_logsumexp(const Var& x, const HeadLayout& l) {
  const std::size_t rows = x.shape()[0];
  return ops::reshape(ops::logsumexp(ops::reshape(x, Shape{rows, l.kstar, l.kprime}), 2), Shape{rows, l.kstar});
}

Posteriors posteriors_from(const Tensor& log_post, const HeadLayout& l, std::vector<std::size_t> meta_winners) {
  const std::size_t rows = log_post.dim(0);
  Posteriors q{Tensor(Shape{rows, l.kstar}), Tensor(Shape{rows, l.kprime}), std::move(meta_winners)};
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t m = 0; m < l.kstar; ++m) {
      for (std::size_t s = 0; s < l.kprime; ++s) q.meta.at(i, m) += std::exp(log_post.at(i, m * l.kprime + s));
    }
    const std::size_t w = q.meta_winners[i];
    double z = 0.0;
    for (std::size_t s = 0; s < l.kprime; ++s) z += std::exp(log_post.at(i, w * l.kprime + s));
    for (std::size_t s = 0; s < l.kprime; ++s) q.within.at(i, s) = std::exp(log_post.at(i, w * l.kprime + s)) / z;
  }
  return q;
}

void check_rows_simplex(const Tensor& q, const char* what) {
  for (std::size_t i = 0; i < q.dim(0); ++i) {
    double total = 0.0;
    for (std::size_t k = 0; k < q.dim(1); ++k) {
      const double v = q.at(i, k);
      if (!(v >= 0.0 && v <= 1.0 + 1e-12)) throw ContractError(fmt::format("{} row {} has entry {}", what, i, v));
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ContractError(fmt::format("{} row {} sums to {}", what, i, total));
  }
}

// sum q log q - sum q log p per row, with 0 log 0 = 0.
Var row_kl(const Tensor& q, const Var& log_p) {
  Tape& tape = log_p.tape();
  Tensor entropy(Shape{q.dim(0), 1});
  for (std::size_t i = 0; i < q.dim(0); ++i) {
    for (std::size_t k = 0; k < q.dim(1); ++k) {
      if (q.at(i, k) > 0.0) entropy[i] += q.at(i, k) * std::log(q.at(i, k));
    }
  }
  return ops::sub(tape.constant(std::move(entropy)), ops::reduce_sum(ops::mul(tape.constant(q), log_p), 1));
}

HeadLayout flat_layout(const MixtureForecast& m) { return HeadLayout{1, m.size(), m.t_pred()}; }
HeadLayout tree_layout(const HierarchicalMixture& h) { return HeadLayout{h.kstar(), h.kprime(), h.t_pred()}; }

}  // namespace

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::WTA: return "wta";
    case LossVariant::EpsWTA: return "eps-wta";
    case LossVariant::EWTA: return "ewta";
    case LossVariant::HWTA: return "hwta";
    case LossVariant::NLL: return "nll";
  }
  return "?";
}

LossVariant parse_loss_variant(const std::string& s) {
  for (auto v : {LossVariant::WTA, LossVariant::EpsWTA, LossVariant::EWTA, LossVariant::HWTA, LossVariant::NLL}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError(fmt::format("unknown loss '{}' (expected wta, eps-wta, ewta, hwta or nll)", s));
}

std::string to_string(ErrorMetric m) { return m == ErrorMetric::NLL ? "nll" : "l2"; }

ErrorMetric parse_error_metric(const std::string& s) {
  if (s == "nll") return ErrorMetric::NLL;
  if (s == "l2") return ErrorMetric::L2;
  throw ConfigError(fmt::format("unknown error metric '{}' (expected nll or l2)", s));
}

std::vector<std::string> LossConfig::validate(std::size_t modes) const {
  std::vector<std::string> warnings;
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError(fmt::format("gamma must be in [0, 1], got {}", gamma));
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError(fmt::format("epsilon must be in [0, 1), got {}", epsilon));
  if (ewta_top_n == 0) throw ConfigError("ewta top-n must be positive");
  if (variant == LossVariant::EWTA && ewta_top_n > modes) {
    throw ConfigError(fmt::format("ewta top-n {} exceeds the {} modes", ewta_top_n, modes));
  }
  if (!std::is_sorted(ewta_milestones.begin(), ewta_milestones.end())) {
    throw ConfigError("ewta milestones must be in increasing order");
  }
  if (variant == LossVariant::EpsWTA && modes > 1 && epsilon >= 1.0 / static_cast<double>(modes - 1)) {
    warnings.push_back(fmt::format("epsilon {} >= 1/(K-1) = {}: non-winners outweigh the winner", epsilon,
                                   1.0 / static_cast<double>(modes - 1)));
  }
  return warnings;
}

Var per_mode_error(const HeadBatch& head, const Tensor& y, ErrorMetric metric) {
  return metric == ErrorMetric::NLL ? ops::neg(mode_log_density(head, y)) : mode_sq_error(head, y);
}

LossResult wta_loss(const HeadBatch& head, const Tensor& y, ErrorMetric metric) {
  const Var err = per_mode_error(head, y, metric);
  auto winners = row_argmin(err.value());
  const Tensor assign = one_hot(winners, head.layout.modes());
  return assigned_loss(head, err, assign, std::move(winners));
}

LossResult eps_wta_loss(const HeadBatch& head, const Tensor& y, double epsilon, ErrorMetric metric) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ContractError(fmt::format("epsilon {} outside [0, 1)", epsilon));
  const std::size_t k_count = head.layout.modes();
  const Var err = per_mode_error(head, y, metric);
  auto winners = row_argmin(err.value());
  const double other = k_count > 1 ? epsilon / static_cast<double>(k_count - 1) : 0.0;
  const double win = k_count > 1 ? 1.0 - epsilon : 1.0;
  Tensor assign(Shape{winners.size(), k_count}, other);
  for (std::size_t i = 0; i < winners.size(); ++i) assign.at(i, winners[i]) = win;
  return assigned_loss(head, err, assign, std::move(winners));
}

LossResult ewta_loss(const HeadBatch& head, const Tensor& y, std::size_t top_n, ErrorMetric metric) {
  const std::size_t k_count = head.layout.modes();
  if (top_n == 0 || top_n > k_count) throw ContractError(fmt::format("top-n {} outside [1, {}]", top_n, k_count));
  const Var err = per_mode_error(head, y, metric);
  const Tensor& e = errors_value(err);
  Tensor assign(Shape{e.dim(0), k_count});
  std::vector<std::size_t> winners(e.dim(0));
  for (std::size_t i = 0; i < e.dim(0); ++i) {
    const auto order = rank_row(e, i);
    winners[i] = order.front();
    for (std::size_t j = 0; j < top_n; ++j) assign.at(i, order[j]) = 1.0 / static_cast<double>(top_n);
  }
  return assigned_loss(head, err, assign, std::move(winners));
}

std::size_t ewta_schedule(std::size_t epoch, const std::vector<std::size_t>& milestones, std::size_t n0) {
  const auto passed = static_cast<std::size_t>(std::count_if(milestones.begin(), milestones.end(),
                                                             [&](std::size_t m) { return epoch >= m; }));
  return passed >= n0 ? 1 : std::max<std::size_t>(n0 - passed, 1);
}

LossResult nll_loss(const HeadBatch& head, const Tensor& y) {
  LossResult r;
  r.total = ops::neg(ops::mean(mixture_log_likelihood(head, y)));
  r.report.total = r.total.item();
  return r;
}

std::vector<std::size_t> select_meta_winners(const HeadBatch& head, const MetaBatch& meta, const Tensor& y) {
  Tensor nll = meta_log_density(head, meta, y).value();
  for (auto& v : nll.values()) v = -v;
  return row_argmin(nll);
}

Posteriors snapshot_posteriors(const HeadBatch& head, const Tensor& y, MetaStats mode) {
  const MetaBatch meta = meta_stats(head, mode);
  return posteriors_from(log_posterior(head, y).value(), head.layout, select_meta_winners(head, meta, y));
}

Var l_meta(const HeadBatch& head, const MetaBatch& meta, const Tensor& y) {
  return ops::neg(ops::reduce_sum(ops::add(meta.log_pi_meta, meta_log_density(head, meta, y)), 1));
}

Var l_mwta(const HeadBatch& head, const Tensor& y, const std::vector<std::size_t>& meta_winners,
           bool detach_meta_weight) {
  const HeadLayout& l = head.layout;
  Tape& tape = head.mu.tape();
  const Var term = ops::neg(ops::add(head.log_pi, mode_log_density(head, y)));
  const Var within = ops::reduce_sum(ops::mul(term, tape.constant(group_mask(l, meta_winners))), 1);
  const Var log_meta = ops::reduce_sum(
      ops::mul(group_logsumexp(head.log_pi, l), tape.constant(one_hot(meta_winners, l.kstar))), 1);
  if (detach_meta_weight) {
    Tensor inv = log_meta.value();
    for (auto& v : inv.values()) v = std::exp(-v);
    return ops::mul(within, tape.constant(std::move(inv)));
  }
  return ops::mul(within, ops::exp(ops::neg(log_meta)));
}

std::pair<Var, Var> kl_terms(const HeadBatch& head, const Tensor& y, const Posteriors& q, KlTarget target) {
  const HeadLayout& l = head.layout;
  const std::size_t rows = head.batch();
  if (q.meta.shape() != Shape{rows, l.kstar} || q.within.shape() != Shape{rows, l.kprime} ||
      q.meta_winners.size() != rows) {
    throw DimensionError(fmt::format("posterior snapshot {} / {} does not match batch {} with {}x{} modes",
                                     shape_str(q.meta.shape()), shape_str(q.within.shape()), rows, l.kstar, l.kprime));
  }
  check_rows_simplex(q.meta, "meta posterior");
  check_rows_simplex(q.within, "within-meta posterior");
  Tape& tape = head.mu.tape();

  const Var flat = target == KlTarget::Posterior ? log_posterior(head, y) : head.log_pi;
  const Var log_meta = group_logsumexp(flat, l);
  const Var log_within_all = ops::sub(flat, ops::matmul(log_meta, tape.constant(meta_repeat(l))));
  const Var log_within = ops::matmul(ops::mul(log_within_all, tape.constant(group_mask(l, q.meta_winners))),
                                     tape.constant(sub_index(l)));

  const Var kl_meta = ops::scale(row_kl(q.meta, log_meta), 1.0 / static_cast<double>(l.modes()));
  const Var kl_mwta = ops::scale(row_kl(q.within, log_within), 1.0 / static_cast<double>(l.kprime));
  return {kl_meta, kl_mwta};
}

LossResult hwta_loss(const HeadBatch& head, const Tensor& y, const LossConfig& cfg, const Posteriors* q) {
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw ContractError(fmt::format("gamma {} outside [0, 1]", cfg.gamma));
  const MetaBatch meta = meta_stats(head, cfg.meta_stats);
  auto meta_winners = select_meta_winners(head, meta, y);

  const Var lm = l_meta(head, meta, y);
  const Var lw = l_mwta(head, y, meta_winners, cfg.detach_meta_weight);
  Var meta_branch = lm;
  Var mwta_branch = lw;
  LossResult r;
  if (cfg.use_kl) {
    Posteriors snap;
    if (q == nullptr) {
      snap = posteriors_from(log_posterior(head, y).value(), head.layout, meta_winners);
      q = &snap;
    }
    const auto [klm, klw] = kl_terms(head, y, *q, cfg.kl_target);
    meta_branch = ops::add(meta_branch, klm);
    mwta_branch = ops::add(mwta_branch, klw);
    r.report.kl_meta_term = mean_of(klm);
    r.report.kl_mwta_term = mean_of(klw);
  }
  r.total = ops::mean(ops::add(ops::scale(meta_branch, cfg.gamma), ops::scale(mwta_branch, 1.0 - cfg.gamma)));
  r.report.total = r.total.item();
  r.report.meta_term = mean_of(lm);
  r.report.mwta_term = mean_of(lw);

  // Flat winner: best sub-mode (by NLL) inside the winning meta-mode.
  const Tensor err = ops::neg(mode_log_density(head, y)).value();
  const std::size_t kp = head.layout.kprime;
  r.winners.resize(meta_winners.size());
  for (std::size_t i = 0; i < meta_winners.size(); ++i) {
    std::size_t best = meta_winners[i] * kp;
    for (std::size_t s = 1; s < kp; ++s) {
      if (err.at(i, meta_winners[i] * kp + s) < err.at(i, best)) best = meta_winners[i] * kp + s;
    }
    r.winners[i] = best;
  }
  r.report.winner_index = static_cast<int>(r.winners.front());
  r.report.winner_meta_index = static_cast<int>(meta_winners.front());
  r.meta_winners = std::move(meta_winners);
  return r;
}

LossResult compute_loss(const HeadBatch& head, const Tensor& y, const LossConfig& cfg, std::size_t epoch,
                        const Posteriors* q) {
  switch (cfg.variant) {
    case LossVariant::WTA: return wta_loss(head, y, cfg.metric);
    case LossVariant::EpsWTA: return eps_wta_loss(head, y, cfg.epsilon, cfg.metric);
    case LossVariant::EWTA: {
      const std::size_t n = std::min(ewta_schedule(epoch, cfg.ewta_milestones, cfg.ewta_top_n), head.layout.modes());
      return ewta_loss(head, y, n, cfg.metric);
    }
    case LossVariant::HWTA: return hwta_loss(head, y, cfg, q);
    case LossVariant::NLL: return nll_loss(head, y);
  }
  throw ContractError("unknown loss variant");
}

std::vector<double> per_mode_error(const Tensor& y, const MixtureForecast& m, ErrorMetric metric) {
  Tape tape;
  const HeadBatch head = head_from_forecasts(tape, {m}, flat_layout(m));
  const auto v = per_mode_error(head, stack_targets({y}), metric).value().values();
  return {v.begin(), v.end()};
}

LossReport wta_loss(const Tensor& y, const MixtureForecast& m, ErrorMetric metric) {
  Tape tape;
  return wta_loss(head_from_forecasts(tape, {m}, flat_layout(m)), stack_targets({y}), metric).report;
}

LossReport eps_wta_loss(const Tensor& y, const MixtureForecast& m, double epsilon, ErrorMetric metric) {
  Tape tape;
  return eps_wta_loss(head_from_forecasts(tape, {m}, flat_layout(m)), stack_targets({y}), epsilon, metric).report;
}

LossReport ewta_loss(const Tensor& y, const MixtureForecast& m, std::size_t top_n, ErrorMetric metric) {
  Tape tape;
  return ewta_loss(head_from_forecasts(tape, {m}, flat_layout(m)), stack_targets({y}), top_n, metric).report;
}

LossReport hwta_loss(const Tensor& y, const HierarchicalMixture& h, const LossConfig& cfg) {
  Tape tape;
  return hwta_loss(head_from_forecasts(tape, {h.flatten()}, tree_layout(h)), stack_targets({y}), cfg).report;
}

double l_meta(const Tensor& y, const HierarchicalMixture& h, MetaStats mode) {
  Tape tape;
  const HeadBatch head = head_from_forecasts(tape, {h.flatten()}, tree_layout(h));
  const Tensor target = stack_targets({y});
  return l_meta(head, meta_stats(head, mode), target).item();
}

double l_mwta(const Tensor& y, const HierarchicalMixture& h, MetaStats mode) {
  Tape tape;
  const HeadBatch head = head_from_forecasts(tape, {h.flatten()}, tree_layout(h));
  const Tensor target = stack_targets({y});
  const auto winners = select_meta_winners(head, meta_stats(head, mode), target);
  return l_mwta(head, target, winners).item();
}

double kl_divergence(const std::vector<double>& q, const std::vector<double>& p) {
  if (q.size() != p.size()) throw DimensionError("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) kl += q[i] * (std::log(q[i]) - std::log(p[i]));
  }
  return kl;
}

}  // namespace hmix
