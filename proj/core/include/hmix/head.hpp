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
#include <vector>

#include "hmix/autodiff.hpp"
#include "hmix/mixture.hpp"

namespace hmix {

/// Shape of one mixture head: K* meta-modes of K' modes over t_pred 2-D points.
struct HeadLayout {
  std::size_t kstar = 1;
  std::size_t kprime = 1;
  std::size_t t_pred = 1;

  std::size_t modes() const noexcept { return kstar * kprime; }
  /// Coordinates per trajectory, t_pred * 2.
  std::size_t coords() const noexcept { return t_pred * 2; }
  /// Raw outputs per sample: means, raw scales, logits.
  std::size_t raw_size() const noexcept { return 2 * modes() * coords() + modes(); }
};

/// Batched mixture parameters on a tape.
///
/// Row i holds sample i. mu and b are [B x K*C] with mode-major layout
/// (mode k occupies columns [k*C, (k+1)*C), C = t_pred*2, x before y for
/// each step); log_pi is [B x K]. Modes are ordered meta-major.
struct HeadBatch {
  HeadLayout layout;
  Var mu;
  Var b;
  Var log_pi;

  std::size_t batch() const { return mu.shape()[0]; }
};

/// Splits raw outputs [B x raw_size] into means, softplus(raw) + kMinScale
/// scales and log-softmax weights over all K modes.
HeadBatch decode_head(const Var& raw, const HeadLayout& layout);

/// Builds a head from value-level forecasts, one row per forecast. The
/// parameters enter the tape as constants.
HeadBatch head_from_forecasts(Tape& tape, const std::vector<MixtureForecast>& rows, const HeadLayout& layout);

MixtureForecast forecast_row(const HeadBatch& head, std::size_t row);
std::vector<MixtureForecast> forecast_rows(const HeadBatch& head);
HierarchicalMixture hierarchy_row(const HeadBatch& head, std::size_t row);

/// Flattens [t_pred x 2] trajectories into a [B x C] target matrix.
Tensor stack_targets(const std::vector<Tensor>& ys);

/// Per-mode Laplace log-density, [B x K]. `count` components of width C.
Var laplace_log_density(const Var& mu, const Var& b, const Tensor& y, std::size_t count);
Var mode_log_density(const HeadBatch& head, const Tensor& y);
/// Mean over time steps of the squared 2-D displacement, [B x K].
Var mode_sq_error(const HeadBatch& head, const Tensor& y);

struct MetaBatch {
  Var mu_bar;       // [B x K*C]
  Var b_bar;        // [B x K*C]
  Var log_pi_meta;  // [B x K*]
};

MetaBatch meta_stats(const HeadBatch& head, MetaStats mode = MetaStats::Verbatim);
Var meta_log_density(const HeadBatch& head, const MetaBatch& meta, const Tensor& y);

/// log sum_k pi_k p_k(y), [B x 1].
Var mixture_log_likelihood(const HeadBatch& head, const Tensor& y);
/// log P(Z = k | y), [B x K].
Var log_posterior(const HeadBatch& head, const Tensor& y);

/// Row-wise argmin with ties to the lowest index.
std::vector<std::size_t> row_argmin(const Tensor& m);
/// [rows x cols] matrix with a one at (i, idx[i]).
Tensor one_hot(const std::vector<std::size_t>& idx, std::size_t cols);

}  // namespace hmix
