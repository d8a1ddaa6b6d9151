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

#include "hmix/head.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix {

namespace {

// [count*width x count]: sums each width-`width` column block into one column.
Tensor block_sum(std::size_t count, std::size_t width) {
  Tensor s(Shape{count * width, count});
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t c = 0; c < width; ++c) s.at(k * width + c, k) = 1.0;
  }
  return s;
}

// [count x count*width]: repeats each column `width` times.
Tensor block_repeat(std::size_t count, std::size_t width) {
  Tensor s(Shape{count, count * width});
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t c = 0; c < width; ++c) s.at(k, k * width + c) = 1.0;
  }
  return s;
}

// [K*C x K*·C]: adds coordinate c of every sub-mode into coordinate c of its meta-mode.
Tensor meta_collapse(const HeadLayout& l) {
  const std::size_t c_dim = l.coords();
  Tensor s(Shape{l.modes() * c_dim, l.kstar * c_dim});
  for (std::size_t m = 0; m < l.kstar; ++m) {
    for (std::size_t k = 0; k < l.kprime; ++k) {
      for (std::size_t c = 0; c < c_dim; ++c) s.at((m * l.kprime + k) * c_dim + c, m * c_dim + c) = 1.0;
    }
  }
  return s;
}

Tensor tile_rows(const Tensor& y, std::size_t count) {
  const std::size_t rows = y.dim(0);
  const std::size_t width = y.dim(1);
  Tensor out(Shape{rows, count * width});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < count; ++k) {
      for (std::size_t c = 0; c < width; ++c) out.at(i, k * width + c) = y.at(i, c);
    }
  }
  return out;
}

void check_targets(const Var& mu, const Tensor& y, std::size_t count) {
  const Shape& s = mu.shape();
  if (y.rank() != 2 || s.size() != 2 || y.dim(0) != s[0] || y.dim(1) * count != s[1]) {
    throw DimensionError(
        fmt::format("targets {} do not match {} components of means {}", shape_str(y.shape()), count, shape_str(s)));
  }
}

}  // namespace

HeadBatch decode_head(const Var& raw, const HeadLayout& layout) {
  const std::size_t kc = layout.modes() * layout.coords();
  if (raw.shape().size() != 2 || raw.shape()[1] != layout.raw_size()) {
    throw DimensionError(fmt::format("head expects [B x {}] raw outputs, got {}", layout.raw_size(),
                                     shape_str(raw.shape())));
  }
  HeadBatch h;
  h.layout = layout;
  h.mu = ops::slice(raw, 1, 0, kc);
  h.b = ops::add_scalar(ops::softplus(ops::slice(raw, 1, kc, 2 * kc)), kMinScale);
  h.log_pi = ops::log_softmax(ops::slice(raw, 1, 2 * kc, 2 * kc + layout.modes()), 1);
  return h;
}

HeadBatch head_from_forecasts(Tape& tape, const std::vector<MixtureForecast>& rows, const HeadLayout& layout) {
  if (rows.empty()) throw ContractError("head_from_forecasts: no rows");
  const std::size_t k_count = layout.modes();
  const std::size_t c_dim = layout.coords();
  Tensor mu(Shape{rows.size(), k_count * c_dim});
  Tensor b(Shape{rows.size(), k_count * c_dim});
  Tensor log_pi(Shape{rows.size(), k_count});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& m = rows[i];
    m.validate();
    if (m.size() != k_count || m.t_pred() != layout.t_pred) {
      throw DimensionError(fmt::format("forecast {} has {} modes over {} steps, layout wants {} over {}", i, m.size(),
                                       m.t_pred(), k_count, layout.t_pred));
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::size_t c = 0; c < c_dim; ++c) {
        mu.at(i, k * c_dim + c) = m.components[k].mu[c];
        b.at(i, k * c_dim + c) = m.components[k].b[c];
      }
      log_pi.at(i, k) = std::log(std::max(m.weights[k], std::numeric_limits<double>::min()));
    }
  }
  return HeadBatch{layout, tape.constant(std::move(mu)), tape.constant(std::move(b)), tape.constant(std::move(log_pi))};
}

MixtureForecast forecast_row(const HeadBatch& head, std::size_t row) {
  const std::size_t k_count = head.layout.modes();
  const std::size_t c_dim = head.layout.coords();
  if (row >= head.batch()) throw BoundsError(fmt::format("row {} out of {}", row, head.batch()));
  const Tensor& mu = head.mu.value();
  const Tensor& b = head.b.value();
  const Tensor& lp = head.log_pi.value();
  MixtureForecast m;
  double total = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    LaplaceComponent c{Tensor(Shape{head.layout.t_pred, 2}), Tensor(Shape{head.layout.t_pred, 2})};
    for (std::size_t j = 0; j < c_dim; ++j) {
      c.mu[j] = mu.at(row, k * c_dim + j);
      c.b[j] = b.at(row, k * c_dim + j);
    }
    m.components.push_back(std::move(c));
    m.weights.push_back(std::exp(lp.at(row, k)));
    total += m.weights.back();
  }
  for (auto& w : m.weights) w /= total;
  return m;
}

std::vector<MixtureForecast> forecast_rows(const HeadBatch& head) {
  std::vector<MixtureForecast> out;
  out.reserve(head.batch());
  for (std::size_t i = 0; i < head.batch(); ++i) out.push_back(forecast_row(head, i));
  return out;
}

HierarchicalMixture hierarchy_row(const HeadBatch& head, std::size_t row) {
  auto flat = forecast_row(head, row);
  return HierarchicalMixture(head.layout.kstar, head.layout.kprime, std::move(flat.components),
                             std::move(flat.weights));
}

Tensor stack_targets(const std::vector<Tensor>& ys) {
  if (ys.empty()) throw ContractError("stack_targets: no targets");
  const std::size_t width = ys.front().size();
  Tensor out(Shape{ys.size(), width});
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (ys[i].size() != width) throw DimensionError("stack_targets: targets differ in length");
    for (std::size_t c = 0; c < width; ++c) out.at(i, c) = ys[i][c];
  }
  return out;
}

Var laplace_log_density(const Var& mu, const Var& b, const Tensor& y, std::size_t count) {
  check_targets(mu, y, count);
  Tape& tape = mu.tape();
  const std::size_t width = y.dim(1);
  const Var target = tape.constant(tile_rows(y, count));
  const Var dist = ops::div(ops::abs(ops::sub(target, mu)), b);
  const Var terms = ops::neg(ops::add(ops::log(ops::scale(b, 2.0)), dist));
  return ops::matmul(terms, tape.constant(block_sum(count, width)));
}

Var mode_log_density(const HeadBatch& head, const Tensor& y) {
  return laplace_log_density(head.mu, head.b, y, head.layout.modes());
}

Var mode_sq_error(const HeadBatch& head, const Tensor& y) {
  const std::size_t count = head.layout.modes();
  check_targets(head.mu, y, count);
  Tape& tape = head.mu.tape();
  const Var diff = ops::sub(tape.constant(tile_rows(y, count)), head.mu);
  const Var per_mode = ops::matmul(ops::square(diff), tape.constant(block_sum(count, y.dim(1))));
  return ops::scale(per_mode, 1.0 / static_cast<double>(head.layout.t_pred));
}

MetaBatch meta_stats(const HeadBatch& head, MetaStats mode) {
  const HeadLayout& l = head.layout;
  Tape& tape = head.mu.tape();
  const std::size_t rows = head.batch();
  const double kprime = static_cast<double>(l.kprime);

  MetaBatch out;
  const Var grouped = ops::reshape(head.log_pi, Shape{rows, l.kstar, l.kprime});
  out.log_pi_meta = ops::reshape(ops::logsumexp(grouped, 2), Shape{rows, l.kstar});

  const Var collapse = tape.constant(meta_collapse(l));
  const Var repeat = tape.constant(block_repeat(l.modes(), l.coords()));
  const Var moment = ops::add(ops::scale(ops::square(head.b), 2.0), ops::square(head.mu));

  Var b2;
  if (mode == MetaStats::Verbatim) {
    const Var pi_rep = ops::matmul(ops::exp(head.log_pi), repeat);
    out.mu_bar = ops::scale(ops::matmul(ops::mul(pi_rep, head.mu), collapse), 1.0 / kprime);
    const Var second = ops::scale(ops::matmul(moment, collapse), 1.0 / (2.0 * kprime));
    b2 = ops::sub(second, ops::square(out.mu_bar));
  } else {
    const Var meta_rep = ops::matmul(out.log_pi_meta, tape.constant(block_repeat(l.kstar, l.kprime)));
    const Var w_rep = ops::matmul(ops::exp(ops::sub(head.log_pi, meta_rep)), repeat);
    out.mu_bar = ops::matmul(ops::mul(w_rep, head.mu), collapse);
    const Var second = ops::matmul(ops::mul(w_rep, moment), collapse);
    b2 = ops::scale(ops::sub(second, ops::square(out.mu_bar)), 0.5);
  }
  out.b_bar = ops::sqrt(ops::clamp_min(b2, kMinScale * kMinScale));
  return out;
}

Var meta_log_density(const HeadBatch& head, const MetaBatch& meta, const Tensor& y) {
  return laplace_log_density(meta.mu_bar, meta.b_bar, y, head.layout.kstar);
}

Var mixture_log_likelihood(const HeadBatch& head, const Tensor& y) {
  return ops::logsumexp(ops::add(head.log_pi, mode_log_density(head, y)), 1);
}

Var log_posterior(const HeadBatch& head, const Tensor& y) {
  const Var joint = ops::add(head.log_pi, mode_log_density(head, y));
  return ops::sub(joint, ops::expand(ops::logsumexp(joint, 1), 1, head.layout.modes()));
}

std::vector<std::size_t> row_argmin(const Tensor& m) {
  if (m.rank() != 2) throw DimensionError("row_argmin expects a matrix");
  std::vector<std::size_t> idx(m.dim(0), 0);
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    for (std::size_t k = 1; k < m.dim(1); ++k) {
      if (m.at(i, k) < m.at(i, idx[i])) idx[i] = k;
    }
  }
  return idx;
}

Tensor one_hot(const std::vector<std::size_t>& idx, std::size_t cols) {
  Tensor out(Shape{idx.size(), cols});
  for (std::size_t i = 0; i < idx.size(); ++i) out.at(i, idx.at(i)) = 1.0;
  return out;
}

}  // namespace hmix
