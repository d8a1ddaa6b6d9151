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

#include "hmix/grouped.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix {

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  t.set_requires_grad(true);
  return t;
}

Tensor trainable(Shape shape, double fill) {
  Tensor t(std::move(shape), fill);
  t.set_requires_grad(true);
  return t;
}

// Flattens every leading axis so the last axis is the feature axis.
Shape rows_shape(const Shape& shape) {
  std::size_t rows = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) rows *= shape[i];
  return {rows, shape.back()};
}

Shape with_last(Shape shape, std::size_t last) {
  shape.back() = last;
  return shape;
}

}  // namespace

GroupedLinear::GroupedLinear(std::size_t in, std::size_t out, std::size_t groups, bool bias, Rng& rng)
    : in_(in), out_(out), groups_(groups) {
  if (groups == 0 || in == 0 || out == 0 || in % groups != 0 || out % groups != 0) {
    throw ConfigError(fmt::format("GroupedLinear: groups {} must divide in {} and out {}", groups, in, out));
  }
  const std::size_t bi = in / groups;
  const std::size_t bo = out / groups;
  const double bound = 1.0 / std::sqrt(static_cast<double>(bi));
  for (std::size_t g = 0; g < groups; ++g) blocks_.push_back(uniform_tensor({bi, bo}, bound, rng));
  if (bias) {
    for (std::size_t g = 0; g < groups; ++g) bias_.push_back(uniform_tensor({1, bo}, bound, rng));
  }
}

Var GroupedLinear::forward(Tape& tape, const Var& h) {
  const Shape& shape = h.shape();
  if (shape.empty() || shape.back() != in_) {
    throw DimensionError(fmt::format("GroupedLinear: expected last dim {}, got {}", in_, shape_str(shape)));
  }
  const Shape flat = rows_shape(shape);
  const Var x = shape.size() == 2 ? h : ops::reshape(h, flat);
  const std::size_t bi = in_ / groups_;
  std::vector<Var> parts;
  parts.reserve(groups_);
  for (std::size_t g = 0; g < groups_; ++g) {
    const Var xg = groups_ == 1 ? x : ops::slice(x, 1, g * bi, (g + 1) * bi);
    Var yg = ops::matmul(xg, tape.leaf(blocks_[g]));
    if (!bias_.empty()) yg = ops::add(yg, ops::expand(tape.leaf(bias_[g]), 0, flat[0]));
    parts.push_back(yg);
  }
  const Var y = groups_ == 1 ? parts.front() : ops::concat(parts, 1);
  return shape.size() == 2 ? y : ops::reshape(y, with_last(shape, out_));
}

Tensor GroupedLinear::as_block_diagonal() const {
  Tensor dense(Shape{in_, out_});
  const std::size_t bi = in_ / groups_;
  const std::size_t bo = out_ / groups_;
  for (std::size_t g = 0; g < groups_; ++g) {
    for (std::size_t i = 0; i < bi; ++i) {
      for (std::size_t j = 0; j < bo; ++j) dense.at(g * bi + i, g * bo + j) = blocks_[g].at(i, j);
    }
  }
  return dense;
}

std::size_t GroupedLinear::param_count() const { return in_ * out_ / groups_ + (bias_.empty() ? 0 : out_); }

std::size_t GroupedLinear::mac_count(std::size_t rows) const { return rows * in_ * out_ / groups_; }

void GroupedLinear::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  for (std::size_t g = 0; g < groups_; ++g) {
    out.push_back({fmt::format("{}.w{}", prefix, g), &blocks_[g], static_cast<int>(g)});
  }
  for (std::size_t g = 0; g < bias_.size(); ++g) {
    out.push_back({fmt::format("{}.b{}", prefix, g), &bias_[g], static_cast<int>(g)});
  }
}

Var attention(const Var& q, const Var& k, const Var& v, double dropout, Rng* rng) {
  const std::size_t dq = q.shape().back();
  if (k.shape().back() != dq || k.shape().size() != q.shape().size() || v.shape().size() != q.shape().size() ||
      k.shape()[k.shape().size() - 2] != v.shape()[v.shape().size() - 2]) {
    throw DimensionError(fmt::format("attention: Q {}, K {}, V {} are inconsistent", shape_str(q.shape()),
                                     shape_str(k.shape()), shape_str(v.shape())));
  }
  const Var scores = ops::scale(ops::matmul(q, ops::transpose(k)), 1.0 / std::sqrt(static_cast<double>(dq)));
  Var weights = ops::softmax(scores, scores.shape().size() - 1);
  if (rng != nullptr && dropout > 0.0) weights = ops::dropout(weights, dropout, *rng);
  return ops::matmul(weights, v);
}

GroupedAttention::GroupedAttention(std::size_t dim, std::size_t groups, std::size_t heads, Rng& rng, double dropout)
    : dim_(dim), groups_(groups), heads_(heads), dropout_(dropout) {
  if (groups == 0 || heads == 0 || dim == 0 || dim % (groups * heads) != 0) {
    throw ConfigError(fmt::format("GroupedAttention: groups*heads = {} must divide dim {}", groups * heads, dim));
  }
  const std::size_t dg = dim / groups;
  const std::size_t dh = dg / heads;
  const double bound = 1.0 / std::sqrt(static_cast<double>(dg));
  for (std::size_t i = 0; i < groups * heads; ++i) {
    wq_.push_back(uniform_tensor({dg, dh}, bound, rng));
    wk_.push_back(uniform_tensor({dg, dh}, bound, rng));
    wv_.push_back(uniform_tensor({dg, dh}, bound, rng));
  }
  out_ = GroupedLinear(dim, dim, groups, true, rng);
}

Var GroupedAttention::project(Tape& tape, const Var& x, Tensor& w) {
  const Shape& shape = x.shape();
  const Var flat = shape.size() == 2 ? x : ops::reshape(x, rows_shape(shape));
  const Var y = ops::matmul(flat, tape.leaf(w));
  return shape.size() == 2 ? y : ops::reshape(y, with_last(shape, w.dim(1)));
}

Var GroupedAttention::forward(Tape& tape, const Var& q, const Var& k, const Var& v, Rng* rng) {
  for (const Var* x : {&q, &k, &v}) {
    if (x->shape().size() < 2 || x->shape().back() != dim_) {
      throw DimensionError(
          fmt::format("GroupedAttention: expected last dim {}, got {}", dim_, shape_str(x->shape())));
    }
  }
  const std::size_t axis = q.shape().size() - 1;
  const std::size_t dg = dim_ / groups_;
  std::vector<Var> group_out;
  group_out.reserve(groups_);
  for (std::size_t g = 0; g < groups_; ++g) {
    const Var qg = groups_ == 1 ? q : ops::slice(q, axis, g * dg, (g + 1) * dg);
    const Var kg = groups_ == 1 ? k : ops::slice(k, axis, g * dg, (g + 1) * dg);
    const Var vg = groups_ == 1 ? v : ops::slice(v, axis, g * dg, (g + 1) * dg);
    std::vector<Var> heads;
    heads.reserve(heads_);
    for (std::size_t h = 0; h < heads_; ++h) {
      heads.push_back(attention(project(tape, qg, wq(g, h)), project(tape, kg, wk(g, h)),
                                project(tape, vg, wv(g, h)), dropout_, rng));
    }
    group_out.push_back(heads_ == 1 ? heads.front() : ops::concat(heads, axis));
  }
  const Var merged = groups_ == 1 ? group_out.front() : ops::concat(group_out, axis);
  return out_.forward(tape, merged);
}

std::size_t GroupedAttention::param_count() const { return 3 * dim_ * dim_ / groups_ + out_.param_count(); }

std::size_t GroupedAttention::mac_count(std::size_t n_query, std::size_t n_kv) const {
  const std::size_t dg = dim_ / groups_;
  const std::size_t dh = head_dim();
  const std::size_t per_head = n_query * dg * dh + 2 * n_kv * dg * dh  // Q, K, V projections
                               + 2 * n_query * n_kv * dh;              // scores and weighted values
  return groups_ * heads_ * per_head + out_.mac_count(n_query);
}

void GroupedAttention::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  for (std::size_t g = 0; g < groups_; ++g) {
    for (std::size_t h = 0; h < heads_; ++h) {
      const int owner = static_cast<int>(g);
      out.push_back({fmt::format("{}.q{}_{}", prefix, g, h), &wq(g, h), owner});
      out.push_back({fmt::format("{}.k{}_{}", prefix, g, h), &wk(g, h), owner});
      out.push_back({fmt::format("{}.v{}_{}", prefix, g, h), &wv(g, h), owner});
    }
  }
  out_.collect(prefix + ".o", out);
}

GroupedNorm::GroupedNorm(std::size_t dim, std::size_t groups, double eps) : dim_(dim), groups_(groups), eps_(eps) {
  if (groups == 0 || dim == 0 || dim % groups != 0) {
    throw ConfigError(fmt::format("GroupedNorm: groups {} must divide dim {}", groups, dim));
  }
  if (!(eps > 0.0)) throw ConfigError("GroupedNorm: eps must be positive");
  for (std::size_t g = 0; g < groups; ++g) {
    scale_.push_back(trainable({1, dim / groups}, 1.0));
    shift_.push_back(trainable({1, dim / groups}, 0.0));
  }
}

Var GroupedNorm::forward(Tape& tape, const Var& h) {
  const Shape& shape = h.shape();
  if (shape.empty() || shape.back() != dim_) {
    throw DimensionError(fmt::format("GroupedNorm: expected last dim {}, got {}", dim_, shape_str(shape)));
  }
  const Shape flat = rows_shape(shape);
  const Var x = shape.size() == 2 ? h : ops::reshape(h, flat);
  const std::size_t w = dim_ / groups_;
  const double inv_w = 1.0 / static_cast<double>(w);
  const Var one = tape.constant(Tensor::scalar(1.0));
  std::vector<Var> parts;
  parts.reserve(groups_);
  for (std::size_t g = 0; g < groups_; ++g) {
    const Var xg = groups_ == 1 ? x : ops::slice(x, 1, g * w, (g + 1) * w);
    const Var mu = ops::expand(ops::scale(ops::reduce_sum(xg, 1), inv_w), 1, w);
    const Var centered = ops::sub(xg, mu);
    const Var var = ops::scale(ops::reduce_sum(ops::square(centered), 1), inv_w);
    const Var inv_std = ops::expand(ops::div(one, ops::sqrt(ops::add_scalar(var, eps_))), 1, w);
    const Var normed = ops::mul(centered, inv_std);
    parts.push_back(ops::add(ops::mul(normed, ops::expand(tape.leaf(scale_[g]), 0, flat[0])),
                             ops::expand(tape.leaf(shift_[g]), 0, flat[0])));
  }
  const Var y = groups_ == 1 ? parts.front() : ops::concat(parts, 1);
  return shape.size() == 2 ? y : ops::reshape(y, shape);
}

void GroupedNorm::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  for (std::size_t g = 0; g < groups_; ++g) {
    out.push_back({fmt::format("{}.scale{}", prefix, g), &scale_[g], static_cast<int>(g)});
    out.push_back({fmt::format("{}.shift{}", prefix, g), &shift_[g], static_cast<int>(g)});
  }
}

std::size_t resolve_width(const WidthPlan& plan) {
  if (!(plan.alpha > 0.0)) throw ConfigError(fmt::format("width factor alpha must be positive, got {}", plan.alpha));
  if (plan.groups == 0 || plan.heads == 0) throw ConfigError("groups and heads must be positive");
  const std::size_t unit = plan.groups * plan.heads;
  const double target = plan.alpha * static_cast<double>(plan.base_dim);
  // Guard against 1.5*128 landing a hair above 192 in binary floating point.
  const auto units = static_cast<std::size_t>(std::ceil(target / static_cast<double>(unit) - 1e-9));
  return std::max<std::size_t>(units, 1) * unit;
}

}  // namespace hmix
