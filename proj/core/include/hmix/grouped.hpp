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
#include <vector>

#include "hmix/autodiff.hpp"
#include "hmix/random.hpp"

namespace hmix {

/// A trainable tensor tagged with the group (ensemble member) that owns it.
/// `group` is -1 for parameters shared by every member.
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
  int group = -1;
};

/// Linear map whose weight is block-diagonal with `groups` blocks.
///
/// Input slice g (width in/G) only reaches output slice g (width out/G), so
/// only the G blocks are stored: in*out/G weights instead of in*out. Each
/// block is initialised as a standalone layer, uniform in +-1/sqrt(in/G).
/// The bias is kept per group; concatenated it is the usual length-`out`
/// vector.
class GroupedLinear {
 public:
  GroupedLinear() = default;
  GroupedLinear(std::size_t in, std::size_t out, std::size_t groups, bool bias, Rng& rng);

  /// h: [..., in] -> [..., out].
  Var forward(Tape& tape, const Var& h);

  /// Dense [in x out] matrix with the blocks on the diagonal.
  Tensor as_block_diagonal() const;

  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_features() const noexcept { return out_; }
  std::size_t groups() const noexcept { return groups_; }
  bool has_bias() const noexcept { return !bias_.empty(); }

  Tensor& block(std::size_t g) { return blocks_.at(g); }
  const Tensor& block(std::size_t g) const { return blocks_.at(g); }
  /// Group-g bias, shape [1 x out/G]. Throws if the layer has no bias.
  Tensor& bias(std::size_t g) { return bias_.at(g); }
  const Tensor& bias(std::size_t g) const { return bias_.at(g); }

  std::size_t param_count() const;
  /// Multiply-adds to transform `rows` input vectors.
  std::size_t mac_count(std::size_t rows) const;
  void collect(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  std::size_t groups_ = 1;
  std::vector<Tensor> blocks_;
  std::vector<Tensor> bias_;
};

/// softmax(Q K^T / sqrt(d_q)) V for rank-2 ([n x d]) or batched rank-3 inputs.
/// When `rng` is non-null, inverted dropout with `dropout` is applied to the
/// attention weights.
Var attention(const Var& q, const Var& k, const Var& v, double dropout = 0.0, Rng* rng = nullptr);

/// Multi-head attention packed into `groups` independent members.
///
/// Member g reads only slice g (width d/G) of Q, K and V, runs H heads of
/// width d/(G*H) on it, and the output projection is a GroupedLinear with the
/// same G, so output slice g depends on input slice g and member-g weights
/// only. With G = 1 this is ordinary multi-head attention.
class GroupedAttention {
 public:
  GroupedAttention() = default;
  GroupedAttention(std::size_t dim, std::size_t groups, std::size_t heads, Rng& rng, double dropout = 0.0);

  /// q: [..., n, d], k and v: [..., n_kv, d]. Dropout is active iff `rng` is set.
  Var forward(Tape& tape, const Var& q, const Var& k, const Var& v, Rng* rng = nullptr);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t groups() const noexcept { return groups_; }
  std::size_t heads() const noexcept { return heads_; }
  std::size_t head_dim() const noexcept { return dim_ / (groups_ * heads_); }

  Tensor& wq(std::size_t g, std::size_t h) { return wq_.at(g * heads_ + h); }
  Tensor& wk(std::size_t g, std::size_t h) { return wk_.at(g * heads_ + h); }
  Tensor& wv(std::size_t g, std::size_t h) { return wv_.at(g * heads_ + h); }
  GroupedLinear& out_proj() { return out_; }

  std::size_t param_count() const;
  std::size_t mac_count(std::size_t n_query, std::size_t n_kv) const;
  void collect(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  Var project(Tape& tape, const Var& x, Tensor& w);

  std::size_t dim_ = 0;
  std::size_t groups_ = 1;
  std::size_t heads_ = 1;
  double dropout_ = 0.0;
  std::vector<Tensor> wq_;
  std::vector<Tensor> wk_;
  std::vector<Tensor> wv_;
  GroupedLinear out_;
};

/// Normalisation over each group's slice of the feature axis, with per-group
/// scale and shift. Statistics never cross a group boundary.
class GroupedNorm {
 public:
  GroupedNorm() = default;
  GroupedNorm(std::size_t dim, std::size_t groups, double eps = 1e-8);

  Var forward(Tape& tape, const Var& h);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t groups() const noexcept { return groups_; }
  double eps() const noexcept { return eps_; }
  Tensor& scale(std::size_t g) { return scale_.at(g); }
  Tensor& shift(std::size_t g) { return shift_.at(g); }

  std::size_t param_count() const { return 2 * dim_; }
  void collect(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  std::size_t dim_ = 0;
  std::size_t groups_ = 1;
  double eps_ = 1e-8;
  std::vector<Tensor> scale_;
  std::vector<Tensor> shift_;
};

/// Embedding width for a packed model: base width d0 scaled by alpha.
struct WidthPlan {
  std::size_t base_dim = 128;
  double alpha = 1.0;
  std::size_t groups = 1;
  std::size_t heads = 1;
};

/// Smallest multiple of groups*heads that is >= alpha*base_dim.
std::size_t resolve_width(const WidthPlan& plan);

}  // namespace hmix
