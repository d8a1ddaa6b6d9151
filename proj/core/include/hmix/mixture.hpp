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
#include <span>
#include <vector>

#include "hmix/tensor.hpp"

namespace hmix {

/// Lower bound on every Laplace scale.
inline constexpr double kMinScale = 1e-4;

/// Independent per-coordinate Laplace over a trajectory; mu and b are [t_pred x 2].
struct LaplaceComponent {
  Tensor mu;
  Tensor b;
};

/// Flat mixture of Laplace trajectories with weights on the simplex.
struct MixtureForecast {
  std::vector<LaplaceComponent> components;
  std::vector<double> weights;

  std::size_t size() const noexcept { return components.size(); }
  std::size_t t_pred() const { return components.at(0).mu.dim(0); }
  /// Throws ContractError unless shapes agree and weights sum to 1 +- 1e-9, DomainError if some b < kMinScale.
  void validate() const;
};

/// How meta-mode means and scales are formed from their sub-modes.
enum class MetaStats {
  /// mu_bar = (1/K') sum pi mu,  b_bar^2 = (1/2K') sum (2 b^2 + mu^2) - mu_bar^2.
  Verbatim,
  /// Same moments with sub-mode weights renormalised within the meta-mode:
  /// mu_bar = sum w mu,  b_bar^2 = (sum w (2 b^2 + mu^2) - mu_bar^2) / 2,  w = pi / pi_meta.
  Normalized,
};

struct MetaModeStats {
  Tensor mu_bar;
  Tensor b_bar;
};

/// K* meta-modes of K' Laplace components each. The K*K' joint weights form
/// one simplex; a meta weight is the sum of its sub-mode weights.
/// Components are stored meta-major: index = k* K' + k'.
class HierarchicalMixture {
 public:
  HierarchicalMixture() = default;
  HierarchicalMixture(std::size_t kstar, std::size_t kprime, std::vector<LaplaceComponent> components,
                      std::vector<double> joint_weights);

  std::size_t kstar() const noexcept { return kstar_; }
  std::size_t kprime() const noexcept { return kprime_; }
  std::size_t size() const noexcept { return components_.size(); }
  std::size_t t_pred() const { return components_.at(0).mu.dim(0); }

  const LaplaceComponent& component(std::size_t meta, std::size_t sub) const;
  double weight(std::size_t meta, std::size_t sub) const;
  const std::vector<LaplaceComponent>& components() const noexcept { return components_; }
  const std::vector<double>& joint_weights() const noexcept { return weights_; }

  std::vector<double> meta_weights() const;
  /// Sub-modes of one meta-mode with their joint (not renormalised) weights.
  std::span<const LaplaceComponent> group(std::size_t meta) const;
  std::span<const double> group_weights(std::size_t meta) const;

  /// The same density as one flat K*K'-component mixture.
  MixtureForecast flatten() const;

 private:
  std::size_t kstar_ = 0;
  std::size_t kprime_ = 0;
  std::vector<LaplaceComponent> components_;
  std::vector<double> weights_;
};

/// Sum over every coordinate of -log(2b) - |y - mu| / b.
double laplace_log_density(const Tensor& y, const LaplaceComponent& c);

/// -log sum_k pi_k exp(log density_k), via log-sum-exp.
double mixture_nll(const Tensor& y, const MixtureForecast& m);

/// Posterior over components, pi_k density_k(y) normalised, computed in log space.
std::vector<double> responsibilities(const Tensor& y, const MixtureForecast& m);

/// Meta-mode mean and scale from one group of sub-modes and their joint weights.
/// b_bar^2 is clamped below at kMinScale^2 before the square root.
MetaModeStats meta_mode_stats(std::span<const LaplaceComponent> group, std::span<const double> joint_weights,
                              MetaStats mode = MetaStats::Verbatim);

/// K*-component mixture of the meta-modes, weights pi_{k*} renormalised.
MixtureForecast meta_mixture(const HierarchicalMixture& h, MetaStats mode = MetaStats::Verbatim);

}  // namespace hmix
