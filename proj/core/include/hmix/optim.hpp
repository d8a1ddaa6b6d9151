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

#include "hmix/grouped.hpp"

namespace hmix {

struct AdamConfig {
  double lr = 7.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of `params` in place. `t` is the 1-based step.
void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
               std::size_t t, double lr, const AdamConfig& cfg);

/// Adam over a fixed parameter list, reading gradients from each tensor's adjoint.
class Adam {
 public:
  Adam(std::vector<ParamRef> params, AdamConfig cfg);

  void step(double lr);
  void zero_grad();

  std::size_t steps() const noexcept { return t_; }
  void set_steps(std::size_t t) noexcept { t_ = t; }
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<ParamRef>& params() const noexcept { return params_; }

 private:
  std::vector<ParamRef> params_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Rescales the adjoints of each member group so its global L2 norm is at
/// most `max_norm`. Returns the pre-clipping norm of every group, indexed by
/// group (shared parameters, group -1, form their own group at the end).
std::vector<double> clip_grad_norm_by_group(const std::vector<ParamRef>& params, double max_norm);

}  // namespace hmix
