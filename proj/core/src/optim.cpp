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

#include "hmix/optim.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix {

void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
               std::size_t t, double lr, const AdamConfig& cfg) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw DimensionError(fmt::format("adam_step: {} params, {} grads, {} / {} moments", params.size(), grads.size(),
                                     m.size(), v.size()));
  }
  if (t == 0) throw ContractError("adam_step: step count starts at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

Adam::Adam(std::vector<ParamRef> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    if (!p.tensor->requires_grad()) throw ContractError(fmt::format("parameter {} does not require grad", p.name));
    m_.emplace_back(p.tensor->size(), 0.0);
    v_.emplace_back(p.tensor->size(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i].tensor;
    adam_step(p.values(), p.adjoint(), m_[i], v_[i], t_, lr, cfg_);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor->zero_adjoint();
}

std::vector<double> clip_grad_norm_by_group(const std::vector<ParamRef>& params, double max_norm) {
  int top = -1;
  for (const auto& p : params) top = std::max(top, p.group);
  const std::size_t shared = static_cast<std::size_t>(top + 1);
  auto slot = [&](int g) { return g < 0 ? shared : static_cast<std::size_t>(g); };

  std::vector<double> sq(shared + 1, 0.0);
  for (const auto& p : params) {
    for (double g : p.tensor->adjoint()) sq[slot(p.group)] += g * g;
  }
  std::vector<double> norms(sq.size());
  for (std::size_t i = 0; i < sq.size(); ++i) norms[i] = std::sqrt(sq[i]);
  for (const auto& p : params) {
    const double n = norms[slot(p.group)];
    if (n > max_norm) {
      const double s = max_norm / n;
      for (double& g : p.tensor->adjoint()) g *= s;
    }
  }
  return norms;
}

}  // namespace hmix
