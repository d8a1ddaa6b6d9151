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

#include "hmix/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix {

namespace {

void check_component(const LaplaceComponent& c, const Shape& expected) {
  if (c.mu.shape() != expected || c.b.shape() != expected) {
    throw ContractError(fmt::format("component shapes {} / {} differ from {}", shape_str(c.mu.shape()),
                                    shape_str(c.b.shape()), shape_str(expected)));
  }
  for (double b : c.b.values()) {
    if (!(b >= kMinScale)) throw DomainError(fmt::format("Laplace scale {} is below the minimum {}", b, kMinScale));
  }
}

void check_simplex(std::span<const double> w, const char* what) {
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError(fmt::format("{}: weight {} outside [0, 1]", what, v));
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError(fmt::format("{}: weights sum to {}, not 1", what, total));
}

double log_sum_exp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double z = 0.0;
  for (double x : xs) z += std::exp(x - hi);
  return hi + std::log(z);
}

std::vector<double> joint_log_terms(const Tensor& y, const MixtureForecast& m) {
  std::vector<double> terms(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    terms[k] = m.weights[k] > 0.0 ? std::log(m.weights[k]) + laplace_log_density(y, m.components[k])
                                  : -std::numeric_limits<double>::infinity();
  }
  return terms;
}

}  // namespace

void MixtureForecast::validate() const {
  if (components.empty()) throw ContractError("mixture has no components");
  if (components.size() != weights.size()) {
    throw ContractError(fmt::format("{} components but {} weights", components.size(), weights.size()));
  }
  const Shape shape = components.front().mu.shape();
  if (shape.size() != 2 || shape[1] != 2) throw ContractError("component means must be [t_pred x 2]");
  for (const auto& c : components) check_component(c, shape);
  check_simplex(weights, "mixture");
}

HierarchicalMixture::HierarchicalMixture(std::size_t kstar, std::size_t kprime,
                                         std::vector<LaplaceComponent> components, std::vector<double> joint_weights)
    : kstar_(kstar), kprime_(kprime), components_(std::move(components)), weights_(std::move(joint_weights)) {
  if (kstar == 0 || kprime == 0 || components_.size() != kstar * kprime || weights_.size() != kstar * kprime) {
    throw ContractError(fmt::format("hierarchy {}x{} needs {} components and weights, got {} and {}", kstar, kprime,
                                    kstar * kprime, components_.size(), weights_.size()));
  }
  flatten().validate();
}

const LaplaceComponent& HierarchicalMixture::component(std::size_t meta, std::size_t sub) const {
  return components_.at(meta * kprime_ + sub);
}

double HierarchicalMixture::weight(std::size_t meta, std::size_t sub) const { return weights_.at(meta * kprime_ + sub); }

std::vector<double> HierarchicalMixture::meta_weights() const {
  std::vector<double> out(kstar_, 0.0);
  for (std::size_t m = 0; m < kstar_; ++m) {
    for (std::size_t s = 0; s < kprime_; ++s) out[m] += weights_[m * kprime_ + s];
  }
  return out;
}

std::span<const LaplaceComponent> HierarchicalMixture::group(std::size_t meta) const {
  if (meta >= kstar_) throw BoundsError(fmt::format("meta-mode {} out of {}", meta, kstar_));
  return std::span<const LaplaceComponent>(components_).subspan(meta * kprime_, kprime_);
}

std::span<const double> HierarchicalMixture::group_weights(std::size_t meta) const {
  if (meta >= kstar_) throw BoundsError(fmt::format("meta-mode {} out of {}", meta, kstar_));
  return std::span<const double>(weights_).subspan(meta * kprime_, kprime_);
}

MixtureForecast HierarchicalMixture::flatten() const { return MixtureForecast{components_, weights_}; }

double laplace_log_density(const Tensor& y, const LaplaceComponent& c) {
  if (y.shape() != c.mu.shape() || c.b.shape() != c.mu.shape()) {
    throw DimensionError(fmt::format("laplace_log_density: y {} vs mu {} vs b {}", shape_str(y.shape()),
                                     shape_str(c.mu.shape()), shape_str(c.b.shape())));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double b = c.b[i];
    if (!(b > 0.0)) throw DomainError(fmt::format("laplace_log_density: non-positive scale {}", b));
    total += -std::log(2.0 * b) - std::abs(y[i] - c.mu[i]) / b;
  }
  return total;
}

double mixture_nll(const Tensor& y, const MixtureForecast& m) {
  m.validate();
  const auto terms = joint_log_terms(y, m);
  return -log_sum_exp(terms);
}

std::vector<double> responsibilities(const Tensor& y, const MixtureForecast& m) {
  m.validate();
  auto terms = joint_log_terms(y, m);
  const double lse = log_sum_exp(terms);
  for (auto& t : terms) t = std::exp(t - lse);
  return terms;
}

MetaModeStats meta_mode_stats(std::span<const LaplaceComponent> group, std::span<const double> joint_weights,
                              MetaStats mode) {
  if (group.empty() || group.size() != joint_weights.size()) {
    throw ContractError("meta_mode_stats: group must be nonempty with one weight per component");
  }
  const Shape& shape = group.front().mu.shape();
  const std::size_t n = group.front().mu.size();
  const double kprime = static_cast<double>(group.size());
  const double meta_weight = std::accumulate(joint_weights.begin(), joint_weights.end(), 0.0);

  MetaModeStats out{Tensor(shape), Tensor(shape)};
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    double second = 0.0;
    for (std::size_t k = 0; k < group.size(); ++k) {
      const double mu = group[k].mu[i];
      const double b = group[k].b[i];
      if (mode == MetaStats::Verbatim) {
        mean += joint_weights[k] * mu;
        second += 2.0 * b * b + mu * mu;
      } else {
        const double w = joint_weights[k] / meta_weight;
        mean += w * mu;
        second += w * (2.0 * b * b + mu * mu);
      }
    }
    double b2 = 0.0;
    if (mode == MetaStats::Verbatim) {
      mean /= kprime;
      b2 = second / (2.0 * kprime) - mean * mean;
    } else {
      b2 = 0.5 * (second - mean * mean);
    }
    out.mu_bar[i] = mean;
    out.b_bar[i] = std::sqrt(std::max(b2, kMinScale * kMinScale));
  }
  return out;
}

MixtureForecast meta_mixture(const HierarchicalMixture& h, MetaStats mode) {
  MixtureForecast out;
  auto weights = h.meta_weights();
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (std::size_t m = 0; m < h.kstar(); ++m) {
    auto stats = meta_mode_stats(h.group(m), h.group_weights(m), mode);
    out.components.push_back({std::move(stats.mu_bar), std::move(stats.b_bar)});
    out.weights.push_back(weights[m] / total);
  }
  return out;
}

}  // namespace hmix
