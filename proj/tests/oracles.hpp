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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <tuple>
#include <vector>

#include "hmix/mixture.hpp"

// Brute-force reference implementations used to check the library.
namespace hmix::oracle {

using Key = std::tuple<double, std::size_t, std::size_t>;

/// Density in extended precision by direct summation over components and coordinates.
inline long double mixture_density(const Tensor& y, const MixtureForecast& m) {
  long double p = 0.0L;
  for (std::size_t k = 0; k < m.size(); ++k) {
    long double d = m.weights[k];
    for (std::size_t i = 0; i < y.size(); ++i) {
      const long double b = m.components[k].b[i];
      d *= std::exp(-std::fabs(static_cast<long double>(y[i]) - m.components[k].mu[i]) / b) / (2.0L * b);
    }
    p += d;
  }
  return p;
}

/// The unique k-subset whose every key is below every key outside it, found by
/// walking all k-subsets.
inline std::vector<std::size_t> best_subset(const std::vector<Key>& keys, std::size_t k) {
  const std::size_t n = keys.size();
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
  do {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!pick[i]) continue;
      for (std::size_t j = 0; j < n && ok; ++j) {
        if (!pick[j] && !(keys[i] < keys[j])) ok = false;
      }
    }
    if (ok) {
      std::vector<std::size_t> out;
      for (std::size_t i = 0; i < n; ++i) {
        if (pick[i]) out.push_back(i);
      }
      return out;
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return {};
}

/// Top-k of one forecast: weight descending, then index.
inline std::vector<std::size_t> top_k(const MixtureForecast& m, std::size_t k) {
  std::vector<Key> keys;
  for (std::size_t i = 0; i < m.size(); ++i) keys.emplace_back(-m.weights[i], i, 0);
  return best_subset(keys, k);
}

inline double endpoint_error(const Tensor& y, const Tensor& mu) {
  const std::size_t t = y.dim(0) - 1;
  return std::sqrt(std::pow(y.at(t, 0) - mu.at(t, 0), 2) + std::pow(y.at(t, 1) - mu.at(t, 1), 2));
}

inline std::size_t best_mode(const Tensor& y, const MixtureForecast& m, std::size_t k) {
  std::size_t best = m.size();
  for (std::size_t i : top_k(m, k)) {
    if (best == m.size() || endpoint_error(y, m.components[i].mu) < endpoint_error(y, m.components[best].mu)) best = i;
  }
  return best;
}

inline double made(const Tensor& y, const MixtureForecast& m, std::size_t k) {
  const Tensor& mu = m.components[best_mode(y, m, k)].mu;
  double total = 0.0;
  for (std::size_t t = 0; t < y.dim(0); ++t) {
    total += std::sqrt(std::pow(y.at(t, 0) - mu.at(t, 0), 2) + std::pow(y.at(t, 1) - mu.at(t, 1), 2));
  }
  return total / static_cast<double>(y.dim(0));
}

inline double mfde(const Tensor& y, const MixtureForecast& m, std::size_t k) {
  return endpoint_error(y, m.components[best_mode(y, m, k)].mu);
}

inline double nll(const Tensor& y, const MixtureForecast& m, std::size_t k) {
  MixtureForecast sub;
  double mass = 0.0;
  for (std::size_t i : top_k(m, k)) mass += m.weights[i];
  for (std::size_t i : top_k(m, k)) {
    sub.components.push_back(m.components[i]);
    sub.weights.push_back(m.weights[i] / mass);
  }
  return static_cast<double>(-std::log(mixture_density(y, sub)));
}

/// (member, mode) pairs of the pooled top-k, member weights divided by M.
inline std::vector<std::pair<std::size_t, std::size_t>> pooled_top_k(const std::vector<MixtureForecast>& members,
                                                                     std::size_t k) {
  std::vector<Key> keys;
  std::vector<std::pair<std::size_t, std::size_t>> ids;
  for (std::size_t m = 0; m < members.size(); ++m) {
    for (std::size_t i = 0; i < members[m].size(); ++i) {
      keys.emplace_back(-members[m].weights[i] / static_cast<double>(members.size()), i, m);
      ids.emplace_back(m, i);
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t j : best_subset(keys, k)) out.push_back(ids[j]);
  return out;
}

/// Average log-density of every pooled mean under all members, then the k best.
inline std::vector<std::pair<std::size_t, std::size_t>> rip_top_k(const std::vector<MixtureForecast>& members,
                                                                  std::size_t k, std::vector<double>* scores = nullptr) {
  std::vector<Key> keys;
  std::vector<std::pair<std::size_t, std::size_t>> ids;
  for (std::size_t m = 0; m < members.size(); ++m) {
    for (std::size_t i = 0; i < members[m].size(); ++i) {
      long double s = 0.0L;
      for (const auto& other : members) s += std::log(mixture_density(members[m].components[i].mu, other));
      s /= static_cast<long double>(members.size());
      keys.emplace_back(-static_cast<double>(s), i, m);
      ids.emplace_back(m, i);
      if (scores != nullptr) scores->push_back(static_cast<double>(s));
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t j : best_subset(keys, k)) out.push_back(ids[j]);
  return out;
}

}  // namespace hmix::oracle
