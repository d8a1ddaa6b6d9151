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
#include <vector>

#include "hmix/mixture.hpp"
#include "hmix/random.hpp"
#include "hmix/tensor.hpp"

namespace hmix::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline std::vector<double> random_simplex(std::size_t k, Rng& rng) {
  std::vector<double> w(k);
  double total = 0.0;
  for (double& v : w) {
    v = 0.05 + rng.uniform();
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

inline LaplaceComponent random_component(std::size_t t_pred, Rng& rng, double spread = 2.0) {
  return {random_tensor({t_pred, 2}, rng, -spread, spread), random_tensor({t_pred, 2}, rng, 0.3, 1.2)};
}

inline MixtureForecast random_forecast(std::size_t k, std::size_t t_pred, Rng& rng, double spread = 2.0) {
  MixtureForecast m;
  for (std::size_t i = 0; i < k; ++i) m.components.push_back(random_component(t_pred, rng, spread));
  m.weights = random_simplex(k, rng);
  return m;
}

inline HierarchicalMixture random_hierarchy(std::size_t kstar, std::size_t kprime, std::size_t t_pred, Rng& rng) {
  MixtureForecast f = random_forecast(kstar * kprime, t_pred, rng);
  return HierarchicalMixture(kstar, kprime, f.components, f.weights);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace hmix::testing
