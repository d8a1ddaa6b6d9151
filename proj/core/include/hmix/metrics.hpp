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

#include "hmix/mixture.hpp"

namespace hmix {

struct MetricReport {
  double made_1 = 0.0;
  double made_6 = 0.0;
  double mfde_1 = 0.0;
  double mfde_6 = 0.0;
  double nll_3 = 0.0;
  double nll_6 = 0.0;
  std::size_t n_scenes = 0;
};

/// Indices of the k most confident modes: weight descending, ties to the lower index.
std::vector<std::size_t> top_k_modes(const MixtureForecast& m, std::size_t k);

/// Among the top-k modes, the one whose endpoint is closest to y's endpoint.
std::size_t best_of_top_k(const Tensor& y, const MixtureForecast& m, std::size_t k);

double made_k(const Tensor& y, const MixtureForecast& m, std::size_t k);
double mfde_k(const Tensor& y, const MixtureForecast& m, std::size_t k);
/// Mixture NLL of the top-k modes with weights renormalised.
double nll_k(const Tensor& y, const MixtureForecast& m, std::size_t k);

/// Minimum over modes of the mean squared displacement.
double oracle_l2(const Tensor& y, const MixtureForecast& m);

/// Scene means. A k larger than a forecast's mode count is clipped to it.
MetricReport evaluate(const std::vector<MixtureForecast>& forecasts, const std::vector<Tensor>& ys);

/// Column names mADE_1 ... NLL_6 followed by #Prm and MAC.
std::vector<std::string> metric_columns();
std::string format_metric_table(const std::vector<std::string>& row_labels, const std::vector<MetricReport>& rows,
                                const std::vector<std::size_t>& params, const std::vector<std::size_t>& macs);

}  // namespace hmix
