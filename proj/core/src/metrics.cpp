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

#include "hmix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix {

namespace {

void check_k(const MixtureForecast& m, std::size_t k) {
  if (k == 0 || k > m.size()) throw ContractError(fmt::format("k = {} outside [1, {}]", k, m.size()));
}

double step_distance(const Tensor& y, const Tensor& mu, std::size_t t) {
  return std::hypot(y.at(t, 0) - mu.at(t, 0), y.at(t, 1) - mu.at(t, 1));
}

}  // namespace

std::vector<std::size_t> top_k_modes(const MixtureForecast& m, std::size_t k) {
  check_k(m, k);
  std::vector<std::size_t> idx(m.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return m.weights[a] > m.weights[b]; });
  idx.resize(k);
  return idx;
}

std::size_t best_of_top_k(const Tensor& y, const MixtureForecast& m, std::size_t k) {
  const auto top = top_k_modes(m, k);
  const std::size_t last = y.dim(0) - 1;
  std::size_t best = top.front();
  double best_d = step_distance(y, m.components[best].mu, last);
  for (std::size_t i = 1; i < top.size(); ++i) {
    const double d = step_distance(y, m.components[top[i]].mu, last);
    if (d < best_d) {
      best_d = d;
      best = top[i];
    }
  }
  return best;
}

double made_k(const Tensor& y, const MixtureForecast& m, std::size_t k) {
  const Tensor& mu = m.components[best_of_top_k(y, m, k)].mu;
  double total = 0.0;
  for (std::size_t t = 0; t < y.dim(0); ++t) total += step_distance(y, mu, t);
  return total / static_cast<double>(y.dim(0));
}

double mfde_k(const Tensor& y, const MixtureForecast& m, std::size_t k) {
  return step_distance(y, m.components[best_of_top_k(y, m, k)].mu, y.dim(0) - 1);
}

double nll_k(const Tensor& y, const MixtureForecast& m, std::size_t k) {
  const auto top = top_k_modes(m, k);
  MixtureForecast sub;
  double total = 0.0;
  for (std::size_t i : top) total += m.weights[i];
  for (std::size_t i : top) {
    sub.components.push_back(m.components[i]);
    sub.weights.push_back(m.weights[i] / total);
  }
  return mixture_nll(y, sub);
}

double oracle_l2(const Tensor& y, const MixtureForecast& m) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : m.components) {
    double total = 0.0;
    for (std::size_t t = 0; t < y.dim(0); ++t) {
      const double dx = y.at(t, 0) - c.mu.at(t, 0);
      const double dy = y.at(t, 1) - c.mu.at(t, 1);
      total += dx * dx + dy * dy;
    }
    best = std::min(best, total / static_cast<double>(y.dim(0)));
  }
  return best;
}

MetricReport evaluate(const std::vector<MixtureForecast>& forecasts, const std::vector<Tensor>& ys) {
  if (forecasts.size() != ys.size()) {
    throw DimensionError(fmt::format("{} forecasts for {} targets", forecasts.size(), ys.size()));
  }
  MetricReport r;
  r.n_scenes = ys.size();
  if (ys.empty()) return r;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const auto& m = forecasts[i];
    const std::size_t k3 = std::min<std::size_t>(3, m.size());
    const std::size_t k6 = std::min<std::size_t>(6, m.size());
    r.made_1 += made_k(ys[i], m, 1);
    r.made_6 += made_k(ys[i], m, k6);
    r.mfde_1 += mfde_k(ys[i], m, 1);
    r.mfde_6 += mfde_k(ys[i], m, k6);
    r.nll_3 += nll_k(ys[i], m, k3);
    r.nll_6 += nll_k(ys[i], m, k6);
  }
  const double n = static_cast<double>(ys.size());
  for (double* v : {&r.made_1, &r.made_6, &r.mfde_1, &r.mfde_6, &r.nll_3, &r.nll_6}) *v /= n;
  return r;
}

std::vector<std::string> metric_columns() {
  return {"mADE_1", "mADE_6", "mFDE_1", "mFDE_6", "NLL_3", "NLL_6", "#Prm", "MAC"};
}

std::string format_metric_table(const std::vector<std::string>& row_labels, const std::vector<MetricReport>& rows,
                                const std::vector<std::size_t>& params, const std::vector<std::size_t>& macs) {
  std::size_t label_w = 5;
  for (const auto& l : row_labels) label_w = std::max(label_w, l.size());
  std::string out = fmt::format("{:<{}}", "model", label_w);
  for (const auto& c : metric_columns()) out += fmt::format(" | {:>10}", c);
  out += "\n" + std::string(label_w, '-');
  for (std::size_t i = 0; i < metric_columns().size(); ++i) out += "-+-" + std::string(10, '-');
  out += "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out += fmt::format("{:<{}}", i < row_labels.size() ? row_labels[i] : "", label_w);
    for (double v : {r.made_1, r.made_6, r.mfde_1, r.mfde_6, r.nll_3, r.nll_6}) out += fmt::format(" | {:>10.4f}", v);
    out += fmt::format(" | {:>10.4f} | {:>10.4f}\n", i < params.size() ? static_cast<double>(params[i]) / 1e6 : 0.0,
                       i < macs.size() ? static_cast<double>(macs[i]) / 1e6 : 0.0);
  }
  return out;
}

}  // namespace hmix
