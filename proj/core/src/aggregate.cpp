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

#include "hmix/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix {

namespace {

void check_members(const std::vector<MixtureForecast>& members, std::size_t k) {
  if (members.empty()) throw ContractError("aggregation needs at least one member");
  std::size_t total = 0;
  for (const auto& m : members) {
    m.validate();
    total += m.size();
  }
  if (total < k) throw ContractError(fmt::format("aggregation to {} modes needs at least {}, got {}", k, k, total));
}

const LaplaceComponent& component_of(const std::vector<MixtureForecast>& members, const PooledMode& p) {
  return members[p.member].components[p.mode];
}

MixtureForecast from_selection(const std::vector<MixtureForecast>& members, const std::vector<PooledMode>& picked,
                               const std::vector<double>& raw_weights) {
  MixtureForecast out;
  const double total = std::accumulate(raw_weights.begin(), raw_weights.end(), 0.0);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    out.components.push_back(component_of(members, picked[i]));
    out.weights.push_back(raw_weights[i] / total);
  }
  return out;
}

double squared_distance(const Point2& a, const Point2& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

std::size_t nearest(const Point2& p, const std::vector<Point2>& centroids) {
  std::size_t best = 0;
  double best_d = squared_distance(p, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

void update_centroids(const std::vector<Point2>& points, const std::vector<std::size_t>& assignment,
                      std::vector<Point2>& centroids) {
  std::vector<Point2> sum(centroids.size(), Point2{0.0, 0.0});
  std::vector<std::size_t> count(centroids.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    sum[assignment[i]][0] += points[i][0];
    sum[assignment[i]][1] += points[i][1];
    ++count[assignment[i]];
  }
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    if (count[c] > 0) {
      centroids[c] = {sum[c][0] / static_cast<double>(count[c]), sum[c][1] / static_cast<double>(count[c])};
    }
  }
}

std::vector<std::size_t> seed_plus_plus(const std::vector<Point2>& points, std::size_t k, Rng& rng) {
  std::vector<std::size_t> centers{rng.index(points.size())};
  std::vector<double> d2(points.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c : centers) best = std::min(best, squared_distance(points[i], points[c]));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) break;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > u) break;
    }
    centers.push_back(pick);
  }
  return centers;
}

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::TopK: return "topk";
    case Provenance::RIP: return "rip";
    case Provenance::KMeans: return "kmeans";
    case Provenance::Meta: return "meta";
  }
  return "?";
}

Provenance parse_provenance(const std::string& s) {
  for (auto p : {Provenance::TopK, Provenance::RIP, Provenance::KMeans, Provenance::Meta}) {
    if (to_string(p) == s) return p;
  }
  throw ConfigError(fmt::format("unknown aggregation '{}' (expected topk, rip, kmeans or meta)", s));
}

std::vector<PooledMode> pool_modes(const std::vector<MixtureForecast>& members) {
  std::vector<PooledMode> out;
  const double m_count = static_cast<double>(members.size());
  for (std::size_t m = 0; m < members.size(); ++m) {
    for (std::size_t k = 0; k < members[m].size(); ++k) out.push_back({m, k, members[m].weights[k] / m_count});
  }
  return out;
}

MixtureForecast pool_mixture(const std::vector<MixtureForecast>& members) {
  MixtureForecast out;
  for (const auto& p : pool_modes(members)) {
    out.components.push_back(component_of(members, p));
    out.weights.push_back(p.weight);
  }
  return out;
}

bool more_confident(const PooledMode& a, const PooledMode& b) {
  if (a.weight != b.weight) return a.weight > b.weight;
  if (a.mode != b.mode) return a.mode < b.mode;
  return a.member < b.member;
}

AggregatedForecast topk_aggregate(const std::vector<MixtureForecast>& members, std::size_t k) {
  check_members(members, k);
  auto pooled = pool_modes(members);
  std::stable_sort(pooled.begin(), pooled.end(), more_confident);
  pooled.resize(k);
  std::vector<double> w;
  for (const auto& p : pooled) w.push_back(p.weight);
  return {from_selection(members, pooled, w), Provenance::TopK};
}

std::vector<double> rip_scores(const std::vector<MixtureForecast>& members, RipScore score) {
  const auto pooled = pool_modes(members);
  std::vector<double> out;
  out.reserve(pooled.size());
  for (const auto& p : pooled) {
    const Tensor& mu = component_of(members, p).mu;
    double acc = score == RipScore::Average ? 0.0 : std::numeric_limits<double>::infinity();
    for (const auto& m : members) {
      const double ll = -mixture_nll(mu, m);
      acc = score == RipScore::Average ? acc + ll : std::min(acc, ll);
    }
    out.push_back(score == RipScore::Average ? acc / static_cast<double>(members.size()) : acc);
  }
  return out;
}

AggregatedForecast rip_aggregate(const std::vector<MixtureForecast>& members, std::size_t k, RipScore score) {
  check_members(members, k);
  const auto pooled = pool_modes(members);
  const auto scores = rip_scores(members, score);
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (pooled[a].mode != pooled[b].mode) return pooled[a].mode < pooled[b].mode;
    return pooled[a].member < pooled[b].member;
  });
  order.resize(k);
  const double top = scores[order.front()];
  std::vector<PooledMode> picked;
  std::vector<double> w;
  for (std::size_t i : order) {
    picked.push_back(pooled[i]);
    w.push_back(std::exp(scores[i] - top));
  }
  return {from_selection(members, picked, w), Provenance::RIP};
}

double kmeans_sse(const std::vector<Point2>& points, const std::vector<std::size_t>& assignment,
                  const std::vector<Point2>& centroids) {
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) sse += squared_distance(points[i], centroids[assignment[i]]);
  return sse;
}

KMeansResult kmeans(const std::vector<Point2>& points, const std::vector<double>& weights, std::size_t k, Rng& rng,
                    std::size_t max_iter) {
  if (k == 0 || points.size() < k) {
    throw ContractError(fmt::format("k-means with k = {} needs at least k points, got {}", k, points.size()));
  }
  if (weights.size() != points.size()) throw DimensionError("k-means: one weight per point required");

  KMeansResult r;
  for (std::size_t c : seed_plus_plus(points, k, rng)) r.centroids.push_back(points[c]);
  r.assignment.assign(points.size(), 0);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::size_t c = nearest(points[i], r.centroids);
      changed = changed || c != r.assignment[i];
      r.assignment[i] = c;
    }
    if (!changed) break;
    update_centroids(points, r.assignment, r.centroids);
    r.sse_history.push_back(kmeans_sse(points, r.assignment, r.centroids));
    ++r.iterations;
  }

  std::vector<std::size_t> used(r.centroids.size(), 0);
  for (std::size_t a : r.assignment) ++used[a];
  std::vector<std::size_t> remap(r.centroids.size());
  std::vector<Point2> kept;
  for (std::size_t c = 0; c < r.centroids.size(); ++c) {
    remap[c] = kept.size();
    if (used[c] > 0) kept.push_back(r.centroids[c]);
  }
  if (kept.size() < r.centroids.size()) {
    for (auto& a : r.assignment) a = remap[a];
    r.centroids = std::move(kept);
  }

  while (r.centroids.size() < k) {
    std::vector<double> mass(r.centroids.size(), 0.0);
    std::vector<std::vector<std::size_t>> members(r.centroids.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      mass[r.assignment[i]] += weights[i];
      members[r.assignment[i]].push_back(i);
    }
    std::size_t heaviest = r.centroids.size();
    for (std::size_t c = 0; c < r.centroids.size(); ++c) {
      if (members[c].size() < 2) continue;
      if (heaviest == r.centroids.size() || mass[c] > mass[heaviest]) heaviest = c;
    }
    if (heaviest == r.centroids.size()) throw ContractError("k-means padding: no cluster can be split");
    const std::size_t fresh = r.centroids.size();
    r.centroids.push_back(r.centroids[heaviest]);
    const auto& split = members[heaviest];
    for (std::size_t j = split.size() / 2; j < split.size(); ++j) r.assignment[split[j]] = fresh;
    update_centroids(points, r.assignment, r.centroids);
    r.sse_history.push_back(kmeans_sse(points, r.assignment, r.centroids));
    ++r.padded;
  }
  return r;
}

AggregatedForecast kmeans_aggregate(const std::vector<MixtureForecast>& members, Rng& rng, std::size_t k) {
  check_members(members, k);
  const auto pooled = pool_modes(members);
  std::vector<Point2> ends;
  std::vector<double> w;
  for (const auto& p : pooled) {
    const Tensor& mu = component_of(members, p).mu;
    const std::size_t last = mu.dim(0) - 1;
    ends.push_back({mu.at(last, 0), mu.at(last, 1)});
    w.push_back(p.weight);
  }
  const auto km = kmeans(ends, w, k, rng);
  const Shape shape = members.front().components.front().mu.shape();

  MixtureForecast out;
  for (std::size_t c = 0; c < k; ++c) {
    LaplaceComponent comp{Tensor(shape), Tensor(shape)};
    double mass = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      if (km.assignment[i] != c) continue;
      mass += w[i];
      ++count;
    }
    if (count == 0) throw ContractError("k-means produced an empty cluster");
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      if (km.assignment[i] != c) continue;
      const auto& src = component_of(members, pooled[i]);
      const double share = mass > 0.0 ? w[i] / mass : 1.0 / static_cast<double>(count);
      for (std::size_t j = 0; j < comp.mu.size(); ++j) {
        comp.mu[j] += share * src.mu[j];
        comp.b[j] += share * src.b[j];
      }
    }
    out.components.push_back(std::move(comp));
    out.weights.push_back(mass);
  }
  const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  for (auto& v : out.weights) v /= total;
  return {std::move(out), Provenance::KMeans};
}

AggregatedForecast meta_compress(const std::vector<HierarchicalMixture>& members, std::size_t k, MetaStats mode) {
  if (members.empty()) throw ContractError("meta_compress needs at least one member");
  std::vector<MixtureForecast> metas;
  std::vector<MixtureForecast> flats;
  for (const auto& h : members) {
    metas.push_back(meta_mixture(h, mode));
    flats.push_back(h.flatten());
  }
  auto pooled = pool_modes(metas);
  std::stable_sort(pooled.begin(), pooled.end(), more_confident);
  if (pooled.size() > k) pooled.resize(k);

  MixtureForecast out;
  std::vector<double> w;
  for (const auto& p : pooled) {
    out.components.push_back(metas[p.member].components[p.mode]);
    w.push_back(p.weight);
  }
  if (out.components.size() < k) {
    auto subs = pool_modes(flats);
    std::stable_sort(subs.begin(), subs.end(), more_confident);
    for (std::size_t i = 0; out.components.size() < k && i < subs.size(); ++i) {
      out.components.push_back(flats[subs[i].member].components[subs[i].mode]);
      w.push_back(subs[i].weight);
    }
    if (out.components.size() < k) throw ContractError("meta_compress: not enough modes to pad");
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double v : w) out.weights.push_back(v / total);
  return {std::move(out), Provenance::Meta};
}

double sparsity_score(const Tensor& m) {
  const std::size_t n = m.dim(0);
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double p = m.at(i, j);
      if (p > 0.0 && p < 1.0) total -= p * std::log(p) + (1.0 - p) * std::log(1.0 - p);
    }
  }
  return total / static_cast<double>(n * (n - 1));
}

SimilarityReport similarity_matrix(const std::vector<std::vector<MixtureForecast>>& scenes, Rng& rng,
                                   std::size_t k) {
  if (scenes.empty()) throw ContractError("similarity_matrix needs at least one scene");
  const std::size_t total = pool_modes(scenes.front()).size();
  Tensor counts(Shape{total, total});
  for (const auto& members : scenes) {
    const auto pooled = pool_modes(members);
    if (pooled.size() != total) throw DimensionError("similarity_matrix: mode count differs between scenes");
    std::vector<Point2> ends;
    std::vector<double> w;
    for (const auto& p : pooled) {
      const Tensor& mu = members[p.member].components[p.mode].mu;
      const std::size_t last = mu.dim(0) - 1;
      ends.push_back({mu.at(last, 0), mu.at(last, 1)});
      w.push_back(p.weight);
    }
    const auto km = kmeans(ends, w, k, rng);
    for (std::size_t i = 0; i < total; ++i) {
      for (std::size_t j = 0; j < total; ++j) {
        if (km.assignment[i] == km.assignment[j]) counts.at(i, j) += 1.0;
      }
    }
  }
  for (auto& v : counts.values()) v /= static_cast<double>(scenes.size());
  SimilarityReport r{std::move(counts), 0.0};
  r.sparsity = sparsity_score(r.matrix);
  return r;
}

}  // namespace hmix
