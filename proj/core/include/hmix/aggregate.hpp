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

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "hmix/mixture.hpp"
#include "hmix/random.hpp"

namespace hmix {

enum class Provenance { TopK, RIP, KMeans, Meta };

std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& s);

/// A fixed-size forecast built from an ensemble.
struct AggregatedForecast {
  MixtureForecast forecast;
  Provenance provenance = Provenance::TopK;
};

/// One mode of a pooled ensemble, with its weight divided by the member count.
struct PooledMode {
  std::size_t member = 0;
  std::size_t mode = 0;
  double weight = 0.0;
};

/// Member-major list of every mode of every member.
std::vector<PooledMode> pool_modes(const std::vector<MixtureForecast>& members);
/// All pooled modes as one mixture (weights / M).
MixtureForecast pool_mixture(const std::vector<MixtureForecast>& members);

/// Confidence order over pooled modes: weight descending, then lower mode
/// index, then lower member index.
bool more_confident(const PooledMode& a, const PooledMode& b);

AggregatedForecast topk_aggregate(const std::vector<MixtureForecast>& members, std::size_t k = 6);

enum class RipScore { Average, Min };

/// Log-likelihood of a pooled mode's mean under every member's mixture,
/// averaged (or minimised) over members.
std::vector<double> rip_scores(const std::vector<MixtureForecast>& members, RipScore score = RipScore::Average);
AggregatedForecast rip_aggregate(const std::vector<MixtureForecast>& members, std::size_t k = 6,
                                 RipScore score = RipScore::Average);

using Point2 = std::array<double, 2>;

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<Point2> centroids;
  /// Within-cluster SSE after each centroid update.
  std::vector<double> sse_history;
  std::size_t iterations = 0;
  /// Clusters created by splitting because there were fewer than k distinct points.
  std::size_t padded = 0;
};

/// Lloyd's k-means with k-means++ seeding and at most `max_iter` rounds.
/// Stops when assignments no longer change. Nearest-centroid ties go to the
/// lower index; empty clusters keep their centroid. When fewer than k
/// distinct points exist, the heaviest cluster with at least two members is
/// split (second half of its members, in index order, becomes a new cluster)
/// until there are k clusters.
KMeansResult kmeans(const std::vector<Point2>& points, const std::vector<double>& weights, std::size_t k, Rng& rng,
                    std::size_t max_iter = 100);

double kmeans_sse(const std::vector<Point2>& points, const std::vector<std::size_t>& assignment,
                  const std::vector<Point2>& centroids);

/// k-means on pooled endpoints; each cluster emits the weight-weighted mean
/// of its members' means and scales, with weight = cluster weight sum.
AggregatedForecast kmeans_aggregate(const std::vector<MixtureForecast>& members, Rng& rng, std::size_t k = 6);

/// Meta-mixtures of every member pooled (weights / M). More than k: the k
/// most confident. Fewer than k: padded with the most confident sub-modes.
AggregatedForecast meta_compress(const std::vector<HierarchicalMixture>& members, std::size_t k = 6,
                                 MetaStats mode = MetaStats::Verbatim);

struct SimilarityReport {
  Tensor matrix;  // [K_total x K_total]
  /// Mean binary entropy (nats) of the off-diagonal entries; 0 for a 0/1 matrix.
  double sparsity = 0.0;
};

/// Fraction of scenes in which pooled modes i and j land in one k-means
/// cluster. `scenes[s]` holds the member forecasts of scene s; mode indexing
/// is member-major and must be the same in every scene.
SimilarityReport similarity_matrix(const std::vector<std::vector<MixtureForecast>>& scenes, Rng& rng,
                                   std::size_t k = 6);

/// Mean binary entropy over the off-diagonal entries of a square matrix.
double sparsity_score(const Tensor& m);

}  // namespace hmix
