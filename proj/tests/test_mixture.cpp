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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "hmix/error.hpp"
#include "hmix/head.hpp"
#include "hmix/mixture.hpp"
#include "test_util.hpp"

using namespace hmix;
using namespace hmix::testing;

namespace {

LaplaceComponent constant_component(double mu_x, double mu_y, double b) {
  return {Tensor::matrix({{mu_x, mu_y}}), Tensor({1, 2}, b)};
}

long double ld_log_density(const Tensor& y, const LaplaceComponent& c) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const long double b = c.b[i];
    total += -std::log(2.0L * b) - std::fabs(static_cast<long double>(y[i]) - c.mu[i]) / b;
  }
  return total;
}

long double ld_mixture_density(const Tensor& y, const MixtureForecast& m) {
  long double p = 0.0L;
  for (std::size_t k = 0; k < m.size(); ++k) p += m.weights[k] * std::exp(ld_log_density(y, m.components[k]));
  return p;
}

}  // namespace

TEST(LaplaceDensity, AtTheMeanWithHalfScaleIsZero) {
  const Tensor y = Tensor::matrix({{0.3, -0.2}});
  EXPECT_DOUBLE_EQ(laplace_log_density(y, constant_component(0.3, -0.2, 0.5)), 0.0);
}

TEST(LaplaceDensity, DirectFormula) {
  const Tensor y = Tensor::matrix({{1.0, 0.0}});
  EXPECT_DOUBLE_EQ(laplace_log_density(y, constant_component(0.0, 0.0, 1.0)), -std::log(2.0) - 1.0 - std::log(2.0));
}

TEST(LaplaceDensity, NonPositiveScaleIsDomainError) {
  const Tensor y = Tensor::matrix({{0.0, 0.0}});
  EXPECT_THROW(laplace_log_density(y, constant_component(0.0, 0.0, 0.0)), DomainError);
  EXPECT_THROW(laplace_log_density(y, constant_component(0.0, 0.0, -1.0)), DomainError);
}

TEST(LaplaceDensity, IntegratesToOne) {
  Rng rng(1);
  for (int trial = 0; trial < 3; ++trial) {
    const LaplaceComponent c = random_component(1, rng, 1.0);
    const double step = 0.02;
    double total = 0.0;
    for (double x = -25.0 + step / 2; x < 25.0; x += step) {
      for (double y = -25.0 + step / 2; y < 25.0; y += step) {
        total += std::exp(laplace_log_density(Tensor::matrix({{x, y}}), c)) * step * step;
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-3);
  }
}

TEST(MixtureNll, SingleComponent) {
  Rng rng(2);
  MixtureForecast m;
  m.components.push_back(random_component(3, rng));
  m.weights = {1.0};
  const Tensor y = random_tensor({3, 2}, rng);
  EXPECT_DOUBLE_EQ(mixture_nll(y, m), -laplace_log_density(y, m.components[0]));
}

TEST(MixtureNll, DuplicatedComponentMerges) {
  Rng rng(3);
  const LaplaceComponent c = random_component(2, rng);
  MixtureForecast one{{c}, {1.0}};
  MixtureForecast two{{c, c}, {0.5, 0.5}};
  const Tensor y = random_tensor({2, 2}, rng);
  EXPECT_NEAR(mixture_nll(y, two), mixture_nll(y, one), 1e-14);
}

TEST(MixtureNll, MatchesExtendedPrecision) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const MixtureForecast m = random_forecast(3, 2, rng);
    const Tensor y = random_tensor({2, 2}, rng, -2, 2);
    const double expected = static_cast<double>(-std::log(ld_mixture_density(y, m)));
    EXPECT_LT(rel_err(mixture_nll(y, m), expected), 1e-10);
  }
}

TEST(MixtureNll, PermutationInvariant) {
  Rng rng(5);
  const MixtureForecast m = random_forecast(5, 2, rng);
  const Tensor y = random_tensor({2, 2}, rng);
  std::vector<std::size_t> perm(5);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 20; ++trial) {
    rng.shuffle(perm);
    MixtureForecast p;
    for (std::size_t i : perm) {
      p.components.push_back(m.components[i]);
      p.weights.push_back(m.weights[i]);
    }
    EXPECT_NEAR(mixture_nll(y, p), mixture_nll(y, m), 1e-13);
  }
}

TEST(MixtureNll, FarTargetStaysFinite) {
  MixtureForecast m{{constant_component(0, 0, 0.01), constant_component(1, 1, 0.01)}, {0.5, 0.5}};
  const double nll = mixture_nll(Tensor::matrix({{500.0, -500.0}}), m);
  EXPECT_TRUE(std::isfinite(nll));
  EXPECT_GT(nll, 1e4);
}

TEST(MixtureNll, QuadratureOfDensity) {
  Rng rng(6);
  const MixtureForecast m = random_forecast(3, 1, rng, 1.0);
  const double step = 0.025;
  double total = 0.0;
  for (double x = -25.0 + step / 2; x < 25.0; x += step) {
    for (double y = -25.0 + step / 2; y < 25.0; y += step) {
      total += std::exp(-mixture_nll(Tensor::matrix({{x, y}}), m)) * step * step;
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-3);
}

TEST(MixtureForecast, ValidateChecksSimplexAndScale) {
  Rng rng(7);
  MixtureForecast m = random_forecast(2, 1, rng);
  EXPECT_NO_THROW(m.validate());
  m.weights = {0.5, 0.6};
  EXPECT_THROW(m.validate(), ContractError);
  m.weights = {0.5, 0.5};
  m.components[1].b[0] = 0.5 * kMinScale;
  EXPECT_THROW(m.validate(), DomainError);
}

TEST(MetaStats, SingleZeroMeanModeKeepsScale) {
  const std::vector<LaplaceComponent> group{constant_component(0.0, 0.0, 0.7)};
  const std::vector<double> w{1.0};
  const auto s = meta_mode_stats(group, w);
  EXPECT_EQ(s.mu_bar[0], 0.0);
  EXPECT_NEAR(s.b_bar[0] * s.b_bar[0], 0.49, 1e-15);
  EXPECT_NEAR(s.b_bar[1], 0.7, 1e-15);
}

TEST(MetaStats, OpposedMeansWithZeroScale) {
  const std::vector<LaplaceComponent> group{constant_component(1.0, 1.0, 0.0), constant_component(-1.0, -1.0, 0.0)};
  const std::vector<double> w{0.5, 0.5};
  const auto s = meta_mode_stats(group, w);
  EXPECT_EQ(s.mu_bar[0], 0.0);
  EXPECT_NEAR(s.b_bar[0] * s.b_bar[0], 0.5, 1e-15);
}

TEST(MetaStats, VerbatimMeanShrinksIdenticalModes) {
  const std::vector<LaplaceComponent> group(3, constant_component(2.0, -1.0, 0.4));
  const std::vector<double> w{0.1, 0.2, 0.1};
  const auto s = meta_mode_stats(group, w, MetaStats::Verbatim);
  EXPECT_NEAR(s.mu_bar[0], 0.4 / 3.0 * 2.0, 1e-15);
  EXPECT_NEAR(s.mu_bar[1], 0.4 / 3.0 * -1.0, 1e-15);
}

TEST(MetaStats, NormalizedRecoversIdenticalModes) {
  const std::vector<LaplaceComponent> group(3, constant_component(2.0, -1.0, 0.4));
  const std::vector<double> w{0.1, 0.2, 0.1};
  const auto s = meta_mode_stats(group, w, MetaStats::Normalized);
  EXPECT_NEAR(s.mu_bar[0], 2.0, 1e-15);
  EXPECT_NEAR(s.mu_bar[1], -1.0, 1e-15);
  EXPECT_NEAR(s.b_bar[0], 0.4, 1e-15);
}

TEST(MetaStats, NegativeVarianceIsClamped) {
  // (2 b^2 + 25) / 2 - 25 < 0.
  const std::vector<LaplaceComponent> group{constant_component(5.0, 5.0, kMinScale)};
  const std::vector<double> w{1.0};
  const auto s = meta_mode_stats(group, w);
  EXPECT_DOUBLE_EQ(s.b_bar[0], kMinScale);
  EXPECT_DOUBLE_EQ(s.b_bar[1], kMinScale);
}

TEST(MetaMixture, SingleMetaModeHasUnitWeight) {
  Rng rng(8);
  const HierarchicalMixture h = random_hierarchy(1, 3, 2, rng);
  const MixtureForecast m = meta_mixture(h);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_NEAR(m.weights[0], 1.0, 1e-15);
}

TEST(MetaMixture, MetaWeightsAreGroupSums) {
  Rng rng(9);
  std::vector<LaplaceComponent> comps;
  for (int i = 0; i < 4; ++i) comps.push_back(random_component(1, rng));
  const HierarchicalMixture h(2, 2, comps, {0.2, 0.2, 0.3, 0.3});
  const auto w = h.meta_weights();
  EXPECT_NEAR(w[0], 0.4, 1e-15);
  EXPECT_NEAR(w[1], 0.6, 1e-15);
  const MixtureForecast m = meta_mixture(h);
  EXPECT_NEAR(m.weights[0], 0.4, 1e-15);
  EXPECT_NEAR(m.weights[1], 0.6, 1e-15);
  EXPECT_NO_THROW(m.validate());
}

TEST(MetaMixture, MetaWeightsFormASimplex) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const HierarchicalMixture h = random_hierarchy(1 + trial % 4, 1 + trial % 3, 2, rng);
    const auto w = h.meta_weights();
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Hierarchy, FlattenMatchesDirectTwoLevelSum) {
  Rng rng(11);
  const HierarchicalMixture h = random_hierarchy(3, 2, 2, rng);
  const MixtureForecast flat = h.flatten();
  for (int i = 0; i < 100; ++i) {
    const Tensor y = random_tensor({2, 2}, rng, -2, 2);
    long double p = 0.0L;
    for (std::size_t m = 0; m < h.kstar(); ++m) {
      for (std::size_t s = 0; s < h.kprime(); ++s) {
        p += h.weight(m, s) * std::exp(ld_log_density(y, h.component(m, s)));
      }
    }
    EXPECT_LT(rel_err(std::exp(-mixture_nll(y, flat)), static_cast<double>(p)), 1e-12);
  }
}

TEST(Hierarchy, RejectsBadConstruction) {
  Rng rng(12);
  const MixtureForecast f = random_forecast(4, 1, rng);
  EXPECT_THROW(HierarchicalMixture(3, 2, f.components, f.weights), ContractError);
  EXPECT_THROW(HierarchicalMixture(2, 2, f.components, {0.5, 0.5, 0.5, 0.5}), ContractError);
}

TEST(Responsibilities, SymmetricMidpoint) {
  MixtureForecast m{{constant_component(-1, 0, 0.5), constant_component(1, 0, 0.5)}, {0.5, 0.5}};
  const auto r = responsibilities(Tensor::matrix({{0.0, 0.0}}), m);
  EXPECT_NEAR(r[0], 0.5, 1e-15);
  EXPECT_NEAR(r[1], 0.5, 1e-15);
}

TEST(Responsibilities, DominantComponent) {
  MixtureForecast m{{constant_component(0, 0, 0.5), constant_component(20, 20, 0.5)}, {0.5, 0.5}};
  EXPECT_GT(responsibilities(Tensor::matrix({{0.0, 0.0}}), m)[0], 0.99);
}

TEST(Responsibilities, MatchesExtendedPrecision) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const MixtureForecast m = random_forecast(4, 2, rng);
    const Tensor y = random_tensor({2, 2}, rng, -2, 2);
    const auto r = responsibilities(y, m);
    const long double z = ld_mixture_density(y, m);
    for (std::size_t k = 0; k < m.size(); ++k) {
      const long double expected = m.weights[k] * std::exp(ld_log_density(y, m.components[k])) / z;
      EXPECT_NEAR(r[k], static_cast<double>(expected), 1e-10);
    }
  }
}

TEST(Head, DecodeShapesAndConstraints) {
  Rng rng(14);
  const HeadLayout layout{2, 3, 4};
  EXPECT_EQ(layout.raw_size(), 2u * 6u * 8u + 6u);
  Tape tape;
  const HeadBatch h = decode_head(tape.constant(random_tensor({5, layout.raw_size()}, rng, -3, 3)), layout);
  EXPECT_EQ(h.mu.shape(), (Shape{5, 48}));
  EXPECT_EQ(h.b.shape(), (Shape{5, 48}));
  EXPECT_EQ(h.log_pi.shape(), (Shape{5, 6}));
  for (double b : h.b.value().values()) EXPECT_GE(b, kMinScale);
  for (std::size_t r = 0; r < 5; ++r) forecast_row(h, r).validate();
  EXPECT_THROW(decode_head(tape.constant(Tensor({5, 10})), layout), DimensionError);
}

TEST(Head, ToyHeadEmitsFourValuesPerModePlusLogits) {
  const HeadLayout layout{1, 5, 1};
  EXPECT_EQ(layout.raw_size(), 5u * (2u + 2u) + 5u);
}

TEST(Head, ForecastRoundTrip) {
  Rng rng(15);
  const HeadLayout layout{2, 2, 3};
  std::vector<MixtureForecast> rows;
  for (int i = 0; i < 3; ++i) rows.push_back(random_forecast(4, 3, rng));
  Tape tape;
  const HeadBatch h = head_from_forecasts(tape, rows, layout);
  for (std::size_t i = 0; i < 3; ++i) {
    const MixtureForecast back = forecast_row(h, i);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_EQ(back.components[k].mu, rows[i].components[k].mu);
      EXPECT_EQ(back.components[k].b, rows[i].components[k].b);
      EXPECT_NEAR(back.weights[k], rows[i].weights[k], 1e-15);
    }
    const HierarchicalMixture hier = hierarchy_row(h, i);
    EXPECT_EQ(hier.kstar(), 2u);
    EXPECT_EQ(hier.component(1, 0).mu, rows[i].components[2].mu);
  }
}

TEST(Head, BatchedDensitiesMatchValueLevel) {
  Rng rng(16);
  const HeadLayout layout{2, 3, 2};
  std::vector<MixtureForecast> rows;
  std::vector<Tensor> ys;
  for (int i = 0; i < 4; ++i) {
    rows.push_back(random_forecast(6, 2, rng));
    ys.push_back(random_tensor({2, 2}, rng, -2, 2));
  }
  Tape tape;
  const HeadBatch h = head_from_forecasts(tape, rows, layout);
  const Tensor y = stack_targets(ys);
  const Tensor dens = mode_log_density(h, y).value();
  const Tensor ll = mixture_log_likelihood(h, y).value();
  const Tensor post = log_posterior(h, y).value();
  for (std::size_t i = 0; i < 4; ++i) {
    const auto r = responsibilities(ys[i], rows[i]);
    for (std::size_t k = 0; k < 6; ++k) {
      EXPECT_NEAR(dens.at(i, k), laplace_log_density(ys[i], rows[i].components[k]), 1e-12);
      EXPECT_NEAR(std::exp(post.at(i, k)), r[k], 1e-12);
    }
    EXPECT_NEAR(ll.at(i, 0), -mixture_nll(ys[i], rows[i]), 1e-12);
  }
}

TEST(Head, BatchedMetaStatsMatchValueLevel) {
  Rng rng(17);
  const HeadLayout layout{3, 2, 2};
  std::vector<MixtureForecast> rows;
  for (int i = 0; i < 3; ++i) rows.push_back(random_forecast(6, 2, rng));
  Tape tape;
  const HeadBatch h = head_from_forecasts(tape, rows, layout);
  for (MetaStats mode : {MetaStats::Verbatim, MetaStats::Normalized}) {
    const MetaBatch meta = meta_stats(h, mode);
    for (std::size_t i = 0; i < 3; ++i) {
      const MixtureForecast expected = meta_mixture(hierarchy_row(h, i), mode);
      for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t c = 0; c < 4; ++c) {
          EXPECT_NEAR(meta.mu_bar.value().at(i, m * 4 + c), expected.components[m].mu[c], 1e-12);
          EXPECT_NEAR(meta.b_bar.value().at(i, m * 4 + c), expected.components[m].b[c], 1e-12);
        }
        EXPECT_NEAR(std::exp(meta.log_pi_meta.value().at(i, m)), expected.weights[m], 1e-12);
      }
    }
  }
}

TEST(Head, RowArgminTiesGoLow) {
  const auto idx = row_argmin(Tensor::matrix({{3, 1, 1}, {0, 0, 2}, {5, 4, 3}}));
  EXPECT_EQ(idx, (std::vector<std::size_t>{1, 0, 2}));
  EXPECT_EQ(one_hot(idx, 3), Tensor::matrix({{0, 1, 0}, {1, 0, 0}, {0, 0, 1}}));
}
