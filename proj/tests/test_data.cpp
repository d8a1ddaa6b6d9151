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

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hmix/data.hpp"
#include "hmix/error.hpp"

using namespace hmix;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "hmix_test_data";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

TrajectoryScene random_scene(std::size_t agents, Rng& rng) {
  TrajectoryScene s("r", agents, 4, 3);
  for (std::size_t a = 0; a < agents; ++a) {
    s.agent_ids[a] = "a" + std::to_string(a);
    for (std::size_t t = 0; t < s.steps(); ++t) {
      s.x(a, t) = rng.uniform(-20, 20);
      s.y(a, t) = rng.uniform(-20, 20);
    }
  }
  return s;
}

}  // namespace

TEST(Toy, RegionConvention) {
  EXPECT_EQ(toy_region(-0.5, -0.5), 1);
  EXPECT_EQ(toy_region(-0.5, 0.5), 2);
  EXPECT_EQ(toy_region(0.5, -0.5), 3);
  EXPECT_EQ(toy_region(0.5, 0.5), 4);
  EXPECT_EQ(toy_region(0.0, 0.0), 4);
  EXPECT_EQ(toy_region(-1.0, 0.0), 2);
  EXPECT_EQ(toy_region(1.0, -1.0), 3);
  EXPECT_EQ(toy_region(1.5, 0.0), 5);
}

TEST(Toy, RegionProbabilities) {
  const auto p0 = toy_region_probs(0.0);
  EXPECT_EQ(p0[1], 0.0);
  EXPECT_EQ(p0[2], 0.0);
  for (double p : toy_region_probs(0.5)) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(Toy, TimeZeroOnlyHitsDiagonalQuadrants) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const ToySample s = toy_sample(0.0, rng);
    const int r = toy_region(s.x, s.y);
    EXPECT_TRUE(r == 1 || r == 4) << r;
  }
}

TEST(Toy, TimeOneMonteCarlo) {
  Rng rng(2);
  std::size_t s2 = 0;
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) {
    const ToySample s = toy_sample(1.0, rng);
    s2 += toy_region(s.x, s.y) == 2 ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(s2) / n, 0.5, 0.01);
}

TEST(Toy, RejectsTimeOutsideUnitInterval) {
  Rng rng(3);
  EXPECT_THROW(toy_sample(-0.1, rng), DomainError);
  EXPECT_THROW(toy_sample(1.1, rng), DomainError);
}

TEST(Toy, DatasetBasics) {
  Rng a(4);
  Rng b(4);
  EXPECT_TRUE(toy_dataset(0, a).empty());
  const auto da = toy_dataset(500, a);
  const auto db = toy_dataset(500, b);
  ASSERT_EQ(da.size(), 500u);
  for (std::size_t i = 0; i < da.size(); ++i) {
    EXPECT_EQ(da[i].t, db[i].t);
    EXPECT_EQ(da[i].x, db[i].x);
    EXPECT_EQ(da[i].y, db[i].y);
    EXPECT_NE(toy_region(da[i].x, da[i].y), 5);
    EXPECT_GE(da[i].t, 0.0);
    EXPECT_LT(da[i].t, 1.0);
  }
}

TEST(Toy, ChiSquarePerTimeBin) {
  Rng rng(5);
  const auto data = toy_dataset(100000, rng);
  const std::size_t bins = 10;
  std::vector<std::array<double, 4>> counts(bins, {0, 0, 0, 0});
  std::vector<double> totals(bins, 0.0);
  for (const auto& s : data) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>(s.t * bins));
    counts[b][static_cast<std::size_t>(toy_region(s.x, s.y) - 1)] += 1.0;
    totals[b] += 1.0;
  }
  const double critical = 11.345;  // chi-square, 3 dof, p = 0.01
  for (std::size_t b = 0; b < bins; ++b) {
    const auto p = toy_region_probs((static_cast<double>(b) + 0.5) / bins);
    double chi2 = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
      const double expected = p[r] * totals[b];
      chi2 += std::pow(counts[b][r] - expected, 2) / expected;
      const double sigma = std::sqrt(totals[b] * p[r] * (1.0 - p[r]));
      EXPECT_LT(std::abs(counts[b][r] - expected), 3.0 * sigma) << "bin " << b << " region " << r + 1;
    }
    EXPECT_LT(chi2, critical) << "bin " << b;
  }
}

TEST(Toy, CsvRoundTrip) {
  Rng rng(6);
  const auto data = toy_dataset(100, rng);
  const auto path = temp_file("toy.csv");
  write_toy_csv(path, data);
  const auto back = read_toy_csv(path);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_NEAR(back[i].t, data[i].t, 1e-12);
    EXPECT_NEAR(back[i].x, data[i].x, 1e-12);
  }
  write_text(path, "t,x,y\n0.5,0.1,0.2\n0.5,abc,0.2\n");
  try {
    read_toy_csv(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Toy, ToDataset) {
  const Dataset d = toy_to_dataset({{0.25, 0.5, -0.5}, {0.75, -0.1, 0.9}});
  EXPECT_EQ(d.inputs.shape(), (Shape{2, 1}));
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.t_pred(), 1u);
  EXPECT_EQ(d.target(1), Tensor::matrix({{-0.1, 0.9}}));
}

TEST(Synth, StraightNoiselessFutureIsCollinear) {
  Rng rng(7);
  SynthConfig cfg;
  cfg.branch_probs = {1.0, 0.0, 0.0};
  cfg.noise = 0.0;
  for (const auto& scene : synth_intersection(20, rng, cfg)) {
    EXPECT_EQ(scene.branch, 0);
    const auto n = normalize(scene);
    for (std::size_t t = 0; t < scene.steps(); ++t) EXPECT_NEAR(n.scene.y(scene.focal, t), 0.0, 1e-9);
    for (std::size_t t = scene.t_obs; t < scene.steps(); ++t) EXPECT_GT(n.scene.x(scene.focal, t), 0.0);
  }
}

TEST(Synth, TurnsLeaveTheHeadingLine) {
  Rng rng(8);
  SynthConfig cfg;
  cfg.noise = 0.0;
  cfg.branch_probs = {0.0, 1.0, 0.0};
  for (const auto& scene : synth_intersection(10, rng, cfg)) {
    const auto n = normalize(scene);
    EXPECT_GT(n.scene.y(scene.focal, scene.steps() - 1), 1.0);
  }
  cfg.branch_probs = {0.0, 0.0, 1.0};
  for (const auto& scene : synth_intersection(10, rng, cfg)) {
    const auto n = normalize(scene);
    EXPECT_LT(n.scene.y(scene.focal, scene.steps() - 1), -1.0);
  }
}

TEST(Synth, BranchCountsWithinThreeSigma) {
  Rng rng(9);
  const std::size_t n = 1000;
  std::array<double, 3> counts{0, 0, 0};
  for (const auto& s : synth_intersection(n, rng)) counts[static_cast<std::size_t>(s.branch)] += 1.0;
  const std::array<double, 3> p{0.5, 0.25, 0.25};
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_LT(std::abs(counts[b] - n * p[b]), 3.0 * std::sqrt(n * p[b] * (1 - p[b]))) << b;
  }
}

TEST(Synth, ConfigValidation) {
  Rng rng(10);
  SynthConfig cfg;
  cfg.branch_probs = {0.5, 0.5, 0.5};
  EXPECT_THROW(synth_intersection(1, rng, cfg), ConfigError);
  cfg.branch_probs = {1.2, -0.2, 0.0};
  EXPECT_THROW(synth_intersection(1, rng, cfg), ConfigError);
}

TEST(Synth, ScenesAreValidAndReproducible) {
  Rng a(11);
  Rng b(11);
  const auto sa = synth_intersection(5, a);
  const auto sb = synth_intersection(5, b);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NO_THROW(sa[i].validate());
    EXPECT_EQ(sa[i].xy, sb[i].xy);
  }
}

TEST(SceneCsv, RoundTrip) {
  Rng rng(12);
  auto scenes = synth_intersection(3, rng);
  scenes[1].set_valid(2, 0, false);
  const auto path = temp_file("scenes.csv");
  write_csv_scenes(path, scenes);
  const auto loaded = load_csv_scenes(path, 8);
  EXPECT_TRUE(loaded.warnings.empty());
  ASSERT_EQ(loaded.scenes.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(loaded.scenes[i].scene_id, scenes[i].scene_id);
    EXPECT_EQ(loaded.scenes[i].t_pred, 12u);
    EXPECT_EQ(loaded.scenes[i].valid, scenes[i].valid);
    for (std::size_t j = 0; j < scenes[i].xy.size(); ++j) {
      if (scenes[i].valid[j / 2]) EXPECT_NEAR(loaded.scenes[i].xy[j], scenes[i].xy[j], 5e-7);
    }
  }
}

TEST(SceneCsv, MalformedRowReportsLineNumber) {
  const auto path = temp_file("bad.csv");
  write_text(path,
             "scene_id,agent_id,is_focal,timestep,x,y\n"
             "s,a,1,0,0.0,0.0\n"
             "s,a,1,1,1.0\n");
  try {
    load_csv_scenes(path, 1);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  write_text(path, "scene_id,agent_id,is_focal,timestep,x,y\ns,a,2,0,0,0\n");
  EXPECT_THROW(load_csv_scenes(path, 1), ParseError);
  write_text(path, "scene,agent\n");
  EXPECT_THROW(load_csv_scenes(path, 1), ParseError);
}

TEST(SceneCsv, MissingOrIncompleteFocalTrackIsSkipped) {
  const auto path = temp_file("partial.csv");
  write_text(path,
             "scene_id,agent_id,is_focal,timestep,x,y\n"
             "nofocal,a,0,0,0,0\n"
             "nofocal,a,0,1,1,0\n"
             "gap,a,1,0,0,0\n"
             "gap,a,1,2,2,0\n"
             "ok,a,1,0,0,0\n"
             "ok,a,1,1,1,0\n"
             "ok,a,1,2,2,0\n"
             "ok,b,0,1,5,5\n");
  const auto r = load_csv_scenes(path, 2);
  ASSERT_EQ(r.scenes.size(), 1u);
  EXPECT_EQ(r.scenes[0].scene_id, "ok");
  EXPECT_FALSE(r.scenes[0].is_valid(1, 0));
  EXPECT_TRUE(r.scenes[0].is_valid(1, 1));
  EXPECT_EQ(r.warnings.size(), 2u);
}

TEST(Normalize, AlreadyNormalizedIsIdentity) {
  Rng rng(13);
  const auto scene = synth_intersection(1, rng).front();
  const auto once = normalize(scene);
  const auto twice = normalize(once.scene);
  EXPECT_NEAR(twice.transform.tx, 0.0, 1e-9);
  EXPECT_NEAR(twice.transform.ty, 0.0, 1e-9);
  EXPECT_NEAR(twice.transform.theta, 0.0, 1e-9);
}

TEST(Normalize, RoundTrip) {
  Rng rng(14);
  for (const auto& scene : synth_intersection(20, rng)) {
    const auto n = normalize(scene);
    const auto back = denormalize(n.scene, n.transform);
    for (std::size_t i = 0; i < scene.xy.size(); ++i) EXPECT_NEAR(back.xy[i], scene.xy[i], 1e-9);
  }
}

TEST(Normalize, IsAnIsometry) {
  Rng rng(15);
  const auto scene = random_scene(5, rng);
  const auto n = normalize(scene).scene;
  const std::size_t points = scene.xy.size() / 2;
  for (std::size_t i = 0; i < points; ++i) {
    for (std::size_t j = i + 1; j < points; ++j) {
      const double d0 = std::hypot(scene.xy[2 * i] - scene.xy[2 * j], scene.xy[2 * i + 1] - scene.xy[2 * j + 1]);
      const double d1 = std::hypot(n.xy[2 * i] - n.xy[2 * j], n.xy[2 * i + 1] - n.xy[2 * j + 1]);
      EXPECT_NEAR(d0, d1, 1e-9);
    }
  }
}

TEST(Normalize, StationaryFocalFallsBack) {
  TrajectoryScene s("st", 1, 3, 1);
  s.agent_ids[0] = "f";
  const double pts[4][2] = {{0, 0}, {0, 2}, {0, 2}, {0, 3}};
  for (std::size_t t = 0; t < 4; ++t) {
    s.x(0, t) = pts[t][0];
    s.y(0, t) = pts[t][1];
  }
  EXPECT_NEAR(focal_heading(s), std::acos(0.0), 1e-15);
  for (std::size_t t = 0; t < 4; ++t) {
    s.x(0, t) = 1.0;
    s.y(0, t) = 1.0;
  }
  EXPECT_EQ(focal_heading(s), 0.0);
}

TEST(Truncate, KeepsSixClosestOrderedByDistance) {
  TrajectoryScene s("t", 8, 2, 1);
  const double dist[8] = {0.0, 7.0, 3.0, 9.0, 1.0, 5.0, 2.0, 4.0};
  for (std::size_t a = 0; a < 8; ++a) {
    s.agent_ids[a] = "a" + std::to_string(a);
    for (std::size_t t = 0; t < 3; ++t) {
      s.x(a, t) = dist[a];
      s.y(a, t) = 0.0;
    }
  }
  s.focal = 0;
  const auto out = truncate_agents(s, 6);
  ASSERT_EQ(out.agents(), 6u);
  EXPECT_EQ(out.focal, 0u);
  EXPECT_EQ(out.agent_ids, (std::vector<std::string>{"a0", "a4", "a6", "a2", "a7", "a5"}));
}

TEST(Truncate, FocalFirstEvenWhenNotFirstAgent) {
  Rng rng(16);
  auto scene = random_scene(4, rng);
  scene.focal = 2;
  const auto out = truncate_agents(scene, 3);
  EXPECT_EQ(out.focal, 0u);
  EXPECT_EQ(out.agent_ids[0], "a2");
}

TEST(SceneDataset, ShapesAndTargets) {
  Rng rng(17);
  const auto scenes = prepare_scenes(synth_intersection(4, rng));
  const Dataset d = scenes_to_dataset(scenes);
  EXPECT_EQ(d.inputs.shape(), (Shape{4, 8, scene_feature_dim()}));
  EXPECT_EQ(scene_feature_dim(), 19u);
  EXPECT_EQ(d.targets.shape(), (Shape{4, 24}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(d.target(i), scenes[i].focal_future());
  // Focal origin.
  EXPECT_NEAR(d.inputs[(0 * 8 + 7) * 19 + 0], 0.0, 1e-12);
  const std::vector<std::size_t> idx{3, 1};
  const Dataset sub = d.rows(idx);
  EXPECT_EQ(sub.target(0), d.target(3));
  const std::vector<std::size_t> bad{9};
  EXPECT_THROW(d.rows(bad), BoundsError);
}
