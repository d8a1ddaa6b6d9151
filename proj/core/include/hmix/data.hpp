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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hmix/random.hpp"
#include "hmix/tensor.hpp"

namespace hmix {

// ---------------------------------------------------------------- toy task

struct ToySample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
};

/// Region index 1..4 of a point: S1 = [-1,0)x[-1,0), S2 = [-1,0)x[0,1],
/// S3 = [0,1]x[-1,0), S4 = [0,1]x[0,1]. 5 for anything outside the square.
int toy_region(double x, double y);

/// Probabilities of S1..S4 at time t: (1-t)/2, t/2, t/2, (1-t)/2.
std::array<double, 4> toy_region_probs(double t);

/// Draws a region by toy_region_probs(t), then a uniform point inside it.
ToySample toy_sample(double t, Rng& rng);
/// n samples with t ~ U[0, 1).
std::vector<ToySample> toy_dataset(std::size_t n, Rng& rng);

/// CSV with header `t,x,y`, 12 decimals.
void write_toy_csv(const std::filesystem::path& path, const std::vector<ToySample>& samples);
std::vector<ToySample> read_toy_csv(const std::filesystem::path& path);

// ------------------------------------------------------------ trajectories

/// Agents x time steps of 2-D positions with an observation mask. Steps
/// [0, t_obs) are the past, [t_obs, t_obs + t_pred) the future.
struct TrajectoryScene {
  std::string scene_id;
  std::size_t t_obs = 1;
  std::size_t t_pred = 1;
  std::size_t focal = 0;
  std::vector<std::string> agent_ids;
  std::vector<double> xy;       // [A x T x 2]
  std::vector<std::uint8_t> valid;  // [A x T]
  /// Generator branch (0 straight, 1 left, 2 right), -1 when unknown.
  int branch = -1;

  TrajectoryScene() = default;
  TrajectoryScene(std::string id, std::size_t agents, std::size_t t_obs, std::size_t t_pred);

  std::size_t agents() const noexcept { return agent_ids.size(); }
  std::size_t steps() const noexcept { return t_obs + t_pred; }
  double& x(std::size_t a, std::size_t t) { return xy[(a * steps() + t) * 2]; }
  double& y(std::size_t a, std::size_t t) { return xy[(a * steps() + t) * 2 + 1]; }
  double x(std::size_t a, std::size_t t) const { return xy[(a * steps() + t) * 2]; }
  double y(std::size_t a, std::size_t t) const { return xy[(a * steps() + t) * 2 + 1]; }
  bool is_valid(std::size_t a, std::size_t t) const { return valid[a * steps() + t] != 0; }
  void set_valid(std::size_t a, std::size_t t, bool v) { valid[a * steps() + t] = v ? 1 : 0; }

  /// Focal future as [t_pred x 2].
  Tensor focal_future() const;
  /// Throws ContractError unless the focal agent is fully observed and
  /// every valid coordinate is finite.
  void validate() const;
};

struct SynthConfig {
  std::size_t t_obs = 8;
  std::size_t t_pred = 12;
  double dt = 0.5;
  double speed_min = 4.0;
  double speed_max = 8.0;
  /// Straight, left, right.
  std::array<double, 3> branch_probs{0.5, 0.25, 0.25};
  double turn_radius = 8.0;
  /// Distance from the last observed position to the start of the turn.
  double entry_min = 0.0;
  double entry_max = 4.0;
  double noise = 0.05;
  std::size_t neighbors = 3;

  void validate() const;
};

/// Focal agent drives towards an intersection and goes straight, left or
/// right (quarter circle of turn_radius) with branch_probs; neighbours drive
/// straight. Each scene gets a random global rotation and offset.
std::vector<TrajectoryScene> synth_intersection(std::size_t n_scenes, Rng& rng, const SynthConfig& cfg = {});

struct SceneLoadResult {
  std::vector<TrajectoryScene> scenes;
  std::vector<std::string> warnings;
};

/// Header `scene_id,agent_id,is_focal,timestep,x,y`; missing rows mark
/// missing observations. Scenes whose focal track is absent or incomplete
/// are skipped with a warning.
SceneLoadResult load_csv_scenes(const std::filesystem::path& path, std::size_t t_obs);
void write_csv_scenes(const std::filesystem::path& path, const std::vector<TrajectoryScene>& scenes);

/// Maps world coordinates to the focal frame: p' = R(-theta) (p - origin).
struct SceneNormalization {
  double tx = 0.0;
  double ty = 0.0;
  double theta = 0.0;

  std::array<double, 2> apply(double x, double y) const;
  std::array<double, 2> invert(double x, double y) const;
};

/// Heading of the focal agent at its last observed step: the last
/// displacement, else the longest nonzero observed displacement, else 0.
double focal_heading(const TrajectoryScene& scene);

SceneNormalization normalization_of(const TrajectoryScene& scene);
TrajectoryScene transform_scene(const TrajectoryScene& scene, const SceneNormalization& n, bool inverse = false);

struct NormalizedScene {
  TrajectoryScene scene;
  SceneNormalization transform;
};
NormalizedScene normalize(const TrajectoryScene& scene);
TrajectoryScene denormalize(const TrajectoryScene& scene, const SceneNormalization& n);

/// Keeps the `max_agents` agents closest to the focal agent at the last
/// observed step, ordered by that distance (focal first). Agents not observed
/// there rank last.
TrajectoryScene truncate_agents(const TrajectoryScene& scene, std::size_t max_agents = 6);

// ----------------------------------------------------------------- tensors

/// Model inputs and flattened targets, one row per sample.
struct Dataset {
  Tensor inputs;   // [N x F] or [N x t_obs x F]
  Tensor targets;  // [N x t_pred*2]

  std::size_t size() const { return targets.dim(0); }
  std::size_t t_pred() const { return targets.dim(1) / 2; }
  Dataset rows(std::span<const std::size_t> idx) const;
  /// Target of one sample as [t_pred x 2].
  Tensor target(std::size_t i) const;
};

Dataset toy_to_dataset(const std::vector<ToySample>& samples);

/// Per-step focal features (x, y, dx, dy) plus (x, y, valid) for up to
/// `neighbors` other agents, from normalised and truncated scenes.
std::size_t scene_feature_dim(std::size_t neighbors = 5);
Dataset scenes_to_dataset(const std::vector<TrajectoryScene>& scenes, std::size_t neighbors = 5);

/// normalize + truncate_agents on every scene.
std::vector<TrajectoryScene> prepare_scenes(const std::vector<TrajectoryScene>& scenes, std::size_t max_agents = 6);

}  // namespace hmix
