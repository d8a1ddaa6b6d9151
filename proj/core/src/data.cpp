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

#include "hmix/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double parse_double(const std::string& s, std::size_t line, const char* field) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError(fmt::format("line {}: bad {} value '{}'", line, field, s));
  }
  return v;
}

long parse_int(const std::string& s, std::size_t line, const char* field) {
  long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(fmt::format("line {}: bad {} value '{}'", line, field, s));
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read {}", path.string()));
  return in;
}

std::array<double, 2> rotate(double x, double y, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * x - s * y, s * x + c * y};
}

// Focal path in its own frame at arc length s past the last observed point.
std::array<double, 2> branch_point(double s, int branch, double entry, double radius) {
  if (branch == 0 || s <= entry) return {s, 0.0};
  const double side = branch == 1 ? 1.0 : -1.0;
  const double quarter = radius * std::numbers::pi / 2.0;
  const double along = s - entry;
  if (along <= quarter) {
    const double phi = along / radius;
    return {entry + radius * std::sin(phi), side * radius * (1.0 - std::cos(phi))};
  }
  return {entry + radius, side * (radius + along - quarter)};
}

}  // namespace

int toy_region(double x, double y) {
  if (!(x >= -1.0 && x <= 1.0 && y >= -1.0 && y <= 1.0)) return 5;
  if (x < 0.0) return y < 0.0 ? 1 : 2;
  return y < 0.0 ? 3 : 4;
}

std::array<double, 4> toy_region_probs(double t) {
  return {(1.0 - t) / 2.0, t / 2.0, t / 2.0, (1.0 - t) / 2.0};
}

ToySample toy_sample(double t, Rng& rng) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError(fmt::format("toy_sample: t = {} outside [0, 1]", t));
  const auto probs = toy_region_probs(t);
  const double u = rng.uniform();
  int region = 4;
  double acc = 0.0;
  for (int r = 0; r < 4; ++r) {
    acc += probs[static_cast<std::size_t>(r)];
    if (u < acc) {
      region = r + 1;
      break;
    }
  }
  const double ux = rng.uniform();
  const double uy = rng.uniform();
  const double x = region <= 2 ? -1.0 + ux : ux;
  const double y = region == 1 || region == 3 ? -1.0 + uy : uy;
  return {t, x, y};
}

std::vector<ToySample> toy_dataset(std::size_t n, Rng& rng) {
  std::vector<ToySample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(toy_sample(rng.uniform(), rng));
  return out;
}

void write_toy_csv(const std::filesystem::path& path, const std::vector<ToySample>& samples) {
  auto out = open_out(path);
  out << "t,x,y\n";
  for (const auto& s : samples) out << fmt::format("{:.12f},{:.12f},{:.12f}\n", s.t, s.x, s.y);
}

std::vector<ToySample> read_toy_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "t,x,y") {
    throw ParseError(fmt::format("{}: line 1: expected header 't,x,y'", path.string()));
  }
  std::vector<ToySample> out;
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw ParseError(fmt::format("line {}: expected 3 fields, got {}", no, cells.size()));
    out.push_back({parse_double(cells[0], no, "t"), parse_double(cells[1], no, "x"), parse_double(cells[2], no, "y")});
  }
  return out;
}

TrajectoryScene::TrajectoryScene(std::string id, std::size_t agents, std::size_t t_obs_, std::size_t t_pred_)
    : scene_id(std::move(id)), t_obs(t_obs_), t_pred(t_pred_), agent_ids(agents),
      xy(agents * (t_obs_ + t_pred_) * 2, 0.0), valid(agents * (t_obs_ + t_pred_), 1) {
  for (std::size_t a = 0; a < agents; ++a) agent_ids[a] = std::to_string(a);
}

Tensor TrajectoryScene::focal_future() const {
  Tensor out(Shape{t_pred, 2});
  for (std::size_t k = 0; k < t_pred; ++k) {
    out.at(k, 0) = x(focal, t_obs + k);
    out.at(k, 1) = y(focal, t_obs + k);
  }
  return out;
}

void TrajectoryScene::validate() const {
  if (t_obs == 0 || t_pred == 0) throw ContractError("scene needs t_obs >= 1 and t_pred >= 1");
  if (agents() == 0 || focal >= agents()) throw ContractError(fmt::format("scene {}: bad focal index", scene_id));
  if (xy.size() != agents() * steps() * 2 || valid.size() != agents() * steps()) {
    throw ContractError(fmt::format("scene {}: storage does not match {} agents x {} steps", scene_id, agents(), steps()));
  }
  for (std::size_t t = 0; t < steps(); ++t) {
    if (!is_valid(focal, t)) throw ContractError(fmt::format("scene {}: focal agent missing at step {}", scene_id, t));
  }
  for (std::size_t a = 0; a < agents(); ++a) {
    for (std::size_t t = 0; t < steps(); ++t) {
      if (is_valid(a, t) && !(std::isfinite(x(a, t)) && std::isfinite(y(a, t)))) {
        throw ContractError(fmt::format("scene {}: non-finite position for agent {} at {}", scene_id, a, t));
      }
    }
  }
}

void SynthConfig::validate() const {
  if (t_obs < 2 || t_pred == 0) throw ConfigError("synthetic scenes need t_obs >= 2 and t_pred >= 1");
  if (!(dt > 0.0) || !(speed_min > 0.0) || !(speed_max >= speed_min)) throw ConfigError("bad dt or speed range");
  if (!(turn_radius > 0.0) || !(entry_min >= 0.0) || !(entry_max >= entry_min) || !(noise >= 0.0)) {
    throw ConfigError("bad turn radius, entry range or noise");
  }
  double total = 0.0;
  for (double p : branch_probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(fmt::format("branch probability {} outside [0, 1]", p));
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError(fmt::format("branch probabilities sum to {}, not 1", total));
}

std::vector<TrajectoryScene> synth_intersection(std::size_t n_scenes, Rng& rng, const SynthConfig& cfg) {
  cfg.validate();
  std::vector<TrajectoryScene> out;
  out.reserve(n_scenes);
  const std::size_t steps = cfg.t_obs + cfg.t_pred;
  for (std::size_t i = 0; i < n_scenes; ++i) {
    TrajectoryScene s(fmt::format("s{:06d}", i), 1 + cfg.neighbors, cfg.t_obs, cfg.t_pred);
    const double u = rng.uniform();
    s.branch = u < cfg.branch_probs[0] ? 0 : (u < cfg.branch_probs[0] + cfg.branch_probs[1] ? 1 : 2);
    const double step = rng.uniform(cfg.speed_min, cfg.speed_max) * cfg.dt;
    const double entry = rng.uniform(cfg.entry_min, cfg.entry_max);
    const double psi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ox = rng.uniform(-50.0, 50.0);
    const double oy = rng.uniform(-50.0, 50.0);
    auto place = [&](std::size_t a, std::size_t t, double lx, double ly) {
      const auto g = rotate(lx, ly, psi);
      s.x(a, t) = g[0] + ox;
      s.y(a, t) = g[1] + oy;
    };

    for (std::size_t t = 0; t < steps; ++t) {
      const double arc = (static_cast<double>(t) - static_cast<double>(cfg.t_obs - 1)) * step;
      const auto p = arc <= 0.0 ? std::array<double, 2>{arc, 0.0} : branch_point(arc, s.branch, entry, cfg.turn_radius);
      const double nx = cfg.noise > 0.0 ? rng.normal(0.0, cfg.noise) : 0.0;
      const double ny = cfg.noise > 0.0 ? rng.normal(0.0, cfg.noise) : 0.0;
      place(0, t, p[0] + nx, p[1] + ny);
    }
    for (std::size_t a = 1; a <= cfg.neighbors; ++a) {
      const double sx = rng.uniform(-25.0, 25.0);
      const double sy = rng.uniform(-25.0, 25.0);
      const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double v = rng.uniform(cfg.speed_min, cfg.speed_max) * cfg.dt;
      for (std::size_t t = 0; t < steps; ++t) {
        const double d = v * static_cast<double>(t);
        place(a, t, sx + d * std::cos(heading), sy + d * std::sin(heading));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

SceneLoadResult load_csv_scenes(const std::filesystem::path& path, std::size_t t_obs) {
  struct Row {
    std::string agent;
    bool focal;
    std::size_t t;
    double x;
    double y;
  };
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "scene_id,agent_id,is_focal,timestep,x,y") {
    throw ParseError(fmt::format("{}: line 1: expected header 'scene_id,agent_id,is_focal,timestep,x,y'", path.string()));
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 6) throw ParseError(fmt::format("line {}: expected 6 fields, got {}", no, c.size()));
    if (c[0].empty() || c[1].empty()) throw ParseError(fmt::format("line {}: empty scene or agent id", no));
    const long focal = parse_int(c[2], no, "is_focal");
    if (focal != 0 && focal != 1) throw ParseError(fmt::format("line {}: is_focal must be 0 or 1", no));
    const long t = parse_int(c[3], no, "timestep");
    if (t < 0) throw ParseError(fmt::format("line {}: negative timestep", no));
    if (!rows.count(c[0])) order.push_back(c[0]);
    rows[c[0]].push_back({c[1], focal == 1, static_cast<std::size_t>(t), parse_double(c[4], no, "x"),
                          parse_double(c[5], no, "y")});
  }

  SceneLoadResult result;
  for (const auto& id : order) {
    const auto& rs = rows[id];
    std::vector<std::string> agents;
    std::string focal_id;
    std::size_t steps = 0;
    for (const auto& r : rs) {
      if (std::find(agents.begin(), agents.end(), r.agent) == agents.end()) agents.push_back(r.agent);
      if (r.focal) focal_id = r.agent;
      steps = std::max(steps, r.t + 1);
    }
    if (focal_id.empty()) {
      result.warnings.push_back(fmt::format("scene {}: no focal track, skipped", id));
      continue;
    }
    if (steps <= t_obs) {
      result.warnings.push_back(fmt::format("scene {}: {} steps leave no future after t_obs = {}, skipped", id, steps, t_obs));
      continue;
    }
    TrajectoryScene s(id, agents.size(), t_obs, steps - t_obs);
    s.agent_ids = agents;
    std::fill(s.valid.begin(), s.valid.end(), 0);
    s.focal = static_cast<std::size_t>(std::find(agents.begin(), agents.end(), focal_id) - agents.begin());
    for (const auto& r : rs) {
      const auto a = static_cast<std::size_t>(std::find(agents.begin(), agents.end(), r.agent) - agents.begin());
      s.x(a, r.t) = r.x;
      s.y(a, r.t) = r.y;
      s.set_valid(a, r.t, true);
    }
    bool complete = true;
    for (std::size_t t = 0; t < s.steps(); ++t) complete = complete && s.is_valid(s.focal, t);
    if (!complete) {
      result.warnings.push_back(fmt::format("scene {}: focal track incomplete, skipped", id));
      continue;
    }
    result.scenes.push_back(std::move(s));
  }
  return result;
}

void write_csv_scenes(const std::filesystem::path& path, const std::vector<TrajectoryScene>& scenes) {
  auto out = open_out(path);
  out << "scene_id,agent_id,is_focal,timestep,x,y\n";
  for (const auto& s : scenes) {
    for (std::size_t a = 0; a < s.agents(); ++a) {
      for (std::size_t t = 0; t < s.steps(); ++t) {
        if (!s.is_valid(a, t)) continue;
        out << fmt::format("{},{},{},{},{:.6f},{:.6f}\n", s.scene_id, s.agent_ids[a], a == s.focal ? 1 : 0, t,
                           s.x(a, t), s.y(a, t));
      }
    }
  }
}

std::array<double, 2> SceneNormalization::apply(double x, double y) const { return rotate(x - tx, y - ty, -theta); }

std::array<double, 2> SceneNormalization::invert(double x, double y) const {
  const auto p = rotate(x, y, theta);
  return {p[0] + tx, p[1] + ty};
}

double focal_heading(const TrajectoryScene& s) {
  const std::size_t f = s.focal;
  const std::size_t last = s.t_obs - 1;
  if (last == 0) return 0.0;
  const double dx = s.x(f, last) - s.x(f, last - 1);
  const double dy = s.y(f, last) - s.y(f, last - 1);
  if (dx != 0.0 || dy != 0.0) return std::atan2(dy, dx);
  double best = 0.0;
  double heading = 0.0;
  for (std::size_t t = 1; t < s.t_obs; ++t) {
    const double ex = s.x(f, t) - s.x(f, t - 1);
    const double ey = s.y(f, t) - s.y(f, t - 1);
    const double len = std::hypot(ex, ey);
    if (len > best) {
      best = len;
      heading = std::atan2(ey, ex);
    }
  }
  return heading;
}

SceneNormalization normalization_of(const TrajectoryScene& s) {
  return {s.x(s.focal, s.t_obs - 1), s.y(s.focal, s.t_obs - 1), focal_heading(s)};
}

TrajectoryScene transform_scene(const TrajectoryScene& scene, const SceneNormalization& n, bool inverse) {
  TrajectoryScene out = scene;
  for (std::size_t a = 0; a < scene.agents(); ++a) {
    for (std::size_t t = 0; t < scene.steps(); ++t) {
      if (!scene.is_valid(a, t)) continue;
      const auto p = inverse ? n.invert(scene.x(a, t), scene.y(a, t)) : n.apply(scene.x(a, t), scene.y(a, t));
      out.x(a, t) = p[0];
      out.y(a, t) = p[1];
    }
  }
  return out;
}

NormalizedScene normalize(const TrajectoryScene& scene) {
  scene.validate();
  const auto n = normalization_of(scene);
  return {transform_scene(scene, n), n};
}

TrajectoryScene denormalize(const TrajectoryScene& scene, const SceneNormalization& n) {
  return transform_scene(scene, n, true);
}

TrajectoryScene truncate_agents(const TrajectoryScene& scene, std::size_t max_agents) {
  if (max_agents == 0) throw ConfigError("max_agents must be positive");
  const std::size_t last = scene.t_obs - 1;
  const double fx = scene.x(scene.focal, last);
  const double fy = scene.y(scene.focal, last);
  std::vector<std::size_t> order(scene.agents());
  std::iota(order.begin(), order.end(), 0);
  auto dist = [&](std::size_t a) {
    if (a == scene.focal) return -1.0;
    if (!scene.is_valid(a, last)) return std::numeric_limits<double>::infinity();
    return std::hypot(scene.x(a, last) - fx, scene.y(a, last) - fy);
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
  order.resize(std::min(max_agents, order.size()));

  TrajectoryScene out(scene.scene_id, order.size(), scene.t_obs, scene.t_pred);
  out.branch = scene.branch;
  out.focal = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t a = order[i];
    out.agent_ids[i] = scene.agent_ids[a];
    for (std::size_t t = 0; t < scene.steps(); ++t) {
      out.x(i, t) = scene.x(a, t);
      out.y(i, t) = scene.y(a, t);
      out.set_valid(i, t, scene.is_valid(a, t));
    }
  }
  return out;
}

Dataset Dataset::rows(std::span<const std::size_t> idx) const {
  Shape in_shape = inputs.shape();
  Shape out_shape = targets.shape();
  const std::size_t in_w = inputs.size() / in_shape[0];
  const std::size_t out_w = targets.size() / out_shape[0];
  in_shape[0] = idx.size();
  out_shape[0] = idx.size();
  Dataset d{Tensor(in_shape), Tensor(out_shape)};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= size()) throw BoundsError(fmt::format("dataset row {} out of {}", idx[i], size()));
    std::copy_n(inputs.values().begin() + idx[i] * in_w, in_w, d.inputs.values().begin() + i * in_w);
    std::copy_n(targets.values().begin() + idx[i] * out_w, out_w, d.targets.values().begin() + i * out_w);
  }
  return d;
}

Tensor Dataset::target(std::size_t i) const {
  const std::size_t w = targets.dim(1);
  Tensor out(Shape{w / 2, 2});
  for (std::size_t c = 0; c < w; ++c) out[c] = targets.at(i, c);
  return out;
}

Dataset toy_to_dataset(const std::vector<ToySample>& samples) {
  if (samples.empty()) throw ContractError("toy_to_dataset: no samples");
  Dataset d{Tensor(Shape{samples.size(), 1}), Tensor(Shape{samples.size(), 2})};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    d.inputs[i] = samples[i].t;
    d.targets.at(i, 0) = samples[i].x;
    d.targets.at(i, 1) = samples[i].y;
  }
  return d;
}

std::size_t scene_feature_dim(std::size_t neighbors) { return 4 + 3 * neighbors; }

Dataset scenes_to_dataset(const std::vector<TrajectoryScene>& scenes, std::size_t neighbors) {
  if (scenes.empty()) throw ContractError("scenes_to_dataset: no scenes");
  const std::size_t t_obs = scenes.front().t_obs;
  const std::size_t t_pred = scenes.front().t_pred;
  const std::size_t f = scene_feature_dim(neighbors);
  Dataset d{Tensor(Shape{scenes.size(), t_obs, f}), Tensor(Shape{scenes.size(), t_pred * 2})};
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    if (s.t_obs != t_obs || s.t_pred != t_pred) {
      throw DimensionError(fmt::format("scene {} has {}+{} steps, expected {}+{}", s.scene_id, s.t_obs, s.t_pred, t_obs,
                                       t_pred));
    }
    std::vector<std::size_t> others;
    for (std::size_t a = 0; a < s.agents(); ++a) {
      if (a != s.focal) others.push_back(a);
    }
    for (std::size_t t = 0; t < t_obs; ++t) {
      double* row = d.inputs.values().data() + (i * t_obs + t) * f;
      row[0] = s.x(s.focal, t);
      row[1] = s.y(s.focal, t);
      row[2] = t > 0 ? s.x(s.focal, t) - s.x(s.focal, t - 1) : 0.0;
      row[3] = t > 0 ? s.y(s.focal, t) - s.y(s.focal, t - 1) : 0.0;
      for (std::size_t j = 0; j < neighbors && j < others.size(); ++j) {
        if (!s.is_valid(others[j], t)) continue;
        row[4 + 3 * j] = s.x(others[j], t);
        row[5 + 3 * j] = s.y(others[j], t);
        row[6 + 3 * j] = 1.0;
      }
    }
    for (std::size_t k = 0; k < t_pred; ++k) {
      d.targets.at(i, 2 * k) = s.x(s.focal, t_obs + k);
      d.targets.at(i, 2 * k + 1) = s.y(s.focal, t_obs + k);
    }
  }
  return d;
}

std::vector<TrajectoryScene> prepare_scenes(const std::vector<TrajectoryScene>& scenes, std::size_t max_agents) {
  std::vector<TrajectoryScene> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(truncate_agents(normalize(s).scene, max_agents));
  return out;
}

}  // namespace hmix
