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

#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hmix/error.hpp"
#include "hmix_cli/commands.hpp"
#include "hmix_cli/svg.hpp"

namespace hmix::cli {
namespace {

struct DumpMode {
  int meta = -1;
  double weight = 0.0;
  std::vector<std::pair<double, double>> mu;
};

struct DumpScene {
  std::string id;
  std::map<std::size_t, DumpMode> modes;
};

std::vector<DumpScene> read_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("forecast dump '{}' not found", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != "scene_id,meta_index,mode_index,weight,t,mu_x,mu_y,b_x,b_y") {
    throw ParseError(fmt::format("{}: line 1: not a forecast dump", path.string()));
  }
  std::vector<DumpScene> scenes;
  std::map<std::string, std::size_t> index;
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (cells.size() != 9) throw ParseError(fmt::format("{}: line {}: expected 9 fields", path.string(), no));
    try {
      auto [it, fresh] = index.emplace(cells[0], scenes.size());
      if (fresh) scenes.push_back({cells[0], {}});
      DumpMode& m = scenes[it->second].modes[std::stoul(cells[2])];
      m.meta = std::stoi(cells[1]);
      m.weight = std::stod(cells[3]);
      m.mu.emplace_back(std::stod(cells[5]), std::stod(cells[6]));
    } catch (const std::logic_error&) {
      throw ParseError(fmt::format("{}: line {}: malformed number", path.string(), no));
    }
  }
  return scenes;
}

std::string safe_name(const std::string& id) {
  std::string s;
  for (char c : id) s += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  return s;
}

std::filesystem::path plot_toy(const PlotOptions& opt, const std::filesystem::path& out) {
  if (opt.checkpoint.empty()) throw ConfigError("toy plots need --checkpoint");
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  if (ck.model.input_dim != 1 || ck.model.head.t_pred != 1 || ck.model.kind != ModelKind::MLP) {
    throw ConfigError("toy plots need a checkpoint trained on the toy dataset");
  }
  Ensemble model = restore_ensemble(ck);
  const std::size_t kprime = ck.model.head.kprime;
  const double panel = 300.0;
  Svg svg(3 * panel + 40, panel + 60);
  svg.rect(0, 0, 3 * panel + 40, panel + 60, "#ffffff");
  const Axis ax{-1.5, 1.5, 10.0, panel - 10.0};
  const Axis ay{-1.5, 1.5, panel - 10.0, 10.0};
  Rng rng(opt.common.seed.value_or(0));
  const std::array<double, 3> ts{0.0, 0.5, 1.0};
  for (std::size_t p = 0; p < ts.size(); ++p) {
    const double t = ts[p];
    svg.open_group("panel", 10.0 + static_cast<double>(p) * (panel + 10.0), 40.0);
    svg.rect(0, 0, panel, panel, "#fafafa", "#000000");
    svg.line(ax(0), ay(-1.5), ax(0), ay(1.5), "#bbbbbb");
    svg.line(ax(-1.5), ay(0), ax(1.5), ay(0), "#bbbbbb");
    svg.text(panel / 2, -10, fmt::format("t = {:.1f}", t), 14, "middle");
    for (std::size_t i = 0; i < opt.samples; ++i) {
      const ToySample s = toy_sample(t, rng);
      svg.circle(ax(s.x), ay(s.y), 1.2, "#999999", 0.5);
    }
    Tape tape;
    const auto heads = model.forward(tape, Tensor(Shape{1, 1}, t));
    for (const auto& head : heads) {
      const MixtureForecast f = forecast_row(head, 0);
      for (std::size_t k = 0; k < f.size(); ++k) {
        const std::size_t meta = k / kprime;
        svg.circle(ax(f.components[k].mu.at(0, 0)), ay(f.components[k].mu.at(0, 1)),
                   3.0 + 20.0 * std::sqrt(f.weights[k] / static_cast<double>(heads.size())), palette(meta), 0.8,
                   "#000000");
      }
    }
    svg.close_group();
  }
  const auto path = out / "toy_modes.svg";
  svg.save(path.string());
  return path;
}

std::vector<std::filesystem::path> plot_trajectories(const PlotOptions& opt, const std::filesystem::path& out) {
  if (opt.dump.empty()) throw ConfigError("trajectory plots need --dump");
  const auto scenes = read_dump(opt.dump);
  std::vector<std::filesystem::path> written;
  for (std::size_t s = 0; s < scenes.size() && s < opt.scenes; ++s) {
    const auto& scene = scenes[s];
    double lo_x = 0.0, hi_x = 0.0, lo_y = 0.0, hi_y = 0.0;
    for (const auto& [k, m] : scene.modes) {
      for (const auto& [x, y] : m.mu) {
        lo_x = std::min(lo_x, x);
        hi_x = std::max(hi_x, x);
        lo_y = std::min(lo_y, y);
        hi_y = std::max(hi_y, y);
      }
    }
    const auto [x0, x1] = padded_range(lo_x, hi_x);
    const auto [y0, y1] = padded_range(lo_y, hi_y);
    const double span = std::max(x1 - x0, y1 - y0);
    const Axis ax{x0, x0 + span, 20.0, 480.0};
    const Axis ay{y0, y0 + span, 480.0, 20.0};
    Svg svg(500, 520);
    svg.rect(0, 0, 500, 520, "#ffffff");
    svg.text(250, 510, fmt::format("scene {}", scene.id), 12, "middle");
    svg.circle(ax(0), ay(0), 4, "#000000");

    // Sub-modes dashed; meta-modes solid as the weight-normalised mean path of their group.
    std::map<int, std::pair<double, std::vector<std::pair<double, double>>>> metas;
    for (const auto& [k, m] : scene.modes) {
      std::vector<std::pair<double, double>> pts{{ax(0), ay(0)}};
      for (const auto& [x, y] : m.mu) pts.emplace_back(ax(x), ay(y));
      const std::string colour = palette(m.meta >= 0 ? static_cast<std::size_t>(m.meta) : k);
      svg.polyline(pts, colour, 1.0 + 4.0 * m.weight, m.meta >= 0);
      if (m.meta < 0) continue;
      auto& [mass, path] = metas[m.meta];
      if (path.empty()) path.assign(m.mu.size(), {0.0, 0.0});
      mass += m.weight;
      for (std::size_t t = 0; t < m.mu.size() && t < path.size(); ++t) {
        path[t].first += m.weight * m.mu[t].first;
        path[t].second += m.weight * m.mu[t].second;
      }
    }
    for (const auto& [meta, entry] : metas) {
      const auto& [mass, path] = entry;
      if (!(mass > 0.0)) continue;
      std::vector<std::pair<double, double>> pts{{ax(0), ay(0)}};
      for (const auto& [x, y] : path) pts.emplace_back(ax(x / mass), ay(y / mass));
      svg.polyline(pts, palette(static_cast<std::size_t>(meta)), 3.0, false);
    }
    const auto path = out / fmt::format("traj_{}.svg", safe_name(scene.id));
    svg.save(path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace

std::vector<std::filesystem::path> cmd_plot(const PlotOptions& opt) {
  if (opt.kind != "toy" && opt.kind != "traj") throw ConfigError(fmt::format("unknown plot kind '{}' (toy, traj)", opt.kind));
  if (opt.kind == "traj" && !opt.dump.empty() && !std::filesystem::exists(opt.dump)) {
    throw ConfigError(fmt::format("forecast dump '{}' not found", opt.dump));
  }
  const std::filesystem::path out = opt.common.out;
  claim_output(out, opt.common.force, true);
  std::vector<std::filesystem::path> written;
  if (opt.kind == "toy") {
    written.push_back(plot_toy(opt, out));
  } else {
    written = plot_trajectories(opt, out);
  }
  for (const auto& p : written) spdlog::info("wrote {}", p.string());
  return written;
}

}  // namespace hmix::cli
