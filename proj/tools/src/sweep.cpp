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
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hmix/error.hpp"
#include "hmix_cli/commands.hpp"
#include "hmix_cli/svg.hpp"

namespace hmix::cli {
namespace {

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

struct Cell {
  std::vector<std::string> values;
  std::uint64_t seed = 0;
  std::string id;
};

struct Row {
  std::string cell;
  std::vector<std::string> values;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

GridAxis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError(fmt::format("grid entry '{}' must look like key=v1,v2", spec));
  GridAxis a{resolve_key(spec.substr(0, eq)), split(spec.substr(eq + 1), ',')};
  if (a.values.empty()) throw ConfigError(fmt::format("grid for '{}' is empty", a.key));
  if (a.key.rfind("data.", 0) == 0 || a.key == "seed") {
    throw ConfigError(fmt::format("'{}' cannot be swept; use --seeds for seeds", a.key));
  }
  return a;
}

std::vector<double> metric_values(const MetricReport& r, std::size_t params, std::size_t macs) {
  return {r.made_1, r.made_6, r.mfde_1, r.mfde_6, r.nll_3, r.nll_6, static_cast<double>(params),
          static_cast<double>(macs)};
}

std::string header_of(const std::vector<GridAxis>& axes) {
  std::string h = "cell";
  for (const auto& a : axes) h += "," + a.key;
  return h + ",seed,metric,value";
}

std::vector<Row> read_rows(const std::filesystem::path& path, const std::string& header, std::size_t n_axes) {
  std::vector<Row> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (line != header) {
    throw ConfigError(fmt::format("'{}' was written for a different grid ({}); pass --force to start over",
                                  path.string(), line));
  }
  while (std::getline(in, line)) {
    const auto cells = split(line, ',');
    if (cells.size() != n_axes + 4) continue;
    Row r;
    r.cell = cells[0];
    r.values.assign(cells.begin() + 1, cells.begin() + 1 + static_cast<std::ptrdiff_t>(n_axes));
    r.seed = std::stoull(cells[n_axes + 1]);
    r.metric = cells[n_axes + 2];
    r.value = std::stod(cells[n_axes + 3]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string file_stem_of(const std::string& metric) {
  if (metric == "#Prm") return "params";
  std::string s;
  for (char c : metric) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_number(const std::string& s, double* v) {
  try {
    std::size_t used = 0;
    *v = std::stod(s, &used);
    return used == s.size();
  } catch (const std::logic_error&) {
    return false;
  }
}

void write_chart(const std::filesystem::path& path, const std::string& metric, const std::vector<GridAxis>& axes,
                 const std::vector<Row>& rows) {
  const GridAxis& xa = axes.front();
  std::vector<double> xs;
  bool numeric = true;
  for (std::size_t i = 0; i < xa.values.size(); ++i) {
    double v = 0.0;
    numeric = numeric && is_number(xa.values[i], &v);
    xs.push_back(v);
  }
  if (!numeric) {
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
  }
  const std::vector<std::string> series = axes.size() > 1 ? axes[1].values : std::vector<std::string>{""};

  // Mean over seeds per (x, series).
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    if (r.metric != metric) continue;
    auto& a = acc[{r.values[0], axes.size() > 1 ? r.values[1] : ""}];
    a.first += r.value;
    ++a.second;
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& [key, a] : acc) {
    lo = std::min(lo, a.first / static_cast<double>(a.second));
    hi = std::max(hi, a.first / static_cast<double>(a.second));
  }
  if (acc.empty()) lo = hi = 0.0;
  const auto [ylo, yhi] = padded_range(lo, hi);
  const auto [xlo, xhi] = padded_range(*std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end()));
  const Axis x{xlo, xhi, 70.0, 580.0};
  const Axis y{ylo, yhi, 340.0, 40.0};

  Svg svg(640.0, 400.0);
  svg.rect(0, 0, 640, 400, "#ffffff");
  svg.text(320, 24, fmt::format("{} vs {}", metric, xa.key), 14, "middle");
  svg.line(70, 340, 580, 340, "#000000");
  svg.line(70, 40, 70, 340, "#000000");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    svg.line(x(xs[i]), 340, x(xs[i]), 345, "#000000");
    svg.text(x(xs[i]), 360, xa.values[i], 11, "middle");
  }
  for (int t = 0; t <= 4; ++t) {
    const double v = ylo + (yhi - ylo) * t / 4.0;
    svg.line(65, y(v), 70, y(v), "#000000");
    svg.text(62, y(v) + 4, fmt::format("{:.4g}", v), 11, "end");
  }
  svg.text(325, 385, xa.key, 12, "middle");
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto it = acc.find({xa.values[i], series[s]});
      if (it == acc.end()) continue;
      pts.emplace_back(x(xs[i]), y(it->second.first / static_cast<double>(it->second.second)));
    }
    svg.polyline(pts, palette(s), 2.0);
    for (const auto& [px, py] : pts) svg.circle(px, py, 3, palette(s));
    if (axes.size() > 1) svg.text(590, 50 + 16.0 * static_cast<double>(s), fmt::format("{}={}", axes[1].key, series[s]), 11);
  }
  svg.save(path.string());
}

}  // namespace

SweepSummary cmd_sweep(const SweepOptions& opt) {
  if (opt.grid.empty()) throw ConfigError("empty grid: pass --grid key=v1,v2,...");
  if (opt.grid.size() > 2) throw ConfigError("a sweep takes one or two --grid entries");
  std::vector<GridAxis> axes;
  for (const auto& g : opt.grid) axes.push_back(parse_axis(g));
  if (axes.size() == 2 && axes[0].key == axes[1].key) throw ConfigError("grid keys must differ");
  const Aggregation agg = parse_aggregation(opt.aggregate);

  const json base = build_config(opt.common, opt.overrides);
  const RunConfig base_cfg = parse_config(base);
  std::vector<std::uint64_t> seeds = opt.seeds;
  if (seeds.empty()) seeds.push_back(base_cfg.train.seed);

  std::vector<Cell> cells;
  std::vector<std::vector<std::string>> combos{{}};
  for (const auto& a : axes) {
    std::vector<std::vector<std::string>> next;
    for (const auto& c : combos) {
      for (const auto& v : a.values) {
        auto e = c;
        e.push_back(v);
        next.push_back(std::move(e));
      }
    }
    combos = std::move(next);
  }
  std::vector<RunConfig> configs;
  for (const auto& combo : combos) {
    for (std::uint64_t seed : seeds) {
      json j = base;
      std::string id;
      for (std::size_t i = 0; i < axes.size(); ++i) {
        set_path(j, axes[i].key, combo[i]);
        id += fmt::format("{}={};", axes[i].key, combo[i]);
      }
      j["seed"] = seed;
      RunConfig cfg = parse_config(j);
      cfg.validate();
      configs.push_back(cfg);
      cells.push_back({combo, seed, id + fmt::format("seed={}", seed)});
    }
  }

  const std::filesystem::path out = opt.common.out;
  if (out.empty()) throw ConfigError("--out is required");
  if (opt.common.force && std::filesystem::exists(out)) std::filesystem::remove_all(out);
  std::filesystem::create_directories(out);
  const std::filesystem::path csv_path = out / "sweep.csv";
  const std::string header = header_of(axes);
  const auto existing = read_rows(csv_path, header, axes.size());
  std::map<std::string, std::set<std::string>> done_metrics;
  for (const auto& r : existing) done_metrics[r.cell].insert(r.metric);
  const auto columns = metric_columns();

  std::vector<std::size_t> pending;
  SweepSummary summary;
  summary.cells = cells.size();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto it = done_metrics.find(cells[i].id);
    if (it != done_metrics.end() && it->second.size() == columns.size()) {
      ++summary.skipped;
    } else {
      pending.push_back(i);
    }
  }
  spdlog::info("sweep: {} cells, {} already complete", cells.size(), summary.skipped);

  const LoadedData data = load_data(base_cfg.data);
  Dataset eval_raw;
  if (!opt.eval_data.empty()) {
    eval_raw = load_eval_data(base_cfg.data, opt.eval_data, nullptr);
  } else {
    eval_raw = data.val.targets.rank() == 2 && data.val.size() > 0 ? data.val : data.train;
  }

  if (!std::filesystem::exists(csv_path) || std::filesystem::file_size(csv_path) == 0) {
    std::ofstream(csv_path, std::ios::binary) << header << "\n";
  }
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  const auto worker = [&] {
    while (true) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      const std::size_t i = pending[slot];
      try {
        const std::filesystem::path cell_dir = out / "cells" / fmt::format("{:04d}", i);
        std::filesystem::remove_all(cell_dir);
        std::filesystem::create_directories(cell_dir);
        TrainedRun run = run_training(configs[i], data, cell_dir, false);
        const Dataset eval_set = model_view(run.model, eval_raw);
        const Evaluation ev = evaluate_model(run.ensemble, run.model, eval_set, agg, cells[i].seed);
        const auto values = metric_values(ev.report, run.ensemble.param_count(), run.ensemble.mac_count(1));
        std::string lines;
        for (std::size_t m = 0; m < columns.size(); ++m) {
          lines += cells[i].id;
          for (const auto& v : cells[i].values) lines += "," + v;
          lines += fmt::format(",{},{},{:.10g}\n", cells[i].seed, columns[m], values[m]);
        }
        std::lock_guard lock(mu);
        std::ofstream(csv_path, std::ios::binary | std::ios::app) << lines;
        ++summary.trained;
        spdlog::info("sweep cell {} done", cells[i].id);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = pending.size();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(opt.common.jobs, pending.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  std::map<std::pair<std::string, std::string>, Row> latest;
  for (auto& r : read_rows(csv_path, header, axes.size())) latest[{r.cell, r.metric}] = std::move(r);
  std::vector<Row> rows;
  for (auto& [key, r] : latest) rows.push_back(std::move(r));
  for (const auto& metric : columns) write_chart(out / fmt::format("sweep_{}.svg", file_stem_of(metric)), metric, axes, rows);
  write_json(out / "manifest.json", {{"command", "sweep"},
                                     {"generator_version", kGeneratorVersion},
                                     {"base_config", parse_config(base).to_json()},
                                     {"grid", opt.grid},
                                     {"seeds", seeds},
                                     {"cells", summary.cells}});
  return summary;
}

}  // namespace hmix::cli
