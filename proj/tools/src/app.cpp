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

#include <cstdlib>
#include <iostream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "hmix/error.hpp"
#include "hmix_cli/commands.hpp"

namespace hmix::cli {
namespace {

void configure_logging() {
  static bool done = false;
  if (!done) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("hmix"));
    spdlog::set_pattern("[%l] %v");
    done = true;
  }
  const char* env = std::getenv("HMIX_LOG");
  const std::string level = env == nullptr ? "info" : env;
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("HMIX_LOG='{}' is not one of error, warn, info, debug; using info", level);
  }
}

void add_common(CLI::App* cmd, CommonOptions& c, std::uint64_t& seed) {
  cmd->add_option("--seed", seed, "Random seed");
  cmd->add_option("--out", c.out, "Output file or directory");
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--jobs", c.jobs, "Parallel workers")->check(CLI::PositiveNumber);
  cmd->add_flag("--force", c.force, "Overwrite existing outputs");
}

/// Flags that map onto config keys; only flags actually given become overrides.
struct ConfigFlags {
  std::vector<std::pair<std::string, std::string>> bound;  // (flag, config key)
  std::vector<std::string> values;
  std::vector<std::string> sets;

  void add(CLI::App* cmd) {
    bound = {{"--data", "data.path"},        {"--val-data", "data.val_path"},   {"--data-kind", "data.kind"},
             {"--model", "model.kind"},      {"--loss", "loss.variant"},        {"--gamma", "loss.gamma"},
             {"--epsilon", "loss.epsilon"},  {"--metric", "loss.metric"},       {"--meta-stats", "loss.meta_stats"},
             {"--kstar", "model.kstar"},     {"--kprime", "model.kprime"},      {"--ensemble", "ensemble.style"},
             {"--members", "ensemble.members"}, {"--alpha", "ensemble.alpha"}, {"--epochs", "optim.epochs"},
             {"--batch-size", "optim.batch_size"}, {"--lr", "optim.lr"}};
    values.resize(bound.size());
    for (std::size_t i = 0; i < bound.size(); ++i) {
      cmd->add_option(bound[i].first, values[i], fmt::format("Sets {}", bound[i].second));
    }
    cmd->add_option("--set", sets, "Any config key as key=value (repeatable)");
  }

  json overrides(CLI::App* cmd) const {
    json j = json::object();
    for (std::size_t i = 0; i < bound.size(); ++i) {
      if (cmd->count(bound[i].first) > 0) set_path(j, bound[i].second, values[i]);
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(fmt::format("--set '{}' must look like key=value", s));
      set_path(j, resolve_key(s.substr(0, eq)), s.substr(eq + 1));
    }
    return j;
  }
};

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError(fmt::format("bad seed '{}' in --seeds", item));
    }
  }
  return out;
}

}  // namespace

int run(int argc, const char* const* argv) {
  configure_logging();
  CLI::App app{"hmix: hierarchical mixture forecasting toolkit"};
  app.require_subcommand(1);

  GenDataOptions gen;
  TrainOptions tr;
  EvalOptions ev;
  SweepOptions sw;
  PlotOptions pl;
  std::uint64_t seed_gen = 0, seed_tr = 0, seed_ev = 0, seed_sw = 0, seed_pl = 0;
  ConfigFlags tr_flags, sw_flags;
  std::string probs, seeds;

  auto* g = app.add_subcommand("gen-data", "Generate a toy or synthetic intersection dataset");
  add_common(g, gen.common, seed_gen);
  g->add_option("kind", gen.kind, "toy or intersection")->required();
  g->add_option("--n", gen.n, "Toy samples");
  g->add_option("--scenes", gen.scenes, "Intersection scenes");
  g->add_option("--probs", probs, "Branch probabilities straight,left,right");
  g->add_option("--t-obs", gen.t_obs, "Observed steps");
  g->add_option("--t-pred", gen.t_pred, "Predicted steps");

  auto* t = app.add_subcommand("train", "Train a model or ensemble");
  add_common(t, tr.common, seed_tr);
  tr_flags.add(t);

  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(e, ev.common, seed_ev);
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Evaluation data (default: the training file)");
  e->add_option("--aggregate", ev.aggregate, "none, topk, rip, kmeans or meta");
  e->add_flag("--dump", ev.dump, "Write per-scene forecasts");

  auto* s = app.add_subcommand("sweep", "Train and evaluate over a hyperparameter grid");
  add_common(s, sw.common, seed_sw);
  sw_flags.add(s);
  s->add_option("--grid", sw.grid, "key=v1,v2,... (one or two)");
  s->add_option("--seeds", seeds, "Comma-separated seeds");
  s->add_option("--eval-data", sw.eval_data, "Evaluation data (default: validation split)");
  s->add_option("--aggregate", sw.aggregate, "none, topk, rip, kmeans or meta");

  auto* p = app.add_subcommand("plot", "Render SVG plots");
  add_common(p, pl.common, seed_pl);
  p->add_option("kind", pl.kind, "toy or traj")->required();
  p->add_option("--checkpoint", pl.checkpoint, "Toy checkpoint");
  p->add_option("--dump", pl.dump, "Forecast dump CSV");
  p->add_option("--samples", pl.samples, "Toy samples per panel");
  p->add_option("--scenes", pl.scenes, "Scenes to draw");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  const auto seed_of = [](CLI::App* cmd, std::uint64_t v) -> std::optional<std::uint64_t> {
    return cmd->count("--seed") > 0 ? std::optional<std::uint64_t>(v) : std::nullopt;
  };
  try {
    if (g->parsed()) {
      gen.common.seed = seed_of(g, seed_gen);
      if (!probs.empty()) {
        std::stringstream in(probs);
        std::string item;
        while (std::getline(in, item, ',')) {
          try {
            gen.probs.push_back(std::stod(item));
          } catch (const std::logic_error&) {
            throw ConfigError(fmt::format("bad probability '{}'", item));
          }
        }
      }
      cmd_gen_data(gen);
    } else if (t->parsed()) {
      tr.common.seed = seed_of(t, seed_tr);
      tr.overrides = tr_flags.overrides(t);
      const TrainedRun run = cmd_train(tr);
      fmt::print("trained {} step(s); resolved width {}; {} parameters\n", run.result.steps,
                 run.ensemble.resolved_width(), run.ensemble.param_count());
    } else if (e->parsed()) {
      ev.common.seed = seed_of(e, seed_ev);
      cmd_eval(ev);
    } else if (s->parsed()) {
      sw.common.seed = seed_of(s, seed_sw);
      sw.overrides = sw_flags.overrides(s);
      if (!seeds.empty()) sw.seeds = parse_seed_list(seeds);
      const SweepSummary sum = cmd_sweep(sw);
      fmt::print("sweep: {} cell(s), {} trained, {} skipped\n", sum.cells, sum.trained, sum.skipped);
    } else if (p->parsed()) {
      pl.common.seed = seed_of(p, seed_pl);
      for (const auto& path : cmd_plot(pl)) fmt::print("{}\n", path.string());
    }
  } catch (const ConfigError& err) {
    spdlog::error("{}", err.what());
    return 1;
  } catch (const ContractError& err) {
    spdlog::error("{}", err.what());
    return 1;
  } catch (const ParseError& err) {
    spdlog::error("{}", err.what());
    return 1;
  } catch (const DimensionError& err) {
    spdlog::error("{}", err.what());
    return 1;
  } catch (const std::exception& err) {
    spdlog::error("{}", err.what());
    return 2;
  }
  return 0;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"hmix"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace hmix::cli
