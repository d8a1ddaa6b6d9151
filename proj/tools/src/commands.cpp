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

#include "hmix_cli/commands.hpp"

#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hmix/error.hpp"

namespace hmix::cli {
namespace {

bool has_rows(const Dataset& d) { return d.targets.rank() == 2 && d.targets.dim(0) > 0; }

void append_log_row(const std::filesystem::path& path, const EpochLog& log) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(fmt::format("cannot append to '{}'", path.string()));
  if (fresh) out << "epoch,lr,loss,meta_term,mwta_term,kl_meta_term,kl_mwta_term,n_ewta,clipped_steps,val_made_1\n";
  out << fmt::format("{},{:.6g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{},{},{:.10g}\n", log.epoch, log.lr,
                     log.loss.total, log.loss.meta_term, log.loss.mwta_term, log.loss.kl_meta_term,
                     log.loss.kl_mwta_term, log.n_ewta, log.clipped_steps, log.val_made_1);
}

std::vector<double> parse_probs(const std::vector<double>& probs) {
  if (probs.size() != 3) throw ConfigError(fmt::format("--probs needs 3 values (straight,left,right), got {}", probs.size()));
  return probs;
}

}  // namespace

json build_config(const CommonOptions& common, const json& overrides) {
  json merged = default_config();
  if (!common.config.empty()) merged = merge_config(merged, read_json(common.config));
  merged = merge_config(merged, overrides);
  if (common.seed) merged["seed"] = *common.seed;
  return merged;
}

void claim_output(const std::filesystem::path& path, bool force, bool directory) {
  if (path.empty()) throw ConfigError("--out is required");
  const bool taken = directory ? std::filesystem::exists(path) && !std::filesystem::is_empty(path)
                               : std::filesystem::exists(path);
  if (taken && !force) {
    throw ConfigError(fmt::format("output '{}' already exists; pass --force to overwrite", path.string()));
  }
  if (directory) {
    if (taken) std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  } else if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
}

void cmd_gen_data(const GenDataOptions& opt) {
  const std::uint64_t seed = opt.common.seed.value_or(0);
  const std::filesystem::path out = opt.common.out;
  json manifest = {{"generator_version", kGeneratorVersion}, {"kind", opt.kind}, {"seed", seed}};
  if (opt.kind == "toy") {
    if (opt.n == 0) throw ConfigError("--n must be positive");
    claim_output(out, opt.common.force, false);
    Rng rng(seed);
    const auto samples = toy_dataset(opt.n, rng);
    write_toy_csv(out, samples);
    manifest["rows"] = samples.size();
  } else if (opt.kind == "intersection") {
    SynthConfig cfg;
    if (!opt.probs.empty()) {
      const auto p = parse_probs(opt.probs);
      cfg.branch_probs = {p[0], p[1], p[2]};
    }
    cfg.t_obs = opt.t_obs;
    cfg.t_pred = opt.t_pred;
    cfg.validate();
    if (opt.scenes == 0) throw ConfigError("--scenes must be positive");
    claim_output(out, opt.common.force, false);
    Rng rng(seed);
    const auto scenes = synth_intersection(opt.scenes, rng, cfg);
    write_csv_scenes(out, scenes);
    std::array<std::size_t, 3> branches{};
    for (const auto& s : scenes) {
      if (s.branch >= 0) ++branches[static_cast<std::size_t>(s.branch)];
    }
    manifest["scenes"] = scenes.size();
    manifest["probs"] = cfg.branch_probs;
    manifest["t_obs"] = cfg.t_obs;
    manifest["t_pred"] = cfg.t_pred;
    manifest["branch_counts"] = branches;
  } else {
    throw ConfigError(fmt::format("unknown dataset kind '{}' (toy, intersection)", opt.kind));
  }
  write_json(out.string() + ".manifest.json", manifest);
  spdlog::info("wrote {}", out.string());
}

TrainedRun run_training(const RunConfig& cfg, const LoadedData& data, const std::filesystem::path& out_dir,
                        bool write_checkpoints) {
  const ModelConfig mc = resolve_model(cfg, data.train);
  Ensemble ensemble(mc, cfg.ensemble, cfg.train.seed);
  spdlog::info("resolved width {} ({} {} member(s), alpha {}), {} parameters", ensemble.resolved_width(),
               ensemble.members(), to_string(cfg.ensemble.style), cfg.ensemble.alpha, ensemble.param_count());
  const Dataset train_set = model_view(mc, data.train);
  const Dataset val_set = model_view(mc, data.val);
  const auto params = ensemble.parameters();
  Adam optimizer(params, cfg.train.optim.adam);
  const auto on_epoch = [&](const EpochLog& log) {
    spdlog::debug("epoch {} loss {:.6f} val mADE_1 {:.6f}", log.epoch, log.loss.total, log.val_made_1);
    if (!out_dir.empty()) append_log_row(out_dir / "train_log.csv", log);
  };
  TrainResult result = train(ensemble, train_set, has_rows(val_set) ? &val_set : nullptr, cfg.train, on_epoch,
                             &optimizer);
  if (write_checkpoints) {
    save_checkpoint(out_dir / "checkpoint_final.json", cfg, mc, cfg.train.optim.epochs, params,
                    snapshot_params(params), &optimizer);
    save_checkpoint(out_dir / "checkpoint_best.json", cfg, mc, result.best_epoch, params, result.best_params,
                    nullptr);
  }
  restore_params(params, result.best_params);
  return {cfg, mc, std::move(ensemble), std::move(result)};
}

TrainedRun cmd_train(const TrainOptions& opt) {
  const RunConfig cfg = parse_config(build_config(opt.common, opt.overrides));
  cfg.validate();
  for (const auto& w : cfg.train.loss.validate(cfg.model.head.modes())) spdlog::warn("{}", w);
  const LoadedData data = load_data(cfg.data);
  resolve_model(cfg, data.train);

  const std::filesystem::path out = opt.common.out;
  claim_output(out, opt.common.force, true);
  const json canonical = cfg.to_json();
  write_json(out / "config.json", canonical);
  TrainedRun run = run_training(cfg, data, out, true);
  write_json(out / "manifest.json",
             {{"command", "train"},
              {"generator_version", kGeneratorVersion},
              {"config_hash", config_hash(canonical)},
              {"resolved_width", run.ensemble.resolved_width()},
              {"members", run.ensemble.members()},
              {"param_count", run.ensemble.param_count()},
              {"mac_per_sample", run.ensemble.mac_count(1)},
              {"train_rows", data.train.size()},
              {"val_rows", has_rows(data.val) ? data.val.size() : 0},
              {"steps", run.result.steps},
              {"best_epoch", run.result.best_epoch}});
  return run;
}

}  // namespace hmix::cli
