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

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hmix/error.hpp"
#include "hmix_cli/commands.hpp"

namespace hmix::cli {

std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::None: return "none";
    case Aggregation::TopK: return "topk";
    case Aggregation::RIP: return "rip";
    case Aggregation::KMeans: return "kmeans";
    case Aggregation::Meta: return "meta";
  }
  return "none";
}

Aggregation parse_aggregation(const std::string& s) {
  for (Aggregation a : {Aggregation::None, Aggregation::TopK, Aggregation::RIP, Aggregation::KMeans, Aggregation::Meta}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError(fmt::format("unknown aggregation '{}' (none, topk, rip, kmeans, meta)", s));
}

Evaluation evaluate_model(Ensemble& model, const ModelConfig& mc, const Dataset& data, Aggregation agg,
                          std::uint64_t seed) {
  const auto per_member = predict(model, data);
  const std::size_t members = per_member.size();
  const std::size_t modes = mc.head.modes();
  const std::size_t k = std::min<std::size_t>(6, members * modes);
  const MetaStats stats = MetaStats::Verbatim;
  Rng rng(seed);

  Evaluation ev;
  ev.provenance = "pooled";
  std::vector<Tensor> targets;
  for (std::size_t i = 0; i < data.size(); ++i) {
    targets.push_back(data.target(i));
    std::vector<MixtureForecast> row;
    for (const auto& m : per_member) row.push_back(m[i]);
    if (agg == Aggregation::None) {
      MixtureForecast pooled;
      for (const auto& f : row) {
        for (std::size_t j = 0; j < f.size(); ++j) {
          pooled.components.push_back(f.components[j]);
          pooled.weights.push_back(f.weights[j] / static_cast<double>(members));
        }
      }
      ev.forecasts.push_back(std::move(pooled));
      std::vector<int> meta;
      for (std::size_t m = 0; m < members; ++m) {
        for (std::size_t j = 0; j < modes; ++j) meta.push_back(static_cast<int>(j / mc.head.kprime));
      }
      ev.meta_index.push_back(std::move(meta));
      continue;
    }
    AggregatedForecast out;
    switch (agg) {
      case Aggregation::TopK: out = topk_aggregate(row, k); break;
      case Aggregation::RIP: out = rip_aggregate(row, k); break;
      case Aggregation::KMeans: out = kmeans_aggregate(row, rng, k); break;
      case Aggregation::Meta: {
        std::vector<HierarchicalMixture> hs;
        for (const auto& f : row) hs.emplace_back(mc.head.kstar, mc.head.kprime, f.components, f.weights);
        out = meta_compress(hs, k, stats);
        break;
      }
      case Aggregation::None: break;
    }
    ev.provenance = hmix::to_string(out.provenance);
    ev.meta_index.emplace_back(out.forecast.size(), -1);
    ev.forecasts.push_back(std::move(out.forecast));
  }
  ev.report = evaluate(ev.forecasts, targets);
  return ev;
}

void write_forecast_dump(const std::filesystem::path& path, const std::vector<std::string>& ids,
                         const Evaluation& ev) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << "scene_id,meta_index,mode_index,weight,t,mu_x,mu_y,b_x,b_y\n";
  for (std::size_t i = 0; i < ev.forecasts.size(); ++i) {
    const auto& f = ev.forecasts[i];
    for (std::size_t k = 0; k < f.size(); ++k) {
      const auto& c = f.components[k];
      for (std::size_t t = 0; t < c.mu.dim(0); ++t) {
        out << fmt::format("{},{},{},{:.12g},{},{:.12g},{:.12g},{:.12g},{:.12g}\n", ids[i], ev.meta_index[i][k], k,
                           f.weights[k], t, c.mu.at(t, 0), c.mu.at(t, 1), c.b.at(t, 0), c.b.at(t, 1));
      }
    }
  }
}

Evaluation cmd_eval(const EvalOptions& opt) {
  if (opt.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const Aggregation agg = parse_aggregation(opt.aggregate);
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  if (!opt.common.config.empty()) {
    const std::string expected = config_hash(parse_config(merge_config(default_config(), read_json(opt.common.config))).to_json());
    if (expected != ck.hash) {
      throw ConfigError(fmt::format("config hash mismatch: '{}' hashes to {}, checkpoint was trained with {}",
                                    opt.common.config, expected, ck.hash));
    }
  }
  const RunConfig cfg = parse_config(ck.config);
  const std::string data_path = opt.data.empty() ? cfg.data.path : opt.data;
  std::vector<std::string> ids;
  const Dataset raw = load_eval_data(cfg.data, data_path, &ids);
  const Dataset data = model_view(ck.model, raw);
  const std::size_t width = data.inputs.rank() == 2 ? data.inputs.dim(1) : data.inputs.dim(2);
  if (width != ck.model.input_dim || data.t_pred() != ck.model.head.t_pred) {
    throw ConfigError(fmt::format("'{}' has {} features and {} future steps, the checkpoint expects {} and {}",
                                  data_path, width, data.t_pred(), ck.model.input_dim, ck.model.head.t_pred));
  }

  const std::filesystem::path out = opt.common.out;
  claim_output(out, opt.common.force, true);
  Ensemble model = restore_ensemble(ck);
  const Evaluation ev = evaluate_model(model, ck.model, data, agg, opt.common.seed.value_or(cfg.train.seed));

  const std::string label = std::filesystem::path(opt.checkpoint).stem().string();
  const auto& r = ev.report;
  {
    std::ofstream csv(out / "metrics.csv", std::ios::binary | std::ios::trunc);
    csv << "label,provenance,n_scenes";
    for (const auto& c : metric_columns()) csv << "," << c;
    csv << "\n";
    csv << fmt::format("{},{},{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{},{}\n", label, ev.provenance,
                       r.n_scenes, r.made_1, r.made_6, r.mfde_1, r.mfde_6, r.nll_3, r.nll_6, model.param_count(),
                       model.mac_count(1));
  }
  const std::string table = format_metric_table({label}, {r}, {model.param_count()}, {model.mac_count(1)});
  {
    std::ofstream txt(out / "metrics.txt", std::ios::binary | std::ios::trunc);
    txt << table;
  }
  if (opt.dump) write_forecast_dump(out / "forecasts.csv", ids, ev);
  write_json(out / "manifest.json", {{"command", "eval"},
                                     {"generator_version", kGeneratorVersion},
                                     {"checkpoint", opt.checkpoint},
                                     {"config_hash", ck.hash},
                                     {"data", data_path},
                                     {"aggregate", to_string(agg)},
                                     {"provenance", ev.provenance}});
  fmt::print("{}", table);
  return ev;
}

}  // namespace hmix::cli
