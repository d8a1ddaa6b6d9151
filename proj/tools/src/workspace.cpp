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

#include "hmix_cli/workspace.hpp"

#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix::cli {
namespace {

std::string first_line(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open data file '{}'", path.string()));
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

Dataset read_rows(const DataSpec& spec, const std::filesystem::path& path, std::vector<std::string>* ids) {
  if (path.empty()) throw ConfigError("no data file given (set data.path or pass --data)");
  const bool toy_file = first_line(path) == "t,x,y";
  if (spec.kind == "toy" && !toy_file) {
    throw ConfigError(fmt::format("'{}' is not a toy dataset but data.kind is 'toy'", path.string()));
  }
  if (spec.kind == "scenes" && toy_file) {
    throw ConfigError(fmt::format("'{}' is a toy dataset but data.kind is 'scenes'", path.string()));
  }
  if (toy_file) {
    const auto samples = read_toy_csv(path);
    if (samples.empty()) throw ConfigError(fmt::format("'{}' has no rows", path.string()));
    if (ids != nullptr) {
      for (std::size_t i = 0; i < samples.size(); ++i) ids->push_back(std::to_string(i));
    }
    return toy_to_dataset(samples);
  }
  const auto loaded = load_csv_scenes(path, spec.t_obs);
  const auto scenes = prepare_scenes(loaded.scenes);
  if (scenes.empty()) throw ConfigError(fmt::format("'{}' has no usable scenes", path.string()));
  if (ids != nullptr) {
    for (const auto& s : scenes) ids->push_back(s.scene_id);
  }
  return scenes_to_dataset(scenes, spec.neighbors);
}

Dataset slice(const Dataset& d, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return d.rows(idx);
}

}  // namespace

LoadedData load_data(const DataSpec& spec, std::size_t val_rows_override) {
  LoadedData out;
  std::vector<std::string> ids;
  const Dataset all = read_rows(spec, spec.path, &ids);
  if (!spec.val_path.empty()) {
    out.train = all;
    out.train_ids = ids;
    out.val = read_rows(spec, spec.val_path, &out.val_ids);
    return out;
  }
  std::size_t n_val = val_rows_override != static_cast<std::size_t>(-1)
                          ? val_rows_override
                          : static_cast<std::size_t>(spec.val_fraction * static_cast<double>(all.size()));
  if (n_val >= all.size()) throw ConfigError("validation split leaves no training rows");
  const std::size_t n_train = all.size() - n_val;
  out.train = slice(all, 0, n_train);
  out.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  if (n_val > 0) {
    out.val = slice(all, n_train, all.size());
    out.val_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  }
  return out;
}

Dataset load_eval_data(const DataSpec& spec, const std::filesystem::path& path, std::vector<std::string>* ids) {
  return read_rows(spec, path, ids);
}

ModelConfig resolve_model(const RunConfig& cfg, const Dataset& data) {
  ModelConfig m = cfg.model;
  m.head.t_pred = data.t_pred();
  if (data.inputs.rank() == 2) {
    if (m.kind == ModelKind::Transformer) throw ConfigError("the transformer needs per-step scene inputs");
    m.input_dim = data.inputs.dim(1);
    m.t_obs = 1;
  } else if (m.kind == ModelKind::Transformer) {
    m.t_obs = data.inputs.dim(1);
    m.input_dim = data.inputs.dim(2);
  } else {
    m.t_obs = 1;
    m.input_dim = data.inputs.dim(1) * data.inputs.dim(2);
  }
  m.validate();
  return m;
}

Tensor model_input(const ModelConfig& model, const Tensor& inputs) {
  if (model.kind == ModelKind::MLP && inputs.rank() == 3) {
    return inputs.reshaped({inputs.dim(0), inputs.dim(1) * inputs.dim(2)});
  }
  return inputs;
}

Dataset model_view(const ModelConfig& model, const Dataset& data) {
  if (data.inputs.rank() == 0) return data;
  return {model_input(model, data.inputs), data.targets};
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, const ModelConfig& model,
                     std::size_t epoch, const std::vector<ParamRef>& params, const std::vector<Tensor>& values,
                     Adam* optimizer) {
  const json canonical = cfg.to_json();
  json j;
  j["format"] = "hmix-checkpoint";
  j["version"] = 1;
  j["config"] = canonical;
  j["config_hash"] = config_hash(canonical);
  j["resolved"] = {{"input_dim", model.input_dim}, {"t_obs", model.t_obs}, {"t_pred", model.head.t_pred}};
  j["epoch"] = epoch;
  json ps = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ps.push_back({{"name", params[i].name},
                  {"group", params[i].group},
                  {"shape", values[i].shape()},
                  {"values", values[i].data()}});
  }
  j["params"] = std::move(ps);
  if (optimizer != nullptr) {
    j["adam"] = {{"steps", optimizer->steps()},
                 {"m", optimizer->first_moments()},
                 {"v", optimizer->second_moments()}};
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write checkpoint '{}'", path.string()));
  out << j.dump() << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const json j = read_json(path);
  if (j.value("format", "") != "hmix-checkpoint") {
    throw ConfigError(fmt::format("'{}' is not an hmix checkpoint", path.string()));
  }
  Checkpoint ck;
  ck.config = j.at("config");
  ck.hash = j.at("config_hash").get<std::string>();
  const RunConfig cfg = parse_config(ck.config);
  if (config_hash(cfg.to_json()) != ck.hash) {
    throw ConfigError(fmt::format("checkpoint '{}': config hash {} does not match its config ({})", path.string(),
                                  ck.hash, config_hash(cfg.to_json())));
  }
  ck.model = cfg.model;
  ck.model.input_dim = j.at("resolved").at("input_dim").get<std::size_t>();
  ck.model.t_obs = j.at("resolved").at("t_obs").get<std::size_t>();
  ck.model.head.t_pred = j.at("resolved").at("t_pred").get<std::size_t>();
  ck.epoch = j.at("epoch").get<std::size_t>();
  for (const auto& p : j.at("params")) {
    ck.names.push_back(p.at("name").get<std::string>());
    ck.values.emplace_back(p.at("shape").get<Shape>(), p.at("values").get<std::vector<double>>());
  }
  if (j.contains("adam")) {
    ck.adam_steps = j["adam"].at("steps").get<std::size_t>();
    ck.adam_m = j["adam"].at("m").get<std::vector<std::vector<double>>>();
    ck.adam_v = j["adam"].at("v").get<std::vector<std::vector<double>>>();
  }
  return ck;
}

Ensemble restore_ensemble(const Checkpoint& ck) {
  const RunConfig cfg = parse_config(ck.config);
  Ensemble model(ck.model, cfg.ensemble, cfg.train.seed);
  const auto params = model.parameters();
  if (params.size() != ck.values.size()) {
    throw ConfigError(fmt::format("checkpoint has {} tensors, model expects {}", ck.values.size(), params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != ck.names[i] || params[i].tensor->shape() != ck.values[i].shape()) {
      throw ConfigError(fmt::format("checkpoint tensor '{}' does not match model tensor '{}'", ck.names[i],
                                    params[i].name));
    }
  }
  restore_params(params, ck.values);
  return model;
}

}  // namespace hmix::cli
