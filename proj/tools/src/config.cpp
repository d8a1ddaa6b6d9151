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

#include "hmix_cli/config.hpp"

#include <charconv>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "hmix/error.hpp"

namespace hmix::cli {
namespace {

std::string to_string(MetaStats m) { return m == MetaStats::Verbatim ? "verbatim" : "normalized"; }

MetaStats parse_meta_stats(const std::string& s) {
  if (s == "verbatim") return MetaStats::Verbatim;
  if (s == "normalized") return MetaStats::Normalized;
  throw ConfigError(fmt::format("unknown meta_stats '{}' (verbatim, normalized)", s));
}

std::string to_string(KlTarget k) { return k == KlTarget::Posterior ? "posterior" : "prior"; }

KlTarget parse_kl_target(const std::string& s) {
  if (s == "posterior") return KlTarget::Posterior;
  if (s == "prior") return KlTarget::Prior;
  throw ConfigError(fmt::format("unknown kl_target '{}' (posterior, prior)", s));
}

void check_keys(const json& patch, const json& reference, const std::string& where) {
  if (!patch.is_object()) return;
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!reference.contains(key)) throw ConfigError(fmt::format("unknown config key '{}'", path));
    if (reference[key].is_object()) {
      if (!value.is_object()) throw ConfigError(fmt::format("config key '{}' must be an object", path));
      check_keys(value, reference[key], path);
    }
  }
}

template <class T>
T field(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("config key '{}.{}' has the wrong type", section, key));
  }
}

json::json_pointer pointer_of(const std::string& dotted) {
  std::string p;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    const std::size_t dot = dotted.find('.', start);
    p += "/" + dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return json::json_pointer(p);
}

}  // namespace

json default_config() {
  const LossConfig loss;
  const OptimConfig optim;
  const ModelConfig model;
  return {
      {"data", {{"kind", "toy"}, {"path", ""}, {"val_path", ""}, {"val_fraction", 0.1}, {"t_obs", 8}, {"neighbors", 5}}},
      {"model",
       {{"kind", "mlp"},
        {"hidden", model.hidden},
        {"hidden_layers", model.hidden_layers},
        {"base_dim", model.base_dim},
        {"heads", model.heads},
        {"blocks", model.blocks},
        {"ffn_expansion", model.ffn_expansion},
        {"dropout", model.dropout},
        {"kstar", 2},
        {"kprime", 3}}},
      {"ensemble", {{"style", "deep"}, {"members", 1}, {"alpha", 1.0}}},
      {"loss",
       {{"variant", to_string(loss.variant)},
        {"gamma", loss.gamma},
        {"epsilon", loss.epsilon},
        {"ewta_top_n", loss.ewta_top_n},
        {"ewta_milestones", json::array()},
        {"metric", to_string(loss.metric)},
        {"meta_stats", to_string(loss.meta_stats)},
        {"detach_meta_weight", loss.detach_meta_weight},
        {"use_kl", loss.use_kl},
        {"kl_target", to_string(loss.kl_target)}}},
      {"optim",
       {{"lr", optim.adam.lr},
        {"beta1", optim.adam.beta1},
        {"beta2", optim.adam.beta2},
        {"eps", optim.adam.eps},
        {"batch_size", optim.batch_size},
        {"epochs", optim.epochs},
        {"milestones", json::array()},
        {"decay", optim.decay},
        {"clip_norm", optim.clip_norm}}},
      {"seed", 0},
  };
}

json merge_config(json base, const json& patch) {
  if (!patch.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(patch, default_config(), "");
  base.merge_patch(patch);
  return base;
}

RunConfig parse_config(const json& merged) {
  check_keys(merged, default_config(), "");
  const json j = merge_config(default_config(), merged);
  RunConfig c;
  c.data.kind = field<std::string>(j, "data", "kind");
  c.data.path = field<std::string>(j, "data", "path");
  c.data.val_path = field<std::string>(j, "data", "val_path");
  c.data.val_fraction = field<double>(j, "data", "val_fraction");
  c.data.t_obs = field<std::size_t>(j, "data", "t_obs");
  c.data.neighbors = field<std::size_t>(j, "data", "neighbors");

  c.model.kind = parse_model_kind(field<std::string>(j, "model", "kind"));
  c.model.hidden = field<std::size_t>(j, "model", "hidden");
  c.model.hidden_layers = field<std::size_t>(j, "model", "hidden_layers");
  c.model.base_dim = field<std::size_t>(j, "model", "base_dim");
  c.model.heads = field<std::size_t>(j, "model", "heads");
  c.model.blocks = field<std::size_t>(j, "model", "blocks");
  c.model.ffn_expansion = field<std::size_t>(j, "model", "ffn_expansion");
  c.model.dropout = field<double>(j, "model", "dropout");
  c.model.head.kstar = field<std::size_t>(j, "model", "kstar");
  c.model.head.kprime = field<std::size_t>(j, "model", "kprime");

  c.ensemble.style = parse_ensemble_style(field<std::string>(j, "ensemble", "style"));
  c.ensemble.members = field<std::size_t>(j, "ensemble", "members");
  c.ensemble.alpha = field<double>(j, "ensemble", "alpha");

  LossConfig& l = c.train.loss;
  l.variant = parse_loss_variant(field<std::string>(j, "loss", "variant"));
  l.gamma = field<double>(j, "loss", "gamma");
  l.epsilon = field<double>(j, "loss", "epsilon");
  l.ewta_top_n = field<std::size_t>(j, "loss", "ewta_top_n");
  l.ewta_milestones = field<std::vector<std::size_t>>(j, "loss", "ewta_milestones");
  l.metric = parse_error_metric(field<std::string>(j, "loss", "metric"));
  l.meta_stats = parse_meta_stats(field<std::string>(j, "loss", "meta_stats"));
  l.detach_meta_weight = field<bool>(j, "loss", "detach_meta_weight");
  l.use_kl = field<bool>(j, "loss", "use_kl");
  l.kl_target = parse_kl_target(field<std::string>(j, "loss", "kl_target"));

  OptimConfig& o = c.train.optim;
  o.adam.lr = field<double>(j, "optim", "lr");
  o.adam.beta1 = field<double>(j, "optim", "beta1");
  o.adam.beta2 = field<double>(j, "optim", "beta2");
  o.adam.eps = field<double>(j, "optim", "eps");
  o.batch_size = field<std::size_t>(j, "optim", "batch_size");
  o.epochs = field<std::size_t>(j, "optim", "epochs");
  o.milestones = field<std::vector<std::size_t>>(j, "optim", "milestones");
  o.decay = field<double>(j, "optim", "decay");
  o.clip_norm = field<double>(j, "optim", "clip_norm");
  try {
    c.train.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception&) {
    throw ConfigError("config key 'seed' must be a non-negative integer");
  }
  return c;
}

json RunConfig::to_json() const {
  json j = default_config();
  j["data"] = {{"kind", data.kind},   {"path", data.path},   {"val_path", data.val_path},
               {"val_fraction", data.val_fraction}, {"t_obs", data.t_obs}, {"neighbors", data.neighbors}};
  j["model"] = {{"kind", hmix::to_string(model.kind)},
                {"hidden", model.hidden},
                {"hidden_layers", model.hidden_layers},
                {"base_dim", model.base_dim},
                {"heads", model.heads},
                {"blocks", model.blocks},
                {"ffn_expansion", model.ffn_expansion},
                {"dropout", model.dropout},
                {"kstar", model.head.kstar},
                {"kprime", model.head.kprime}};
  j["ensemble"] = {{"style", hmix::to_string(ensemble.style)}, {"members", ensemble.members}, {"alpha", ensemble.alpha}};
  const LossConfig& l = train.loss;
  j["loss"] = {{"variant", hmix::to_string(l.variant)},
               {"gamma", l.gamma},
               {"epsilon", l.epsilon},
               {"ewta_top_n", l.ewta_top_n},
               {"ewta_milestones", l.ewta_milestones},
               {"metric", hmix::to_string(l.metric)},
               {"meta_stats", to_string(l.meta_stats)},
               {"detach_meta_weight", l.detach_meta_weight},
               {"use_kl", l.use_kl},
               {"kl_target", to_string(l.kl_target)}};
  const OptimConfig& o = train.optim;
  j["optim"] = {{"lr", o.adam.lr},         {"beta1", o.adam.beta1},   {"beta2", o.adam.beta2},
                {"eps", o.adam.eps},       {"batch_size", o.batch_size}, {"epochs", o.epochs},
                {"milestones", o.milestones}, {"decay", o.decay},     {"clip_norm", o.clip_norm}};
  j["seed"] = train.seed;
  return j;
}

void RunConfig::validate() const {
  if (data.kind != "toy" && data.kind != "scenes") {
    throw ConfigError(fmt::format("data.kind must be 'toy' or 'scenes', got '{}'", data.kind));
  }
  if (!(data.val_fraction >= 0.0 && data.val_fraction < 1.0)) {
    throw ConfigError(fmt::format("data.val_fraction must be in [0, 1), got {}", data.val_fraction));
  }
  if (data.kind == "toy" && model.kind == ModelKind::Transformer) {
    throw ConfigError("the toy dataset has no time axis; use model.kind = mlp");
  }
  if (model.head.kstar == 0 || model.head.kprime == 0) throw ConfigError("model.kstar and model.kprime must be >= 1");
  ModelConfig probe = model;
  probe.head.t_pred = 1;
  probe.validate();
  ensemble.validate(probe);
  train.loss.validate(model.head.modes());
  train.optim.validate();
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << j.dump(2) << "\n";
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const json& canonical) { return fmt::format("{:016x}", fnv1a(canonical.dump())); }

std::string resolve_key(const std::string& key) {
  static const std::map<std::string, std::string> aliases = {
      {"gamma", "loss.gamma"},       {"epsilon", "loss.epsilon"},     {"variant", "loss.variant"},
      {"alpha", "ensemble.alpha"},   {"members", "ensemble.members"}, {"style", "ensemble.style"},
      {"kstar", "model.kstar"},      {"kprime", "model.kprime"},      {"hidden", "model.hidden"},
      {"base_dim", "model.base_dim"}, {"lr", "optim.lr"},             {"epochs", "optim.epochs"},
      {"batch_size", "optim.batch_size"}, {"seed", "seed"}};
  const auto it = aliases.find(key);
  const std::string dotted = it == aliases.end() ? key : it->second;
  if (!default_config().contains(pointer_of(dotted))) throw ConfigError(fmt::format("unknown config key '{}'", key));
  return dotted;
}

void set_path(json& j, const std::string& dotted, const std::string& text) {
  const auto ptr = pointer_of(dotted);
  const json defaults = default_config();
  const json& ref = defaults.at(ptr);
  const auto bad = [&] { return ConfigError(fmt::format("bad value '{}' for '{}'", text, dotted)); };
  if (ref.is_string()) {
    j[ptr] = text;
  } else if (ref.is_boolean()) {
    if (text != "true" && text != "false") throw bad();
    j[ptr] = text == "true";
  } else if (ref.is_number_unsigned() || ref.is_number_integer()) {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size()) throw bad();
    j[ptr] = v;
  } else if (ref.is_number_float()) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw bad();
      j[ptr] = v;
    } catch (const std::logic_error&) {
      throw bad();
    }
  } else {
    throw ConfigError(fmt::format("'{}' cannot be set from the command line", dotted));
  }
}

}  // namespace hmix::cli
