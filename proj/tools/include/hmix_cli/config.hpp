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

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "hmix/data.hpp"
#include "hmix/losses.hpp"
#include "hmix/models.hpp"
#include "hmix/train.hpp"

namespace hmix::cli {

using nlohmann::json;

struct DataSpec {
  /// "toy" (t,x,y CSV) or "scenes" (trajectory CSV).
  std::string kind = "toy";
  std::string path;
  std::string val_path;
  /// Trailing fraction of the training file held out for validation when no val_path is given.
  double val_fraction = 0.1;
  std::size_t t_obs = 8;
  std::size_t neighbors = 5;
};

struct RunConfig {
  DataSpec data;
  ModelConfig model;
  EnsembleSpec ensemble;
  TrainConfig train;

  /// Canonical JSON form; what gets hashed and written next to outputs.
  json to_json() const;
  void validate() const;
};

/// Every accepted key with its default value.
json default_config();

/// Applies `patch` over `base` (RFC 7386) after checking that every key it sets exists in the defaults.
json merge_config(json base, const json& patch);

RunConfig parse_config(const json& merged);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

/// 64-bit FNV-1a over the compact dump of `j`.
std::uint64_t fnv1a(const std::string& bytes);
std::string config_hash(const json& canonical);

/// Dotted config path for a sweep or override key, accepting short aliases such as "gamma".
std::string resolve_key(const std::string& key);
/// Sets the value at a dotted path, converting `text` to the type of the default at that path.
void set_path(json& j, const std::string& dotted, const std::string& text);

}  // namespace hmix::cli
