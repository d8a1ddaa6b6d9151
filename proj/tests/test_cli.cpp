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

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "hmix/error.hpp"
#include "hmix/grouped.hpp"
#include "hmix_cli/commands.hpp"

namespace hmix::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    setenv("HMIX_LOG", "error", 1);
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / fmt::format("hmix_cli_{}_{}", info->name(), ::getpid());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string toy(std::size_t n = 600) {
    const std::string p = path("toy.csv");
    if (!fs::exists(p)) EXPECT_EQ(run({"gen-data", "toy", "--n", std::to_string(n), "--seed", "3", "--out", p}), 0);
    return p;
  }

  fs::path dir_;
};

TEST_F(Cli, GenDataToyWritesRequestedRowsDeterministically) {
  ASSERT_EQ(run({"gen-data", "toy", "--n", "50000", "--seed", "1", "--out", path("a.csv")}), 0);
  ASSERT_EQ(run({"gen-data", "toy", "--n", "50000", "--seed", "1", "--out", path("b.csv")}), 0);
  EXPECT_EQ(count_lines(path("a.csv")), 50001u);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.csv.manifest.json")), slurp(path("b.csv.manifest.json")));
  const json m = read_json(path("a.csv.manifest.json"));
  EXPECT_EQ(m["seed"], 1);
  EXPECT_EQ(m["rows"], 50000);
  EXPECT_EQ(m["generator_version"], kGeneratorVersion);
}

TEST_F(Cli, GenDataRefusesToOverwriteWithoutForce) {
  ASSERT_EQ(run({"gen-data", "toy", "--n", "10", "--seed", "1", "--out", path("a.csv")}), 0);
  const std::string before = slurp(path("a.csv"));
  EXPECT_EQ(run({"gen-data", "toy", "--n", "20", "--seed", "2", "--out", path("a.csv")}), 1);
  EXPECT_EQ(slurp(path("a.csv")), before);
  EXPECT_EQ(run({"gen-data", "toy", "--n", "20", "--seed", "2", "--out", path("a.csv"), "--force"}), 0);
  EXPECT_EQ(count_lines(path("a.csv")), 21u);
}

TEST_F(Cli, IntersectionManifestRecordsProbabilities) {
  ASSERT_EQ(run({"gen-data", "intersection", "--scenes", "50", "--probs", "0.5,0.25,0.25", "--seed", "4", "--out",
                 path("s.csv")}),
            0);
  const json m = read_json(path("s.csv.manifest.json"));
  EXPECT_EQ(m["probs"], json::parse("[0.5,0.25,0.25]"));
  EXPECT_EQ(m["scenes"], 50);
  const auto counts = m["branch_counts"].get<std::vector<int>>();
  EXPECT_EQ(counts[0] + counts[1] + counts[2], 50);
  EXPECT_EQ(run({"gen-data", "intersection", "--probs", "0.5,0.5", "--out", path("t.csv")}), 1);
  EXPECT_EQ(run({"gen-data", "spiral", "--out", path("u.csv")}), 1);
}

TEST_F(Cli, TrainHwtaRunsToCompletion) {
  const auto data = toy();
  const auto out = path("run");
  ASSERT_EQ(run({"train", "--model", "mlp", "--loss", "hwta", "--gamma", "0.6", "--kstar", "2", "--kprime", "5",
                 "--data", data, "--epochs", "2", "--out", out}),
            0);
  EXPECT_EQ(count_lines(out + "/train_log.csv"), 3u);
  EXPECT_TRUE(fs::exists(out + "/checkpoint_final.json"));
  EXPECT_TRUE(fs::exists(out + "/checkpoint_best.json"));
  const json cfg = read_json(out + "/config.json");
  EXPECT_EQ(cfg["loss"]["gamma"], 0.6);
  EXPECT_EQ(cfg["model"]["kprime"], 5);
  EXPECT_EQ(read_json(out + "/manifest.json")["config_hash"], config_hash(cfg));
  const Checkpoint ck = load_checkpoint(out + "/checkpoint_final.json");
  EXPECT_EQ(ck.hash, config_hash(cfg));
  EXPECT_GT(ck.adam_steps, 0u);
}

TEST_F(Cli, PackedTrainingRecordsResolvedWidth) {
  const auto data = toy();
  ASSERT_EQ(run({"train", "--ensemble", "packed", "--members", "3", "--alpha", "1.5", "--data", data, "--epochs", "1",
                 "--out", path("run")}),
            0);
  const json m = read_json(path("run/manifest.json"));
  EXPECT_EQ(m["resolved_width"], resolve_width({50, 1.5, 3, 1}));
  EXPECT_EQ(m["members"], 3);
}

TEST_F(Cli, InvalidGammaIsRejectedBeforeTraining) {
  const auto data = toy();
  EXPECT_EQ(run({"train", "--gamma", "1.5", "--data", data, "--out", path("run")}), 1);
  EXPECT_FALSE(fs::exists(path("run")));
  TrainOptions opt;
  opt.common.out = path("run");
  opt.overrides = {{"loss", {{"gamma", 1.5}}}, {"data", {{"path", data}}}};
  try {
    cmd_train(opt);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
  }
}

TEST_F(Cli, ConfigAndDatasetMustAgree) {
  const auto data = toy();
  EXPECT_EQ(run({"train", "--model", "transformer", "--data", data, "--out", path("a")}), 1);
  EXPECT_EQ(run({"train", "--data-kind", "scenes", "--data", data, "--out", path("b")}), 1);
  EXPECT_EQ(run({"train", "--data", path("missing.csv"), "--out", path("c")}), 1);
  EXPECT_FALSE(fs::exists(path("a")));
}

TEST_F(Cli, FlagsOverrideConfigFileOverrideDefaults) {
  const auto data = toy();
  write_json(path("cfg.json"), {{"loss", {{"gamma", 0.3}}}, {"optim", {{"epochs", 1}}}, {"data", {{"path", data}}}});
  ASSERT_EQ(run({"train", "--config", path("cfg.json"), "--gamma", "0.2", "--seed", "9", "--out", path("run")}), 0);
  const json cfg = read_json(path("run/config.json"));
  EXPECT_EQ(cfg["loss"]["gamma"], 0.2);
  EXPECT_EQ(cfg["optim"]["epochs"], 1);
  EXPECT_EQ(cfg["seed"], 9);
  EXPECT_EQ(cfg["optim"]["batch_size"], 128);
  EXPECT_EQ(cfg["optim"]["lr"], 7.5e-4);
}

TEST_F(Cli, UnknownConfigKeysAreRejected) {
  write_json(path("cfg.json"), {{"loss", {{"gama", 0.3}}}});
  EXPECT_EQ(run({"train", "--config", path("cfg.json"), "--data", toy(), "--out", path("run")}), 1);
  EXPECT_EQ(run({"train", "--set", "loss.nope=1", "--data", toy(), "--out", path("run")}), 1);
  EXPECT_EQ(run({"train", "--epochs", "many", "--data", toy(), "--out", path("run")}), 1);
}

TEST_F(Cli, RuntimeFailureExitsWithTwo) {
  const auto data = toy();
  std::ofstream(path("blocker")) << "x";
  EXPECT_EQ(run({"train", "--data", data, "--epochs", "1", "--out", path("blocker/run")}), 2);
}

TEST_F(Cli, EvalOfMemorisingModelHasZeroError) {
  {
    std::ofstream out(path("zero.csv"));
    out << "t,x,y\n";
    for (int i = 0; i < 20; ++i) out << fmt::format("{:.3f},0,0\n", i / 20.0);
  }
  RunConfig cfg = parse_config(default_config());
  cfg.data.path = path("zero.csv");
  cfg.model.dropout = 0.0;
  const LoadedData data = load_data(cfg.data);
  const ModelConfig mc = resolve_model(cfg, data.train);
  Ensemble model(mc, cfg.ensemble, cfg.train.seed);
  const auto params = model.parameters();
  for (const auto& p : params) {
    for (double& v : p.tensor->values()) v = 0.0;
  }
  save_checkpoint(path("zero.json"), cfg, mc, 0, params, snapshot_params(params), nullptr);
  EvalOptions opt;
  opt.checkpoint = path("zero.json");
  opt.common.out = path("ev");
  const Evaluation ev = cmd_eval(opt);
  EXPECT_EQ(ev.report.made_1, 0.0);
  EXPECT_EQ(ev.report.mfde_6, 0.0);
  EXPECT_EQ(ev.report.n_scenes, 20u);
}

TEST_F(Cli, EvalAggregationTagsAndDeterminism) {
  const auto data = toy();
  ASSERT_EQ(run({"train", "--data", data, "--epochs", "1", "--members", "2", "--out", path("run")}), 0);
  const auto ck = path("run/checkpoint_best.json");
  ASSERT_EQ(run({"eval", "--checkpoint", ck, "--aggregate", "kmeans", "--out", path("k1")}), 0);
  ASSERT_EQ(run({"eval", "--checkpoint", ck, "--aggregate", "kmeans", "--out", path("k2")}), 0);
  ASSERT_EQ(run({"eval", "--checkpoint", ck, "--aggregate", "topk", "--out", path("t1"), "--dump"}), 0);
  EXPECT_EQ(slurp(path("k1/metrics.csv")), slurp(path("k2/metrics.csv")));
  EXPECT_NE(slurp(path("k1/metrics.csv")).find(",kmeans,"), std::string::npos);
  EXPECT_NE(slurp(path("t1/metrics.csv")).find(",topk,"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("t1/forecasts.csv")));
  EXPECT_EQ(count_lines(path("t1/forecasts.csv")), 1 + 600u * 6);
  const std::string table = slurp(path("t1/metrics.txt"));
  for (const auto& c : metric_columns()) EXPECT_NE(table.find(c), std::string::npos);
  EXPECT_EQ(run({"eval", "--checkpoint", ck, "--aggregate", "median", "--out", path("x")}), 1);
}

TEST_F(Cli, EvalRejectsHashMismatch) {
  const auto data = toy();
  ASSERT_EQ(run({"train", "--data", data, "--epochs", "1", "--out", path("run")}), 0);
  ASSERT_EQ(run({"train", "--data", data, "--epochs", "1", "--gamma", "0.3", "--out", path("other")}), 0);
  const auto ck = path("run/checkpoint_best.json");
  EXPECT_EQ(run({"eval", "--checkpoint", ck, "--config", path("run/config.json"), "--out", path("ok")}), 0);
  EXPECT_EQ(run({"eval", "--checkpoint", ck, "--config", path("other/config.json"), "--out", path("bad")}), 1);

  json j = read_json(ck);
  j["config"]["loss"]["gamma"] = 0.9;
  write_json(path("tampered.json"), j);
  EXPECT_EQ(run({"eval", "--checkpoint", path("tampered.json"), "--out", path("bad2")}), 1);
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

TEST_F(Cli, GammaSweepWritesOneRowPerValueSeedAndMetric) {
  const auto data = toy();
  ASSERT_EQ(run({"sweep", "--grid", "gamma=0.0,0.5,1.0", "--seeds", "1,2", "--data", data, "--epochs", "1", "--jobs",
                 "2", "--out", path("sw")}),
            0);
  const auto rows = csv_rows(path("sw/sweep.csv"));
  EXPECT_EQ(rows.size(), 3u * 2u * metric_columns().size());
  for (const auto& seed : {"1", "2"}) {
    for (const auto& metric : metric_columns()) {
      std::set<std::string> gammas;
      for (const auto& r : rows) {
        if (r[2] == seed && r[3] == metric) gammas.insert(r[1]);
      }
      EXPECT_EQ(gammas.size(), 3u) << seed << " " << metric;
    }
  }
  for (const auto& metric : metric_columns()) {
    const std::string stem = metric == "#Prm" ? "params" : metric == "MAC" ? "mac" : "";
    if (!stem.empty()) EXPECT_TRUE(fs::exists(path("sw/sweep_" + stem + ".svg")));
  }
  EXPECT_TRUE(fs::exists(path("sw/sweep_made_1.svg")));
}

TEST_F(Cli, AlphaSweepParameterCountsIncrease) {
  const auto data = toy();
  ASSERT_EQ(run({"sweep", "--grid", "alpha=1,2", "--ensemble", "packed", "--members", "4", "--data", data, "--epochs",
                 "1", "--out", path("sw")}),
            0);
  double p1 = 0.0, p2 = 0.0;
  for (const auto& r : csv_rows(path("sw/sweep.csv"))) {
    if (r[3] != "#Prm") continue;
    (r[1] == "1" ? p1 : p2) = std::stod(r[4]);
  }
  EXPECT_GT(p1, 0.0);
  EXPECT_GT(p2, p1);
}

TEST_F(Cli, SweepResumesSkippingCompletedCells) {
  SweepOptions opt;
  opt.common.out = path("sw");
  opt.overrides = {{"data", {{"path", toy()}}}, {"optim", {{"epochs", 1}}}};
  opt.grid = {"gamma=0.0,0.5"};
  opt.seeds = {1};
  const auto first = cmd_sweep(opt);
  EXPECT_EQ(first.trained, 2u);
  const std::string before = slurp(path("sw/sweep.csv"));
  const auto again = cmd_sweep(opt);
  EXPECT_EQ(again.skipped, 2u);
  EXPECT_EQ(again.trained, 0u);
  EXPECT_EQ(slurp(path("sw/sweep.csv")), before);
  opt.grid = {"gamma=0.0,0.5,1.0"};
  const auto extended = cmd_sweep(opt);
  EXPECT_EQ(extended.skipped, 2u);
  EXPECT_EQ(extended.trained, 1u);
  EXPECT_EQ(slurp(path("sw/sweep.csv")).rfind(before, 0), 0u);
  opt.grid = {"alpha=1,2"};
  EXPECT_THROW(cmd_sweep(opt), ConfigError);
}

TEST_F(Cli, EmptyGridIsAnError) {
  EXPECT_EQ(run({"sweep", "--data", toy(), "--out", path("sw")}), 1);
  EXPECT_EQ(run({"sweep", "--grid", "gamma=", "--data", toy(), "--out", path("sw2")}), 1);
}

TEST_F(Cli, ToyPlotHasThreePanelsColouredByMetaMode) {
  ASSERT_EQ(run({"train", "--data", toy(), "--kstar", "2", "--kprime", "3", "--epochs", "1", "--out", path("run")}), 0);
  const auto ck = path("run/checkpoint_best.json");
  ASSERT_EQ(run({"plot", "toy", "--checkpoint", ck, "--out", path("p1")}), 0);
  ASSERT_EQ(run({"plot", "toy", "--checkpoint", ck, "--out", path("p2")}), 0);
  const std::string svg = slurp(path("p1/toy_modes.svg"));
  EXPECT_EQ(svg, slurp(path("p2/toy_modes.svg")));
  EXPECT_EQ(count_of(svg, "class=\"panel\""), 3u);
  std::set<std::string> colours;
  std::stringstream in(svg);
  for (std::string line; std::getline(in, line);) {
    if (line.find("<circle") == std::string::npos || line.find("stroke=\"#000000\"") == std::string::npos) continue;
    const auto at = line.find("fill=\"") + 6;
    colours.insert(line.substr(at, line.find('"', at) - at));
  }
  EXPECT_EQ(colours.size(), 2u);
}

TEST_F(Cli, TrajectoryPlotDrawsMetaModesSolidAndSubModesDashed) {
  ASSERT_EQ(run({"gen-data", "intersection", "--scenes", "40", "--seed", "2", "--out", path("s.csv")}), 0);
  ASSERT_EQ(run({"train", "--data", path("s.csv"), "--data-kind", "scenes", "--model", "transformer", "--set",
                 "model.base_dim=16", "--epochs", "1", "--batch-size", "16", "--out", path("run")}),
            0);
  ASSERT_EQ(run({"eval", "--checkpoint", path("run/checkpoint_best.json"), "--dump", "--out", path("ev")}), 0);
  ASSERT_EQ(run({"plot", "traj", "--dump", path("ev/forecasts.csv"), "--scenes", "2", "--out", path("pl")}), 0);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path("pl"))) files.push_back(e.path());
  ASSERT_EQ(files.size(), 2u);
  const std::string svg = slurp(files.front());
  EXPECT_EQ(count_of(svg, "stroke-dasharray"), 6u);
  EXPECT_EQ(count_of(svg, "<polyline"), 8u);
}

TEST_F(Cli, PlotWithoutDumpFails) {
  EXPECT_EQ(run({"plot", "traj", "--dump", path("missing.csv"), "--out", path("pl")}), 1);
  EXPECT_EQ(run({"plot", "traj", "--out", path("pl2")}), 1);
}

TEST(CliConfig, HashIsStableAndSensitive) {
  const json a = parse_config(default_config()).to_json();
  json b = a;
  b["loss"]["gamma"] = 0.61;
  EXPECT_EQ(config_hash(a), config_hash(parse_config(a).to_json()));
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(CliConfig, SweepKeysResolveAliases) {
  EXPECT_EQ(resolve_key("gamma"), "loss.gamma");
  EXPECT_EQ(resolve_key("optim.decay"), "optim.decay");
  EXPECT_THROW(resolve_key("loss.colour"), ConfigError);
  json j = json::object();
  set_path(j, "ensemble.members", "4");
  set_path(j, "loss.use_kl", "false");
  EXPECT_EQ(j["ensemble"]["members"], 4);
  EXPECT_EQ(j["loss"]["use_kl"], false);
  EXPECT_THROW(set_path(j, "ensemble.members", "4.5"), ConfigError);
}

}  // namespace
}  // namespace hmix::cli
