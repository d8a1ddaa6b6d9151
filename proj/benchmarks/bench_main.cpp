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

#include <benchmark/benchmark.h>

#include <vector>

#include "hmix/aggregate.hpp"
#include "hmix/grouped.hpp"
#include "hmix/head.hpp"
#include "hmix/losses.hpp"

namespace hmix {
namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.normal();
  return t;
}

// Fixed 256 -> 256 layer; range(0) is the number of groups, 1 being dense.
void BM_GroupedLinearForward(benchmark::State& state) {
  const auto groups = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  GroupedLinear layer(256, 256, groups, true, rng);
  const Tensor x = random_tensor({64, 256}, rng);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(layer.forward(tape, tape.constant(x)).value().data().data());
  }
  state.counters["params"] = static_cast<double>(layer.param_count());
  state.counters["mac"] = static_cast<double>(layer.mac_count(64));
}
BENCHMARK(BM_GroupedLinearForward)->Arg(1)->Arg(2)->Arg(4)->Arg(8);

void BM_GroupedLinearBackward(benchmark::State& state) {
  const auto groups = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  GroupedLinear layer(256, 256, groups, true, rng);
  std::vector<ParamRef> params;
  layer.collect("fc", params);
  for (auto& p : params) p.tensor->set_requires_grad(true);
  const Tensor x = random_tensor({64, 256}, rng);
  for (auto _ : state) {
    Tape tape;
    tape.backward(ops::sum(layer.forward(tape, tape.constant(x))));
    for (auto& p : params) p.tensor->zero_adjoint();
  }
}
BENCHMARK(BM_GroupedLinearBackward)->Arg(1)->Arg(4);

// Width 64, 2 heads per member, 16 tokens.
void BM_GroupedAttention(benchmark::State& state) {
  const auto groups = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  GroupedAttention mha(64, groups, 2, rng);
  const Tensor x = random_tensor({8, 16, 64}, rng);
  for (auto _ : state) {
    Tape tape;
    const Var h = tape.constant(x);
    benchmark::DoNotOptimize(mha.forward(tape, h, h, h).value().data().data());
  }
  state.counters["params"] = static_cast<double>(mha.param_count());
}
BENCHMARK(BM_GroupedAttention)->Arg(1)->Arg(2)->Arg(4);

void BM_HwtaLoss(benchmark::State& state) {
  const HeadLayout layout{2, static_cast<std::size_t>(state.range(0)), 12};
  Rng rng(4);
  Tensor raw = random_tensor({128, layout.raw_size()}, rng);
  raw.set_requires_grad(true);
  const Tensor y = random_tensor({128, layout.coords()}, rng);
  const LossConfig cfg;
  for (auto _ : state) {
    Tape tape;
    const auto res = hwta_loss(decode_head(tape.leaf(raw), layout), y, cfg);
    tape.backward(res.total);
    raw.zero_adjoint();
  }
}
BENCHMARK(BM_HwtaLoss)->Arg(3)->Arg(5);

void BM_WtaLoss(benchmark::State& state) {
  const HeadLayout layout{1, 6, 12};
  Rng rng(5);
  Tensor raw = random_tensor({128, layout.raw_size()}, rng);
  raw.set_requires_grad(true);
  const Tensor y = random_tensor({128, layout.coords()}, rng);
  for (auto _ : state) {
    Tape tape;
    const auto res = wta_loss(decode_head(tape.leaf(raw), layout), y);
    tape.backward(res.total);
    raw.zero_adjoint();
  }
}
BENCHMARK(BM_WtaLoss);

void BM_KMeans(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng data_rng(6);
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({data_rng.normal(), data_rng.normal()});
  const std::vector<double> w(n, 1.0);
  for (auto _ : state) {
    Rng rng(7);
    benchmark::DoNotOptimize(kmeans(pts, w, 6, rng).centroids.data());
  }
}
BENCHMARK(BM_KMeans)->Arg(30)->Arg(60)->Arg(300);

}  // namespace
}  // namespace hmix

BENCHMARK_MAIN();
