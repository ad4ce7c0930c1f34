// Copyright 2026 The mixasr Authors
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

#include "mixasr/chain.hpp"
#include "mixasr/config.hpp"

namespace {

mixasr::ChainModel tiny_model() {
  mixasr::RunConfig cfg = mixasr::make_preset("tiny");
  return mixasr::ChainModel(cfg.encoder, cfg.chain, 7, 5);
}

mixasr::Var random_features(int t_len, int dim, uint64_t seed) {
  mixasr::Rng rng(seed);
  mixasr::Mat m(t_len, dim);
  for (auto& v : m.v) v = rng.normal();
  return mixasr::constant(std::move(m));
}

void BM_ChainDecodeStep(benchmark::State& state) {
  const auto model = tiny_model();
  const auto feats = random_features(48, 16, 41);
  mixasr::NoGradGuard ng;
  for (auto _ : state) {
    mixasr::ChainCursor cur = model.start(feats);
    benchmark::DoNotOptimize(model.step(cur).log_probs->val.v.data());
  }
}
BENCHMARK(BM_ChainDecodeStep);

void BM_ChainDecodeFixedJ(benchmark::State& state) {
  const int j = static_cast<int>(state.range(0));
  const auto model = tiny_model();
  const auto feats = random_features(48, 16, 42);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mixasr::greedy_chain_decode(model, feats, j).size());
  }
}
BENCHMARK(BM_ChainDecodeFixedJ)->Arg(1)->Arg(2)->Arg(3);

void BM_ChainTrainStep(benchmark::State& state) {
  auto model = tiny_model();
  const auto feats = random_features(48, 16, 43);
  mixasr::Rng rng(44);
  std::vector<mixasr::TokenSequence> targets = {{1, 2, 3}, {4, 5}};
  for (auto _ : state) {
    model.params().zero_grads();
    mixasr::ChainLoss loss = mixasr::chain_pit_loss(model, feats, targets, 0.1, true,
                                                    mixasr::AssignmentMode::kJoint);
    mixasr::backward(loss.total);
    benchmark::DoNotOptimize(loss.total->val.at(0, 0));
  }
}
BENCHMARK(BM_ChainTrainStep);

}  // namespace
