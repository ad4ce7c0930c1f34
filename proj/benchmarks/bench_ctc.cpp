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

#include <cmath>

#include "mixasr/ctc.hpp"
#include "mixasr/mat.hpp"

namespace {

mixasr::Mat random_log_probs(int t_len, int vocab, uint64_t seed) {
  mixasr::Rng rng(seed);
  mixasr::Mat lp(t_len, vocab);
  for (int t = 0; t < t_len; ++t) {
    double norm = 0.0;
    for (int v = 0; v < vocab; ++v) {
      lp.at(t, v) = rng.uniform(0.05, 1.0);
      norm += lp.at(t, v);
    }
    for (int v = 0; v < vocab; ++v) lp.at(t, v) = std::log(lp.at(t, v) / norm);
  }
  return lp;
}

mixasr::TokenSequence random_target(int len, int vocab, uint64_t seed) {
  mixasr::Rng rng(seed);
  mixasr::TokenSequence y(len);
  for (auto& t : y) t = rng.uniform_int(1, vocab - 1);
  return y;
}

void BM_CtcLoss(benchmark::State& state) {
  const int t_len = static_cast<int>(state.range(0));
  const int vocab = 7;
  const auto lp = random_log_probs(t_len, vocab, 11);
  const auto y = random_target(t_len / 4, vocab, 12);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mixasr::ctc_forward_backward(lp, y, false).loss);
  }
}
BENCHMARK(BM_CtcLoss)->Arg(16)->Arg(64)->Arg(256);

void BM_CtcLossGrad(benchmark::State& state) {
  const int t_len = static_cast<int>(state.range(0));
  const int vocab = 7;
  const auto lp = random_log_probs(t_len, vocab, 21);
  const auto y = random_target(t_len / 4, vocab, 22);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mixasr::ctc_forward_backward(lp, y, true).grad.v.data());
  }
}
BENCHMARK(BM_CtcLossGrad)->Arg(16)->Arg(64)->Arg(256);

void BM_PitAssign(benchmark::State& state) {
  const int j = static_cast<int>(state.range(0));
  mixasr::Rng rng(31);
  mixasr::Mat cost(j, j);
  for (auto& v : cost.v) v = rng.uniform(0.0, 50.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mixasr::pit_assign(cost).perm.data());
  }
}
BENCHMARK(BM_PitAssign)->Arg(2)->Arg(3)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
