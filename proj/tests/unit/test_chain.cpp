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

#include "mixasr/chain.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "testutil.hpp"

using mixasr::ChainConfig;
using mixasr::ChainModel;
using mixasr::EncoderConfig;
using mixasr::Mat;
using mixasr::Rng;
using mixasr::TokenSequence;
using mixasr::Var;

namespace {

EncoderConfig micro_encoder() {
  EncoderConfig cfg;
  cfg.feat_dim = 6;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.n_layers_rec = 2;
  cfg.intermediate_layer = 1;
  cfg.n_layers_sd = 1;
  cfg.conv_kernel = 3;
  return cfg;
}

ChainConfig micro_chain() {
  ChainConfig cfg;
  cfg.lstm_hidden = 10;
  return cfg;
}

Var random_features(int t_len, int dim, uint64_t seed) {
  Rng rng(seed);
  return mixasr::constant(mixtest::random_mat(t_len, dim, rng));
}

}  // namespace

TEST_CASE("mode names round-trip") {
  using mixasr::AssignmentMode;
  using mixasr::ConditionMode;
  CHECK(mixasr::parse_condition_mode(to_string(ConditionMode::kSoft)) == ConditionMode::kSoft);
  CHECK(mixasr::parse_condition_mode(to_string(ConditionMode::kHard)) == ConditionMode::kHard);
  CHECK(mixasr::parse_assignment_mode(to_string(AssignmentMode::kJoint)) == AssignmentMode::kJoint);
  CHECK(mixasr::parse_assignment_mode(to_string(AssignmentMode::kGreedyPerStep)) ==
        AssignmentMode::kGreedyPerStep);
  CHECK_THROWS_AS(mixasr::parse_condition_mode("mush"), mixasr::ConfigError);
  CHECK_THROWS_AS(mixasr::parse_assignment_mode("mush"), mixasr::ConfigError);
}

TEST_CASE("chain forward runs one recognition pass per step") {
  ChainModel model(micro_encoder(), micro_chain(), 5, 7);
  Var feats = random_features(16, 6, 1);

  auto out2 = model.forward(feats, 2);
  REQUIRE(out2.size() == 2);
  CHECK(model.encoder_rec.forward_calls() == 2);

  auto out3 = model.forward(feats, 3);
  REQUIRE(out3.size() == 3);
  CHECK(model.encoder_rec.forward_calls() == 5);

  const int sub = mixasr::subsampled_length(16);
  for (const auto& step : out3) {
    CHECK(step.g->val.rows == sub);
    CHECK(step.g->val.cols == 8);
    CHECK(step.log_probs->val.rows == sub);
    CHECK(step.log_probs->val.cols == 5);
    CHECK(step.log_probs_inter->val.cols == 5);
    CHECK(step.alignment.size() == static_cast<size_t>(sub));
  }
}

TEST_CASE("chain steps share one parameter set") {
  ChainModel model(micro_encoder(), micro_chain(), 5, 7);
  const size_t n_params = model.params().items().size();
  Var feats = random_features(12, 6, 2);
  model.forward(feats, 1);
  model.forward(feats, 4);
  // Running more steps must not mint new parameters.
  CHECK(model.params().items().size() == n_params);

  // Every parameter name is unique and the LSTM family is present once.
  std::set<std::string> names;
  for (const auto& [name, p] : model.params().items()) names.insert(name);
  CHECK(names.size() == n_params);
  CHECK(names.count("chain.lstm.wx") == 1);
  CHECK(names.count("chain.lstm.wh") == 1);
  CHECK(names.count("chain.lstm.b") == 1);
}

TEST_CASE("first step is conditioned on zeros and later steps on the previous output") {
  // Two models sharing weights: stepping model A twice must differ from
  // restarting on the same mixture (the second step sees a condition).
  ChainModel model(micro_encoder(), micro_chain(), 5, 7);
  Var feats = random_features(16, 6, 3);

  auto steps = model.forward(feats, 2);
  auto restart = model.forward(feats, 1);

  // Step 1 is reproducible from a fresh cursor.
  for (size_t i = 0; i < steps[0].log_probs->val.size(); ++i) {
    CHECK(steps[0].log_probs->val.v[i] == doctest::Approx(restart[0].log_probs->val.v[i]));
  }
  // Step 2 must not be identical to step 1 (condition and LSTM state moved).
  bool differs = false;
  for (size_t i = 0; i < steps[1].log_probs->val.size(); ++i) {
    differs = differs || std::abs(steps[1].log_probs->val.v[i] - steps[0].log_probs->val.v[i]) >
                             1e-12;
  }
  CHECK(differs);
}

TEST_CASE("hard conditioning registers its own parameters and runs") {
  ChainConfig hard = micro_chain();
  hard.condition_mode = mixasr::ConditionMode::kHard;
  ChainModel model(micro_encoder(), hard, 5, 7);

  std::set<std::string> names;
  for (const auto& [name, p] : model.params().items()) names.insert(name);
  CHECK(names.count("chain.embed") == 1);

  ChainModel soft(micro_encoder(), micro_chain(), 5, 7);
  std::set<std::string> soft_names;
  for (const auto& [name, p] : soft.params().items()) soft_names.insert(name);
  CHECK(soft_names.count("chain.embed") == 0);

  Var feats = random_features(14, 6, 4);
  auto out = model.forward(feats, 2);
  CHECK(out.size() == 2);
  for (double v : out[1].log_probs->val.v) CHECK(std::isfinite(v));
}

TEST_CASE("chain_pit_loss combines components under the chosen permutation") {
  ChainModel model(micro_encoder(), micro_chain(), 5, 7);
  Var feats = random_features(20, 6, 5);
  const std::vector<TokenSequence> targets = {{1, 2}, {3}};

  auto loss = mixasr::chain_pit_loss(model, feats, targets, 0.1, false,
                                     mixasr::AssignmentMode::kJoint);
  REQUIRE(loss.permutation.size() == 2);
  std::vector<int> sorted = loss.permutation;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1});
  CHECK(std::isfinite(loss.total->val.at(0, 0)));
  CHECK(loss.total->val.at(0, 0) ==
        doctest::Approx(0.9 * loss.final_ctc + 0.1 * loss.inter_ctc).epsilon(1e-9));

  // The stop step adds a strictly positive empty-target term.
  auto with_stop = mixasr::chain_pit_loss(model, feats, targets, 0.1, true,
                                          mixasr::AssignmentMode::kJoint);
  CHECK(with_stop.permutation.size() == 2);
  CHECK(with_stop.total->val.at(0, 0) > loss.total->val.at(0, 0));
}

TEST_CASE("joint and greedy assignment agree on a single speaker") {
  ChainModel model(micro_encoder(), micro_chain(), 5, 7);
  Var feats = random_features(16, 6, 6);
  const std::vector<TokenSequence> targets = {{2, 1}};
  auto joint =
      mixasr::chain_pit_loss(model, feats, targets, 0.1, false, mixasr::AssignmentMode::kJoint);
  auto greedy = mixasr::chain_pit_loss(model, feats, targets, 0.1, false,
                                       mixasr::AssignmentMode::kGreedyPerStep);
  CHECK(joint.permutation == greedy.permutation);
  CHECK(joint.total->val.at(0, 0) == doctest::Approx(greedy.total->val.at(0, 0)).epsilon(1e-12));
}

TEST_CASE("chain loss backward reaches the shared parameters") {
  ChainModel model(micro_encoder(), micro_chain(), 5, 7);
  Var feats = random_features(16, 6, 8);
  auto loss = mixasr::chain_pit_loss(model, feats, {{1}, {2, 3}}, 0.1, true,
                                     mixasr::AssignmentMode::kJoint);
  mixasr::backward(loss.total);

  int with_grad = 0;
  for (const auto& [name, p] : model.params().items()) {
    if (p->grad.v.empty()) continue;
    double norm = 0.0;
    for (double g : p->grad.v) norm += g * g;
    if (norm > 0.0) ++with_grad;
  }
  // Every family of the network must receive gradient: encoder, chain, head.
  CHECK(with_grad > static_cast<int>(model.params().items().size()) / 2);
}

TEST_CASE("parallel baseline rejects mismatched speaker counts") {
  mixasr::PitParallelModel model(micro_encoder(), 2, 5, 7);
  CHECK(model.n_branches() == 2);
  Var feats = random_features(16, 6, 9);
  CHECK_THROWS_AS(model.forward(feats, 3), mixasr::ConfigError);

  auto lps = model.forward(feats, 2);
  REQUIRE(lps.size() == 2);
  const int sub = mixasr::subsampled_length(16);
  for (const auto& lp : lps) {
    CHECK(lp->val.rows == sub);
    CHECK(lp->val.cols == 5);
  }

  auto loss = mixasr::parallel_pit_loss(model, feats, {{1, 2}, {3}});
  CHECK(std::isfinite(loss.total->val.at(0, 0)));
  CHECK(loss.permutation.size() == 2);
}

TEST_CASE("Adam takes a hand-checked first step") {
  mixasr::ParamRegistry reg;
  Var p = reg.add("p", Mat::full(1, 2, 1.0));
  const double peak = 1e-2;
  const int warmup = 4;
  mixasr::AdamOptimizer opt(reg, peak, warmup);

  p->ensure_grad();
  p->grad.at(0, 0) = 0.5;
  p->grad.at(0, 1) = -2.0;
  opt.step();

  // t=1: lr = peak/warmup; mhat = g, vhat = g^2, so the update is nearly a
  // signed lr (up to epsilon in the denominator).
  const double lr1 = peak / warmup;
  for (int c = 0; c < 2; ++c) {
    const double g = c == 0 ? 0.5 : -2.0;
    const double expect = 1.0 - lr1 * g / (std::abs(g) + 1e-8);
    CHECK(p->val.at(0, c) == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(opt.steps_taken() == 1);
}

TEST_CASE("warmup schedule rises linearly then decays as inverse square root") {
  mixasr::ParamRegistry reg;
  Var p = reg.add("p", Mat::full(1, 1, 0.0));
  const double peak = 3e-3;
  const int warmup = 10;
  mixasr::AdamOptimizer opt(reg, peak, warmup);

  p->ensure_grad();
  std::vector<double> lrs;
  for (int t = 1; t <= 40; ++t) {
    opt.step();
    lrs.push_back(opt.current_lr());
  }
  CHECK(lrs[0] == doctest::Approx(peak / warmup));
  CHECK(lrs[warmup - 1] == doctest::Approx(peak));
  for (int t = warmup; t < 40; ++t) {
    CHECK(lrs[t] == doctest::Approx(peak * std::sqrt(static_cast<double>(warmup) / (t + 1))));
  }
  // Warmup is monotone rising, the tail is monotone falling.
  for (int t = 1; t < warmup; ++t) CHECK(lrs[t] >= lrs[t - 1]);
  for (int t = warmup; t + 1 < 40; ++t) CHECK(lrs[t + 1] <= lrs[t]);
}

TEST_CASE("clip_grad_norm rescales only above the threshold") {
  mixasr::ParamRegistry reg;
  Var a = reg.add("a", Mat::full(1, 1, 0.0));
  Var b = reg.add("b", Mat::full(1, 1, 0.0));
  a->ensure_grad();
  b->ensure_grad();
  a->grad.at(0, 0) = 3.0;
  b->grad.at(0, 0) = 4.0;  // global norm 5

  const double before = mixasr::clip_grad_norm(reg, 1.0);
  CHECK(before == doctest::Approx(5.0));
  CHECK(a->grad.at(0, 0) == doctest::Approx(0.6));
  CHECK(b->grad.at(0, 0) == doctest::Approx(0.8));

  const double after = mixasr::clip_grad_norm(reg, 10.0);
  CHECK(after == doctest::Approx(1.0));
  CHECK(a->grad.at(0, 0) == doctest::Approx(0.6));  // untouched below the cap
}

TEST_CASE("train_chain runs, logs metrics and fills the histogram") {
  mixtest::TempDir dir("mixasr-train");
  mixasr::CorpusConfig ccfg;
  ccfg.seed = 11;
  ccfg.alphabet = "abc";
  ccfg.source.feat_dim = 6;  // matches the micro encoder
  ccfg.counts[0] = {0, 3, 2, 0, 0};
  ccfg.counts[1] = {0, 0, 1, 0, 0};
  mixasr::generate_corpus(ccfg, dir.str());
  auto train = mixasr::load_corpus(dir.str(), "train");
  auto dev = mixasr::load_corpus(dir.str(), "dev");

  ChainModel model(micro_encoder(), micro_chain(), train.vocab.size(), 13);
  mixasr::TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.batch_size = 2;
  tcfg.warmup_steps = 4;
  tcfg.seed = 13;

  const std::string metrics = (dir / "metrics.jsonl").string();
  auto result = mixasr::train_chain(model, train, &dev, tcfg, metrics);
  REQUIRE(result.history.size() == 2);
  CHECK(result.optimizer_steps == 2 * 3);  // ceil(5/2) batches per epoch
  for (const auto& em : result.history) {
    CHECK(std::isfinite(em.train_loss));
    CHECK(std::isfinite(em.ctc_loss));
    CHECK(std::isfinite(em.interctc_loss));
    CHECK(em.dev_wer >= 0.0);
    int64_t histogram_total = 0;
    for (const auto& [perm, count] : em.permutation_histogram) histogram_total += count;
    CHECK(histogram_total == 5);  // one assignment per mixture
  }

  const std::string text = mixtest::read_file(metrics);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.find("\"epoch\":") != std::string::npos);
  CHECK(text.find("\"dev_wer\":") != std::string::npos);
  CHECK(text.find("seconds") == std::string::npos);  // no timing in metrics
}

TEST_CASE("greedy_chain_decode yields one hypothesis per step under NoGrad") {
  ChainModel model(micro_encoder(), micro_chain(), 5, 7);
  Var feats = random_features(24, 6, 10);
  auto hyps = mixasr::greedy_chain_decode(model, feats, 3);
  REQUIRE(hyps.size() == 3);
  for (const auto& h : hyps) {
    for (int tok : h) {
      CHECK(tok != mixasr::kBlankId);
      CHECK(tok < 5);
    }
  }
}

TEST_CASE("train and chain configs validate") {
  mixasr::TrainConfig t;
  CHECK_NOTHROW(t.validate());
  t.learning_rate = 0.0;
  CHECK_THROWS_AS(t.validate(), mixasr::ConfigError);

  mixasr::TrainConfig bad_lambda;
  bad_lambda.lambda_inter = 1.5;
  CHECK_THROWS_AS(bad_lambda.validate(), mixasr::ConfigError);

  ChainConfig c;
  c.lstm_hidden = 0;
  CHECK_THROWS_AS(c.validate(), mixasr::ConfigError);
}
