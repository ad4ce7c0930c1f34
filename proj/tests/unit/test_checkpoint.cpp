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

#include "mixasr/checkpoint.hpp"

#include <fstream>
#include <string>

#include "doctest.h"
#include "testutil.hpp"

using mixasr::ChainModel;
using mixasr::Mat;
using mixasr::ParamRegistry;

namespace {

mixasr::EncoderConfig micro_encoder() {
  mixasr::EncoderConfig cfg;
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

}  // namespace

TEST_CASE("raw checkpoints round-trip tensors bit-exactly") {
  mixtest::TempDir dir("mixasr-ckpt");
  ParamRegistry reg;
  mixasr::Rng rng(71);
  reg.add("alpha", mixtest::random_mat(3, 4, rng));
  reg.add("beta", mixtest::random_mat(1, 7, rng));

  const std::string path = (dir / "m.ckpt").string();
  mixasr::write_checkpoint(path, "{\"kind\":\"test\"}", reg);
  auto ckpt = mixasr::read_checkpoint(path);
  CHECK(ckpt.config_json == "{\"kind\":\"test\"}");
  REQUIRE(ckpt.tensors.size() == 2);
  CHECK(ckpt.tensors[0].first == "alpha");
  CHECK(ckpt.tensors[0].second.v == reg.find("alpha")->val.v);
  CHECK(ckpt.tensors[1].second.v == reg.find("beta")->val.v);

  // Restoring into a same-shaped registry copies the values.
  ParamRegistry other;
  mixasr::Rng rng2(72);
  other.add("alpha", mixtest::random_mat(3, 4, rng2));
  other.add("beta", mixtest::random_mat(1, 7, rng2));
  mixasr::apply_checkpoint(ckpt, other);
  CHECK(other.find("alpha")->val.v == reg.find("alpha")->val.v);

  // Shape or name mismatches are rejected.
  ParamRegistry wrong_shape;
  wrong_shape.add("alpha", Mat::zeros(3, 5));
  wrong_shape.add("beta", Mat::zeros(1, 7));
  CHECK_THROWS(mixasr::apply_checkpoint(ckpt, wrong_shape));

  ParamRegistry missing;
  missing.add("alpha", Mat::zeros(3, 4));
  CHECK_THROWS(mixasr::apply_checkpoint(ckpt, missing));
}

TEST_CASE("read_checkpoint rejects garbage") {
  mixtest::TempDir dir("mixasr-ckpt-bad");
  const std::string path = (dir / "junk.ckpt").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "JUNKJUNKJUNK";
  }
  CHECK_THROWS(mixasr::read_checkpoint(path));
  CHECK_THROWS(mixasr::read_checkpoint((dir / "absent.ckpt").string()));
}

TEST_CASE("chain models survive a save/load cycle") {
  mixtest::TempDir dir("mixasr-ckpt-chain");
  mixasr::ChainConfig chain;
  chain.lstm_hidden = 10;
  ChainModel model(micro_encoder(), chain, 5, 31);

  const std::string path = (dir / "chain.ckpt").string();
  mixasr::save_chain_model(path, model, "{\"epochs\":4}");

  std::string extra;
  ChainModel back = mixasr::load_chain_model(path, &extra);
  CHECK(extra.find("\"epochs\":4") != std::string::npos);
  CHECK(back.vocab_size() == 5);
  CHECK(back.encoder_config().d_model == 8);
  CHECK(back.chain_config().lstm_hidden == 10);

  // Same inputs, same outputs: the restored model is functionally identical.
  mixasr::Rng rng(73);
  mixasr::Var feats = mixasr::constant(mixtest::random_mat(16, 6, rng));
  auto a = model.forward(feats, 2);
  auto b = back.forward(feats, 2);
  REQUIRE(a.size() == b.size());
  for (size_t s = 0; s < a.size(); ++s) {
    CHECK(a[s].log_probs->val.v == b[s].log_probs->val.v);
  }

  // Saving twice writes identical bytes.
  const std::string path2 = (dir / "chain2.ckpt").string();
  mixasr::save_chain_model(path2, model, "{\"epochs\":4}");
  CHECK(mixtest::read_file(path) == mixtest::read_file(path2));
}
