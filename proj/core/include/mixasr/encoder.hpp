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

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mixasr/autograd.hpp"
#include "mixasr/types.hpp"

namespace mixasr {

// Hidden representation at the subsampled frame rate (T' x d_model).
struct HiddenSequence {
  Mat frames;
  int valid_length = 0;

  HiddenSequence() = default;
  explicit HiddenSequence(Mat f) : frames(std::move(f)), valid_length(frames.rows) {}
};

struct EncoderConfig {
  int feat_dim = 16;        // input feature dimension D
  int d_model = 64;         // attention dimension
  int n_heads = 4;
  int d_ff = 128;
  int n_layers_rec = 4;     // L
  int intermediate_layer = 2;  // m, tap for the auxiliary CTC loss
  int n_layers_sd = 2;      // per-branch depth of the parallel baseline
  int conv_kernel = 7;      // depthwise kernel inside the Conformer block
  double dropout = 0.0;

  void validate() const;
};

// Two stride-2 stages, each ceil(T/2); inputs shorter than 4 frames are
// rejected so at least one full stride fits in every stage.
int subsampled_length(int t_in);
inline constexpr int kMinEncoderFrames = 4;
inline constexpr int kSubsampleFactor = 4;

// Absolute sinusoidal positional encoding, added after subsampling.
Mat sinusoidal_position_encoding(int t_len, int d_model);

// Ordered, named parameter storage shared by optimizer and checkpoints.
class ParamRegistry {
 public:
  Var add(const std::string& name, Mat init);
  const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
  Var find(const std::string& name) const;
  int64_t total_parameters() const;
  void zero_grads();

 private:
  std::vector<std::pair<std::string, Var>> items_;
};

// Xavier-uniform init used by all weight matrices.
Mat xavier_uniform(int rows, int cols, Rng& rng);

struct Linear {
  Var w;  // in x out
  Var b;  // 1 x out

  Linear() = default;
  Linear(ParamRegistry& reg, const std::string& name, int in, int out, Rng& rng);
  Var forward(const Var& x) const { return add_rowvec(matmul_v(x, w), b); }
};

struct LayerNorm {
  Var gamma;
  Var beta;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(ParamRegistry& reg, const std::string& name, int dim);
  Var forward(const Var& x) const { return layer_norm(x, gamma, beta, eps); }
};

// Convolutional front end: two stride-2 1D convolutions (kernel 3) with ReLU,
// mapping D -> d_model and T -> ceil(ceil(T/2)/2), plus positional encoding.
struct MixtureEncoder {
  Var conv1_w, conv1_b;
  Var conv2_w, conv2_b;
  int feat_dim = 0;
  int d_model = 0;

  MixtureEncoder() = default;
  MixtureEncoder(ParamRegistry& reg, const std::string& prefix, const EncoderConfig& cfg, Rng& rng);
  Var forward(const Var& features) const;
};

// Macaron-style block: half-step FFN, self-attention, convolution module,
// half-step FFN, final layer norm. Pre-norm residual structure throughout.
struct ConformerBlock {
  LayerNorm ln_ffn1;
  Linear ffn1_in, ffn1_out;
  LayerNorm ln_att;
  Linear att_q, att_k, att_v, att_o;
  LayerNorm ln_conv;
  Linear conv_pw1;          // d -> 2d, split by GLU
  Var conv_dw_w, conv_dw_b;  // depthwise kernel x d
  LayerNorm ln_conv_mid;
  Linear conv_pw2;
  LayerNorm ln_ffn2;
  Linear ffn2_in, ffn2_out;
  LayerNorm ln_final;

  int n_heads = 0;
  int conv_kernel = 0;
  double dropout = 0.0;
  // Test hook: disables the block-final normalization so the pure residual
  // path can be asserted.
  bool apply_final_norm = true;

  ConformerBlock() = default;
  ConformerBlock(ParamRegistry& reg, const std::string& prefix, const EncoderConfig& cfg, Rng& rng);
  Var forward(const Var& x, Rng* dropout_rng = nullptr) const;

  Var self_attention(const Var& x) const;
  Var conv_module(const Var& x) const;
};

// Stack of L Conformer blocks with a tap after block m. forward() returns
// (G, H_m): the final and the intermediate hidden sequences.
struct RecognitionEncoder {
  std::vector<ConformerBlock> blocks;
  int intermediate_layer = 0;

  // Instrumentation for the non-autoregressive step-count contract; shared so
  // the encoder stays movable and counting stays safe under parallel decode.
  std::shared_ptr<std::atomic<int64_t>> call_counter;

  RecognitionEncoder() = default;
  RecognitionEncoder(ParamRegistry& reg, const std::string& prefix, const EncoderConfig& cfg,
                     Rng& rng);
  std::pair<Var, Var> forward(const Var& x, Rng* dropout_rng = nullptr) const;
  int64_t forward_calls() const { return call_counter ? call_counter->load() : 0; }
};

// Linear projection + log-softmax; per-frame outputs sum to one in
// probability space.
struct CtcHead {
  Linear proj;

  CtcHead() = default;
  CtcHead(ParamRegistry& reg, const std::string& prefix, int d_model, int vocab_size, Rng& rng);
  Var forward(const Var& h) const { return log_softmax_rows(proj.forward(h)); }
};

// Closed-form parameter count of MixtureEncoder + RecognitionEncoder under
// `cfg` (vocabulary-dependent heads excluded).
int64_t encoder_param_count(const EncoderConfig& cfg);

}  // namespace mixasr
