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

#include "mixasr/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace mixasr {

void EncoderConfig::validate() const {
  if (feat_dim <= 0) throw ConfigError("encoder: feat_dim must be positive");
  if (d_model <= 0) throw ConfigError("encoder: d_model must be positive");
  if (n_heads <= 0 || d_model % n_heads != 0)
    throw ConfigError("encoder: d_model must be divisible by n_heads");
  if (d_ff <= 0) throw ConfigError("encoder: d_ff must be positive");
  if (n_layers_rec < 2) throw ConfigError("encoder: n_layers_rec must be at least 2");
  if (intermediate_layer < 1 || intermediate_layer >= n_layers_rec)
    throw ConfigError("encoder: intermediate_layer must satisfy 1 <= m < L");
  if (n_layers_sd < 1) throw ConfigError("encoder: n_layers_sd must be positive");
  if (conv_kernel < 1 || conv_kernel % 2 == 0)
    throw ConfigError("encoder: conv_kernel must be odd");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0, 1)");
}

int subsampled_length(int t_in) {
  if (t_in < kMinEncoderFrames)
    throw ShapeError("encoder input must have at least 4 frames, got " + std::to_string(t_in));
  int t1 = conv1d_stride2_out_len(t_in);
  return conv1d_stride2_out_len(t1);
}

Mat sinusoidal_position_encoding(int t_len, int d_model) {
  Mat pe = Mat::zeros(t_len, d_model);
  for (int t = 0; t < t_len; ++t) {
    for (int i = 0; i < d_model / 2; ++i) {
      double freq = std::pow(10000.0, -2.0 * i / d_model);
      pe.at(t, 2 * i) = std::sin(t * freq);
      if (2 * i + 1 < d_model) pe.at(t, 2 * i + 1) = std::cos(t * freq);
    }
  }
  return pe;
}

Var ParamRegistry::add(const std::string& name, Mat init) {
  for (const auto& [n, v] : items_)
    if (n == name) throw std::logic_error("duplicate parameter name: " + name);
  Var p = leaf(std::move(init));
  items_.emplace_back(name, p);
  return p;
}

Var ParamRegistry::find(const std::string& name) const {
  for (const auto& [n, v] : items_)
    if (n == name) return v;
  throw std::out_of_range("no parameter named " + name);
}

int64_t ParamRegistry::total_parameters() const {
  int64_t n = 0;
  for (const auto& [name, v] : items_) n += static_cast<int64_t>(v->val.v.size());
  return n;
}

void ParamRegistry::zero_grads() {
  for (auto& [name, v] : items_) v->zero_grad();
}

Mat xavier_uniform(int rows, int cols, Rng& rng) {
  Mat m(rows, cols);
  double bound = std::sqrt(6.0 / (rows + cols));
  for (auto& x : m.v) x = rng.uniform(-bound, bound);
  return m;
}

Linear::Linear(ParamRegistry& reg, const std::string& name, int in, int out, Rng& rng) {
  w = reg.add(name + ".w", xavier_uniform(in, out, rng));
  b = reg.add(name + ".b", Mat::zeros(1, out));
}

LayerNorm::LayerNorm(ParamRegistry& reg, const std::string& name, int dim) {
  gamma = reg.add(name + ".gamma", Mat::full(1, dim, 1.0));
  beta = reg.add(name + ".beta", Mat::zeros(1, dim));
}

MixtureEncoder::MixtureEncoder(ParamRegistry& reg, const std::string& prefix,
                               const EncoderConfig& cfg, Rng& rng)
    : feat_dim(cfg.feat_dim), d_model(cfg.d_model) {
  conv1_w = reg.add(prefix + ".conv1.w", xavier_uniform(3 * cfg.feat_dim, cfg.d_model, rng));
  conv1_b = reg.add(prefix + ".conv1.b", Mat::zeros(1, cfg.d_model));
  conv2_w = reg.add(prefix + ".conv2.w", xavier_uniform(3 * cfg.d_model, cfg.d_model, rng));
  conv2_b = reg.add(prefix + ".conv2.b", Mat::zeros(1, cfg.d_model));
}

Var MixtureEncoder::forward(const Var& features) const {
  if (features->val.cols != feat_dim)
    throw ShapeError("mixture encoder expects " + std::to_string(feat_dim) +
                     " feature dims, got " + std::to_string(features->val.cols));
  if (features->val.rows < kMinEncoderFrames)
    throw ShapeError("encoder input must have at least 4 frames, got " +
                     std::to_string(features->val.rows));
  Var h = relu_v(conv1d_stride2(features, conv1_w, conv1_b, 3));
  h = relu_v(conv1d_stride2(h, conv2_w, conv2_b, 3));
  Var pe = constant(sinusoidal_position_encoding(h->val.rows, d_model));
  return add(h, pe);
}

ConformerBlock::ConformerBlock(ParamRegistry& reg, const std::string& prefix,
                               const EncoderConfig& cfg, Rng& rng)
    : n_heads(cfg.n_heads), conv_kernel(cfg.conv_kernel), dropout(cfg.dropout) {
  const int d = cfg.d_model;
  ln_ffn1 = LayerNorm(reg, prefix + ".ffn1.ln", d);
  ffn1_in = Linear(reg, prefix + ".ffn1.in", d, cfg.d_ff, rng);
  ffn1_out = Linear(reg, prefix + ".ffn1.out", cfg.d_ff, d, rng);
  ln_att = LayerNorm(reg, prefix + ".att.ln", d);
  att_q = Linear(reg, prefix + ".att.q", d, d, rng);
  att_k = Linear(reg, prefix + ".att.k", d, d, rng);
  att_v = Linear(reg, prefix + ".att.v", d, d, rng);
  att_o = Linear(reg, prefix + ".att.o", d, d, rng);
  ln_conv = LayerNorm(reg, prefix + ".conv.ln", d);
  conv_pw1 = Linear(reg, prefix + ".conv.pw1", d, 2 * d, rng);
  conv_dw_w = reg.add(prefix + ".conv.dw.w", xavier_uniform(cfg.conv_kernel, d, rng));
  conv_dw_b = reg.add(prefix + ".conv.dw.b", Mat::zeros(1, d));
  ln_conv_mid = LayerNorm(reg, prefix + ".conv.mid.ln", d);
  conv_pw2 = Linear(reg, prefix + ".conv.pw2", d, d, rng);
  ln_ffn2 = LayerNorm(reg, prefix + ".ffn2.ln", d);
  ffn2_in = Linear(reg, prefix + ".ffn2.in", d, cfg.d_ff, rng);
  ffn2_out = Linear(reg, prefix + ".ffn2.out", cfg.d_ff, d, rng);
  ln_final = LayerNorm(reg, prefix + ".final.ln", d);
}

Var ConformerBlock::self_attention(const Var& x) const {
  const int d = x->val.cols;
  const int dh = d / n_heads;
  Var q = att_q.forward(x);
  Var k = att_k.forward(x);
  Var v = att_v.forward(x);
  std::vector<Var> heads;
  heads.reserve(n_heads);
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < n_heads; ++h) {
    Var qh = slice_cols_v(q, h * dh, (h + 1) * dh);
    Var kh = slice_cols_v(k, h * dh, (h + 1) * dh);
    Var vh = slice_cols_v(v, h * dh, (h + 1) * dh);
    Var scores = scale(matmul_v(qh, transpose_v(kh)), inv_sqrt);
    Var attn = softmax_rows(scores);
    heads.push_back(matmul_v(attn, vh));
  }
  Var merged = heads.size() == 1 ? heads[0] : concat_cols_v(heads);
  return att_o.forward(merged);
}

Var ConformerBlock::conv_module(const Var& x) const {
  const int d = x->val.cols;
  Var h = conv_pw1.forward(x);
  Var a = slice_cols_v(h, 0, d);
  Var g = slice_cols_v(h, d, 2 * d);
  h = hadamard(a, sigmoid_v(g));  // GLU
  h = depthwise_conv1d(h, conv_dw_w, conv_dw_b, conv_kernel);
  h = ln_conv_mid.forward(h);
  h = swish_v(h);
  return conv_pw2.forward(h);
}

Var ConformerBlock::forward(const Var& x, Rng* dropout_rng) const {
  auto drop = [&](Var v) {
    if (dropout > 0.0 && dropout_rng != nullptr) return dropout_v(v, dropout, *dropout_rng);
    return v;
  };
  Var h = add(x, scale(drop(ffn1_out.forward(swish_v(ffn1_in.forward(ln_ffn1.forward(x))))), 0.5));
  h = add(h, drop(self_attention(ln_att.forward(h))));
  h = add(h, drop(conv_module(ln_conv.forward(h))));
  h = add(h, scale(drop(ffn2_out.forward(swish_v(ffn2_in.forward(ln_ffn2.forward(h))))), 0.5));
  if (!apply_final_norm) return h;
  return ln_final.forward(h);
}

RecognitionEncoder::RecognitionEncoder(ParamRegistry& reg, const std::string& prefix,
                                       const EncoderConfig& cfg, Rng& rng)
    : intermediate_layer(cfg.intermediate_layer),
      call_counter(std::make_shared<std::atomic<int64_t>>(0)) {
  blocks.reserve(cfg.n_layers_rec);
  for (int l = 0; l < cfg.n_layers_rec; ++l)
    blocks.emplace_back(reg, prefix + ".block" + std::to_string(l), cfg, rng);
}

std::pair<Var, Var> RecognitionEncoder::forward(const Var& x, Rng* dropout_rng) const {
  if (call_counter) call_counter->fetch_add(1, std::memory_order_relaxed);
  Var h = x;
  Var inter;
  for (int l = 0; l < static_cast<int>(blocks.size()); ++l) {
    h = blocks[l].forward(h, dropout_rng);
    if (l + 1 == intermediate_layer) inter = h;
  }
  return {h, inter};
}

CtcHead::CtcHead(ParamRegistry& reg, const std::string& prefix, int d_model, int vocab_size,
                 Rng& rng) {
  proj = Linear(reg, prefix + ".proj", d_model, vocab_size, rng);
}

int64_t encoder_param_count(const EncoderConfig& cfg) {
  const int64_t d = cfg.d_model;
  const int64_t ff = cfg.d_ff;
  const int64_t k = cfg.conv_kernel;
  // Mixture encoder: two kernel-3 convolutions with bias.
  int64_t mix = (3 * cfg.feat_dim * d + d) + (3 * d * d + d);
  // One Conformer block.
  int64_t ffn = 2 * d + (d * ff + ff) + (ff * d + d);  // ln + in + out
  int64_t att = 2 * d + 4 * (d * d + d);
  int64_t conv = 2 * d            // pre-norm
                 + (d * 2 * d + 2 * d)  // pointwise in
                 + (k * d + d)          // depthwise
                 + 2 * d                // mid norm
                 + (d * d + d);         // pointwise out
  int64_t block = 2 * ffn + att + conv + 2 * d;  // + final norm
  return mix + cfg.n_layers_rec * block;
}

}  // namespace mixasr
