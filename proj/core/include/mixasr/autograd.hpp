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

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mixasr/mat.hpp"

namespace mixasr {

// Reverse-mode autodiff over Mat values. The graph is built dynamically:
// each op returns a new Node holding the result and a closure that pushes
// gradients into its parents. Parameters are long-lived leaf nodes; the rest
// of the graph dies with the loss Var after backward().
class Node {
 public:
  Mat val;
  Mat grad;  // allocated lazily by ensure_grad()
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backprop;

  explicit Node(Mat v) : val(std::move(v)) {}

  void ensure_grad() {
    if (!grad.same_shape(val)) grad = Mat(val.rows, val.cols);
  }
  void zero_grad() { grad = Mat(); }
};

using Var = std::shared_ptr<Node>;

Var constant(Mat v);
Var leaf(Mat v);  // trainable leaf (requires_grad = true)

// Gradient recording is on by default; decode paths disable it via the guard.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Runs reverse topological order from `loss` (must be 1x1) seeding d loss = 1.
void backward(const Var& loss);

// ---- elementwise / shape ops ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var add_rowvec(const Var& x, const Var& bias);  // bias is 1 x C, broadcast over rows
Var scale(const Var& x, double s);
Var hadamard(const Var& a, const Var& b);
Var matmul_v(const Var& a, const Var& b);
Var transpose_v(const Var& x);
Var sigmoid_v(const Var& x);
Var tanh_v(const Var& x);
Var relu_v(const Var& x);
Var swish_v(const Var& x);  // x * sigmoid(x)
Var slice_rows_v(const Var& x, int r0, int r1);
Var slice_cols_v(const Var& x, int c0, int c1);
Var concat_cols_v(const Var& a, const Var& b);
Var concat_cols_v(const std::vector<Var>& parts);
Var concat_rows_v(const std::vector<Var>& parts);
Var sum_all(const Var& x);  // 1x1
Var dropout_v(const Var& x, double p, Rng& rng);  // inverted dropout; identity when p == 0

// ---- normalization / attention building blocks ----
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var softmax_rows(const Var& x);
Var log_softmax_rows(const Var& x);

// ---- convolutions over the time axis ----
// Stride-2 1D convolution with zero padding (kernel-1)/2 on both sides, so the
// output length is ceil(T/2). Weight layout: (kernel*in_ch) x out_ch; the
// window for output t covers input rows [2t - pad, 2t - pad + kernel).
Var conv1d_stride2(const Var& x, const Var& w, const Var& b, int kernel);
int conv1d_stride2_out_len(int t);

// Depthwise 1D convolution, stride 1, same zero padding (odd kernel).
// Weight layout: kernel x channels; bias 1 x channels.
Var depthwise_conv1d(const Var& x, const Var& w, const Var& b, int kernel);

// Picks rows of `table` by id (embedding lookup). Gradient scatters into the
// table rows; ids themselves are not differentiable.
Var embedding_rows(const Var& table, const std::vector<int>& ids);

}  // namespace mixasr
