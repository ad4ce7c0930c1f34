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

#include "mixasr/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mixasr {

namespace {

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Extended label at lattice position s: blanks at even positions, target
// labels at odd ones.
int ext_label(const TokenSequence& y, int s) { return (s % 2 == 0) ? kBlankId : y[s / 2]; }

void validate_target(const Mat& lp, const TokenSequence& y) {
  for (int tok : y) {
    if (tok == kBlankId) throw ShapeError("ctc: target contains blank id");
    if (tok < 0 || tok >= lp.cols) throw ShapeError("ctc: target id out of vocabulary range");
  }
}

}  // namespace

CtcResult ctc_forward_backward(const Mat& lp, const TokenSequence& target, bool want_grad) {
  const int t_len = lp.rows;
  const int vocab = lp.cols;
  if (t_len < 1 || vocab < 2) throw ShapeError("ctc: need at least 1 frame and 2 labels");
  validate_target(lp, target);

  const int s_len = 2 * static_cast<int>(target.size()) + 1;

  CtcResult res;

  // Quick feasibility: the lattice needs |y| emissions plus one mandatory
  // blank between equal neighbors.
  int min_frames = static_cast<int>(target.size());
  for (size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++min_frames;
  }
  if (t_len < min_frames) {
    res.loss = std::numeric_limits<double>::infinity();
    res.feasible = false;
    return res;
  }

  auto can_skip = [&](int s) {
    return s >= 2 && ext_label(target, s) != kBlankId &&
           ext_label(target, s) != ext_label(target, s - 2);
  };

  Mat alpha = Mat::full(t_len, s_len, kLogZero);
  alpha.at(0, 0) = lp.at(0, kBlankId);
  if (s_len > 1) alpha.at(0, 1) = lp.at(0, ext_label(target, 1));
  for (int t = 1; t < t_len; ++t) {
    for (int s = 0; s < s_len; ++s) {
      double a = alpha.at(t - 1, s);
      if (s >= 1) a = log_add(a, alpha.at(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, alpha.at(t - 1, s - 2));
      if (a == kLogZero) continue;
      alpha.at(t, s) = a + lp.at(t, ext_label(target, s));
    }
  }

  double log_p = alpha.at(t_len - 1, s_len - 1);
  if (s_len > 1) log_p = log_add(log_p, alpha.at(t_len - 1, s_len - 2));
  if (log_p == kLogZero) {
    res.loss = std::numeric_limits<double>::infinity();
    res.feasible = false;
    return res;
  }
  res.loss = -log_p;

  if (!want_grad) return res;

  Mat beta = Mat::full(t_len, s_len, kLogZero);
  beta.at(t_len - 1, s_len - 1) = lp.at(t_len - 1, ext_label(target, s_len - 1));
  if (s_len > 1) beta.at(t_len - 1, s_len - 2) = lp.at(t_len - 1, ext_label(target, s_len - 2));
  for (int t = t_len - 2; t >= 0; --t) {
    for (int s = s_len - 1; s >= 0; --s) {
      double b = beta.at(t + 1, s);
      if (s + 1 < s_len) b = log_add(b, beta.at(t + 1, s + 1));
      if (s + 2 < s_len && can_skip(s + 2)) b = log_add(b, beta.at(t + 1, s + 2));
      if (b == kLogZero) continue;
      beta.at(t, s) = b + lp.at(t, ext_label(target, s));
    }
  }

  // alpha and beta both include the emission at frame t, so the state
  // posterior is alpha + beta - lp - log_p. d loss / d lp[t][k] is minus the
  // summed posterior of lattice states labeled k at frame t.
  res.grad = Mat(t_len, vocab);
  for (int t = 0; t < t_len; ++t) {
    std::vector<double> acc(vocab, kLogZero);
    for (int s = 0; s < s_len; ++s) {
      const double a = alpha.at(t, s);
      const double b = beta.at(t, s);
      if (a == kLogZero || b == kLogZero) continue;
      const int lab = ext_label(target, s);
      acc[lab] = log_add(acc[lab], a + b - lp.at(t, lab));
    }
    for (int k = 0; k < vocab; ++k) {
      if (acc[k] != kLogZero) res.grad.at(t, k) = -std::exp(acc[k] - log_p);
    }
  }
  return res;
}

double ctc_loss(const Mat& lp, const TokenSequence& target) {
  return ctc_forward_backward(lp, target, false).loss;
}

Var ctc_loss_var(const Var& lp, const TokenSequence& target) {
  CtcResult res = ctc_forward_backward(lp->val, target, grad_enabled() && lp->requires_grad);
  Mat out(1, 1);
  out.at(0, 0) = res.loss;
  Var n = std::make_shared<Node>(std::move(out));
  if (grad_enabled() && lp->requires_grad && res.feasible) {
    n->requires_grad = true;
    n->parents = {lp};
    Node* np = n.get();
    Node* xp = lp.get();
    auto grad_keep = std::make_shared<Mat>(std::move(res.grad));
    n->backprop = [np, xp, grad_keep]() {
      xp->ensure_grad();
      axpy_inplace(xp->grad, np->grad.at(0, 0), *grad_keep);
    };
  }
  return n;
}

TokenFrameSequence greedy_alignment(const Mat& lp) {
  TokenFrameSequence out(lp.rows);
  for (int t = 0; t < lp.rows; ++t) {
    int best = 0;
    for (int k = 1; k < lp.cols; ++k) {
      if (lp.at(t, k) > lp.at(t, best)) best = k;
    }
    out[t] = best;
  }
  return out;
}

TokenSequence collapse_alignment(const TokenFrameSequence& alignment) {
  TokenSequence out;
  int prev = -1;
  for (int id : alignment) {
    if (id != prev && id != kBlankId) out.push_back(id);
    prev = id;
  }
  return out;
}

TokenSequence greedy_decode(const Mat& lp) { return collapse_alignment(greedy_alignment(lp)); }

PermutationAssignment pit_assign(const Mat& loss_matrix) {
  if (loss_matrix.rows != loss_matrix.cols || loss_matrix.rows < 1) {
    throw ShapeError("pit_assign: matrix must be square and non-empty");
  }
  const int j = loss_matrix.rows;
  if (j > 8) throw ConfigError("pit_assign: exhaustive search capped at 8 outputs");

  std::vector<int> perm(j);
  std::iota(perm.begin(), perm.end(), 0);

  PermutationAssignment best;
  best.total_loss = std::numeric_limits<double>::infinity();
  // next_permutation walks lexicographically from the identity, and strict <
  // keeps the first optimum, so ties resolve to the smallest permutation.
  do {
    double total = 0.0;
    for (int row = 0; row < j; ++row) total += loss_matrix.at(row, perm[row]);
    if (total < best.total_loss) {
      best.total_loss = total;
      best.perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  if (!std::isfinite(best.total_loss)) {
    throw ConfigError("pit_assign: every permutation is infeasible");
  }
  return best;
}

double combined_loss(const std::vector<double>& final_ctc, const std::vector<double>& inter_ctc,
                     double lambda) {
  if (final_ctc.size() != inter_ctc.size()) {
    throw ShapeError("combined_loss: list lengths differ");
  }
  double total = 0.0;
  for (size_t i = 0; i < final_ctc.size(); ++i) {
    total += (1.0 - lambda) * final_ctc[i] + lambda * inter_ctc[i];
  }
  return total;
}

}  // namespace mixasr
