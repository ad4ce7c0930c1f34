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

#include <limits>
#include <vector>

#include "mixasr/autograd.hpp"
#include "mixasr/types.hpp"

namespace mixasr {

// All CTC arithmetic is done in log space; this is the -inf sentinel.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// Loss of aligning `lp` (T x V per-frame log-probabilities, blank = column 0)
// to `target`, in nats. Infeasible targets (extended-label lattice longer
// than the frame count allows) yield loss = +inf with feasible = false.
struct CtcResult {
  double loss = 0.0;
  bool feasible = true;
  Mat grad;  // d loss / d lp, T x V; only filled on request for feasible targets
};

CtcResult ctc_forward_backward(const Mat& lp, const TokenSequence& target, bool want_grad);

double ctc_loss(const Mat& lp, const TokenSequence& target);

// Autograd wrapper. The gradient w.r.t. lp treats every entry as a free
// variable; normalization pressure comes from the upstream log-softmax.
Var ctc_loss_var(const Var& lp, const TokenSequence& target);

// Per-frame argmax ids, uncollapsed (length T). Ties break toward the lowest
// index, which favors blank.
TokenFrameSequence greedy_alignment(const Mat& lp);

// Collapse repeats, then drop blanks.
TokenSequence collapse_alignment(const TokenFrameSequence& alignment);

// greedy_decode == collapse(greedy_alignment).
TokenSequence greedy_decode(const Mat& lp);

// Best output-to-reference assignment: perm[j] = reference index for output j.
struct PermutationAssignment {
  std::vector<int> perm;
  double total_loss = 0.0;
};

// Exhaustive argmin over all permutations of sum_j M[j][perm[j]].
// Deterministic tie-break: the lexicographically smallest permutation wins.
// Throws ConfigError if every permutation has infinite total.
PermutationAssignment pit_assign(const Mat& loss_matrix);

// sum_j ((1-lambda) * final[j] + lambda * inter[j]); lists must be aligned
// under the chosen permutation and of equal length.
double combined_loss(const std::vector<double>& final_ctc, const std::vector<double>& inter_ctc,
                     double lambda);

}  // namespace mixasr
