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

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mixasr/autograd.hpp"
#include "mixasr/corpus.hpp"
#include "mixasr/ctc.hpp"
#include "mixasr/encoder.hpp"
#include "mixasr/types.hpp"

namespace mixasr {

// How the previous step's output conditions the next step: the hidden
// sequence itself, or an embedding of its frame-level greedy alignment.
enum class ConditionMode { kSoft, kHard };

// Speaker-target assignment: joint minimization over full permutations of
// the final-layer CTC cost matrix, or greedy per-step matching.
enum class AssignmentMode { kJoint, kGreedyPerStep };

std::string to_string(ConditionMode m);
std::string to_string(AssignmentMode m);
ConditionMode parse_condition_mode(const std::string& s);
AssignmentMode parse_assignment_mode(const std::string& s);

struct ChainConfig {
  int lstm_hidden = 128;
  ConditionMode condition_mode = ConditionMode::kSoft;

  void validate() const;
};

// One chain step: final and intermediate hidden sequences, the CTC
// log-probabilities computed from each, and the frame-level greedy alignment
// of the final output.
struct StepOutput {
  Var g;
  Var h_inter;
  Var log_probs;
  Var log_probs_inter;
  TokenFrameSequence alignment;
};

// Incremental decode state: the mixture encoding, the LSTM state carried
// across speaker steps, and the previous step's output.
struct ChainCursor {
  Var mix;
  Var h, c;
  bool has_prev = false;
  StepOutput prev;
  int steps_taken = 0;
};

// Conditional-chain recognizer. The mixture is encoded once; each speaker
// step feeds [mixture encoding ; condition] through a per-frame LSTM cell
// whose state is carried across steps, then through the shared recognition
// encoder and CTC head. The first step is conditioned on all zeros; later
// steps are conditioned on the model's own previous output, never on
// reference targets.
class ChainModel {
 public:
  ChainModel(const EncoderConfig& enc_cfg, const ChainConfig& chain_cfg, int vocab_size,
             uint64_t seed);

  ChainCursor start(const Var& features) const;
  StepOutput step(ChainCursor& cursor, Rng* dropout_rng = nullptr) const;

  // Runs `steps` chain steps. The recognition encoder is invoked exactly
  // `steps` times with identical shared parameters.
  std::vector<StepOutput> forward(const Var& features, int steps,
                                  Rng* dropout_rng = nullptr) const;

  ParamRegistry& params() { return reg_; }
  const ParamRegistry& params() const { return reg_; }
  const EncoderConfig& encoder_config() const { return enc_cfg_; }
  const ChainConfig& chain_config() const { return chain_cfg_; }
  int vocab_size() const { return vocab_size_; }

  MixtureEncoder encoder_mix;
  RecognitionEncoder encoder_rec;
  CtcHead head;

 private:
  Var lstm_cell(const Var& x, Var& h, Var& c) const;
  Var condition_from(const StepOutput& prev) const;

  EncoderConfig enc_cfg_;
  ChainConfig chain_cfg_;
  int vocab_size_ = 0;
  ParamRegistry reg_;

  Var lstm_wx_, lstm_wh_, lstm_b_;
  Linear lstm_proj_;
  Var cond_embed_;  // hard mode only
  Linear cond_mlp_in_, cond_mlp_out_;
};

struct ChainLoss {
  Var total;
  double final_ctc = 0.0;
  double inter_ctc = 0.0;
  std::vector<int> permutation;  // step j recognized targets[permutation[j]]
};

// Permutation-invariant chain loss: the assignment is chosen on final-layer
// CTC costs and reused for the intermediate loss. With `stop_step` an extra
// step with an empty target is appended after the assigned steps.
ChainLoss chain_pit_loss(const ChainModel& model, const Var& features,
                         const std::vector<TokenSequence>& targets, double lambda_inter,
                         bool stop_step, AssignmentMode mode, Rng* dropout_rng = nullptr);

// Non-chain baseline: J speaker-differentiating encoder stacks in parallel
// between the shared mixture and recognition encoders. Handles exactly the
// speaker count it was built with.
class PitParallelModel {
 public:
  PitParallelModel(const EncoderConfig& enc_cfg, int n_branches, int vocab_size, uint64_t seed);

  std::vector<Var> forward(const Var& features, int n_speakers,
                           Rng* dropout_rng = nullptr) const;
  ParamRegistry& params() { return reg_; }
  int n_branches() const { return static_cast<int>(branches_.size()); }

  MixtureEncoder encoder_mix;
  RecognitionEncoder encoder_rec;
  CtcHead head;

 private:
  EncoderConfig enc_cfg_;
  int vocab_size_ = 0;
  ParamRegistry reg_;
  std::vector<std::vector<ConformerBlock>> branches_;
};

struct ParallelLoss {
  Var total;
  std::vector<int> permutation;
};

ParallelLoss parallel_pit_loss(const PitParallelModel& model, const Var& features,
                               const std::vector<TokenSequence>& targets,
                               Rng* dropout_rng = nullptr);

struct TrainConfig {
  double learning_rate = 2e-3;  // peak rate after warmup
  int warmup_steps = 50;
  int batch_size = 8;
  int epochs = 20;
  double lambda_inter = 0.1;
  double grad_clip = 5.0;
  AssignmentMode assignment_mode = AssignmentMode::kJoint;
  bool stop_step = true;
  uint64_t seed = 1;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;     // mean total loss per mixture
  double ctc_loss = 0.0;       // mean final-layer CTC component
  double interctc_loss = 0.0;  // mean intermediate component
  double dev_wer = -1.0;       // -1 when no dev set was given
  std::map<std::string, int64_t> permutation_histogram;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  int64_t optimizer_steps = 0;
};

// Adam with inverse-square-root warmup over a parameter registry.
class AdamOptimizer {
 public:
  AdamOptimizer(ParamRegistry& reg, double peak_lr, int warmup_steps);
  void step();
  int64_t steps_taken() const { return t_; }
  double current_lr() const;

 private:
  ParamRegistry& reg_;
  double peak_lr_;
  int warmup_steps_;
  int64_t t_ = 0;
  std::vector<Mat> m_, v_;
};

// Clips all gradients in the registry to a global L2 norm; returns the norm
// before clipping.
double clip_grad_norm(ParamRegistry& reg, double max_norm);

// Trains in place. Metrics are appended per epoch to `metrics_path` as JSON
// lines when the path is nonempty. Diverging losses (NaN or infinity) abort
// with an exception naming the offending batch.
TrainResult train_chain(ChainModel& model, const LoadedCorpus& train_corpus,
                        const LoadedCorpus* dev_corpus, const TrainConfig& cfg,
                        const std::string& metrics_path = "",
                        const std::function<void(const EpochMetrics&)>& on_epoch = nullptr);

// Greedy fixed-step decode used for dev scoring; one hypothesis per step.
std::vector<TokenSequence> greedy_chain_decode(const ChainModel& model, const Var& features,
                                               int steps);

}  // namespace mixasr
