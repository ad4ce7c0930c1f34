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

#include <string>
#include <vector>

#include "mixasr/chain.hpp"
#include "mixasr/corpus.hpp"

namespace mixasr {

// Fixed: run an externally given number of steps and keep every hypothesis.
// Adaptive: run until a step's greedy output is empty (that terminating
// hypothesis is discarded) or a speaker cap is hit.
enum class DecodePolicy { kFixed, kAdaptive };

std::string to_string(DecodePolicy p);
DecodePolicy parse_decode_policy(const std::string& s);

inline constexpr char kStoppedFixed[] = "fixed_J";
inline constexpr char kStoppedEmpty[] = "empty_output";
inline constexpr char kStoppedMax[] = "max_speakers";

struct DecodeResult {
  std::string id;
  std::vector<TokenSequence> hypotheses;
  int steps_run = 0;  // recognition-encoder passes, terminating step included
  std::string stopped_by;
  double seconds = 0.0;
  double seconds_excl_stop = 0.0;  // without the terminating empty step
};

DecodeResult decode_mixture(const ChainModel& model, const Var& features, DecodePolicy policy,
                            int n_steps, const std::string& id = "");

// Decodes a whole split. Under the fixed policy each entry runs
// `fixed_steps` steps, or its own reference speaker count when fixed_steps
// is 0; under the adaptive policy `max_speakers` caps the chain. Results
// keep manifest order regardless of worker count.
std::vector<DecodeResult> decode_corpus(const ChainModel& model, const LoadedCorpus& corpus,
                                        DecodePolicy policy, int fixed_steps, int max_speakers,
                                        int workers = 1);

struct RtfReport {
  int utterances = 0;
  int64_t frames = 0;
  double audio_seconds = 0.0;
  int repeats = 0;
  double mean_seconds = 0.0;
  double best_seconds = 0.0;
  double mean_seconds_excl_stop = 0.0;
  double best_seconds_excl_stop = 0.0;
  double rtf_mean = 0.0;
  double rtf_best = 0.0;
  double rtf_mean_excl_stop = 0.0;
  double rtf_best_excl_stop = 0.0;
  int64_t encoder_calls_per_pass = 0;
};

// Real-time factor: decode wallclock over audio duration, audio duration
// being frames times the frame shift. The whole split is decoded `repeats`
// times; mean and best pass are both reported, each with and without the
// terminating empty steps of adaptive decoding.
RtfReport measure_rtf(const ChainModel& model, const LoadedCorpus& corpus, DecodePolicy policy,
                      int fixed_steps, int max_speakers, int repeats);

}  // namespace mixasr
