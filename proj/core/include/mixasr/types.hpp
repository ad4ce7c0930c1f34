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

#include <stdexcept>
#include <string>
#include <vector>

#include "mixasr/mat.hpp"

namespace mixasr {

// Vocabulary indices, blank excluded. Index 0 is reserved for the CTC blank
// everywhere in this codebase.
using TokenSequence = std::vector<int>;

// Per-frame label ids straight from the lattice/argmax, blanks included.
using TokenFrameSequence = std::vector<int>;

inline constexpr int kBlankId = 0;

// Time-major acoustic frames (T x D).
struct FeatureSequence {
  Mat frames;
  int valid_length = 0;

  FeatureSequence() = default;
  explicit FeatureSequence(Mat f) : frames(std::move(f)), valid_length(frames.rows) {}
};

// One mixture with its per-speaker sources, transcripts and SNRs.
struct MixtureSample {
  std::string id;
  FeatureSequence mixture;
  std::vector<FeatureSequence> sources;
  std::vector<TokenSequence> transcripts;
  std::vector<double> snrs_db;
  int num_speakers = 0;
};

// Thrown for bad configuration / CLI validation problems (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when tensor shapes or sequence lengths do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mixasr
