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
#include <string>

#include "mixasr/chain.hpp"
#include "mixasr/corpus.hpp"
#include "mixasr/encoder.hpp"
#include "mixasr/infer.hpp"

namespace mixasr {

// Everything a run needs, grouped by INI section.
struct RunConfig {
  CorpusConfig corpus;
  EncoderConfig encoder;
  ChainConfig chain;
  TrainConfig train;
  DecodePolicy decode_policy = DecodePolicy::kAdaptive;
  int max_speakers = kMaxSpeakers;
  int fixed_steps = 0;  // 0: fixed decoding uses each entry's reference count
  int rtf_repeats = 5;

  void validate() const;
};

// "tiny" is sized for fast experiments and tests; "paper" matches the
// reference system dimensions.
RunConfig make_preset(const std::string& name);

// INI dialect: [section] headers, key = value pairs, '#' or ';' comments.
// Unknown sections or keys are errors. Values overlay `base`.
RunConfig parse_ini(const std::string& text, RunConfig base);
RunConfig load_config_file(const std::string& path, RunConfig base);

// Canonical echo: sections and keys in a fixed order, so that
// parse_ini(to_ini(c)) == c and equal configs serialize identically.
std::string to_ini(const RunConfig& cfg);

// FNV-1a over the canonical echo.
uint64_t config_hash(const RunConfig& cfg);
uint64_t fnv1a64(const std::string& text);

}  // namespace mixasr
