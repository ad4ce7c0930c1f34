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

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mixasr/types.hpp"

namespace mixasr {

// Character-level vocabulary. Index 0 is the CTC blank; real symbols start
// at 1 in lexicographic order.
struct Vocab {
  std::vector<std::string> symbols;

  int size() const { return static_cast<int>(symbols.size()); }
  int blank_id() const { return kBlankId; }
  int id_of(char ch) const;  // -1 if unknown
};

Vocab build_vocab(const std::vector<std::string>& transcript_corpus);
TokenSequence tokenize(const std::string& text, const Vocab& vocab);
std::string detokenize(const TokenSequence& tokens, const Vocab& vocab);

// Knobs for one synthetic single-speaker utterance. Every vocabulary token
// owns a prototype vector seeded by `seed`; frames are prototype + Gaussian
// noise and each token lasts a random number of frames.
struct SourceSpec {
  uint64_t seed = 1;
  int n_tokens_min = 2;
  int n_tokens_max = 5;
  int frames_per_token_min = 6;
  int frames_per_token_max = 9;
  int feat_dim = 16;
  double noise_std = 0.1;
  double prototype_std = 1.0;

  void validate() const;
};

Mat token_prototype(const SourceSpec& spec, int token_id);

struct SynthResult {
  FeatureSequence features;
  TokenSequence transcript;
};

SynthResult synth_source(const SourceSpec& spec, const Vocab& vocab, uint64_t rng_seed);

// Scales every non-reference source so its power sits snrs_db[i] dB below
// the first source (scale_1 = 1), zero-pads to the longest source and sums.
FeatureSequence mix_at_snr(const std::vector<FeatureSequence>& sources,
                           const std::vector<double>& snrs_db);

inline constexpr int kMaxSpeakers = 4;

struct CorpusConfig {
  uint64_t seed = 1;
  std::string alphabet = "abcdef";
  SourceSpec source;  // source.seed is derived from `seed` at generation time
  double snr_min_db = 0.0;
  double snr_max_db = 10.0;
  // One SNR draw per non-reference source (true) or one shared draw per
  // mixture (false).
  bool snr_per_source = true;
  double frame_shift_s = 0.01;
  // counts[split][j] = number of mixtures with j speakers (j in 1..kMaxSpeakers).
  std::array<std::array<int, kMaxSpeakers + 1>, 3> counts{};

  void validate() const;
};

inline constexpr const char* kSplitNames[3] = {"train", "dev", "test"};

// Writes vocab.json, meta.json, {train,dev,test}.jsonl and feats/*.fseq under
// out_dir. Byte-identical output for identical (config, seed).
void generate_corpus(const CorpusConfig& cfg, const std::string& out_dir);

// A manifest line plus lazily loadable feature paths.
struct ManifestEntry {
  std::string id;
  int num_speakers = 0;
  std::vector<double> snrs_db;
  std::string mixture_path;  // relative to the manifest directory
  std::vector<std::string> source_paths;
  std::vector<std::string> transcripts;
};

struct LoadedCorpus {
  std::string dir;
  Vocab vocab;
  double frame_shift_s = 0.01;
  int feat_dim = 0;
  std::vector<ManifestEntry> entries;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
LoadedCorpus load_corpus(const std::string& dir, const std::string& split);
Vocab read_vocab(const std::string& path);
FeatureSequence load_entry_mixture(const LoadedCorpus& corpus, const ManifestEntry& entry);
std::vector<int> entry_source_lengths(const LoadedCorpus& corpus, const ManifestEntry& entry);

}  // namespace mixasr
