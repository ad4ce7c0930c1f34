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
#include <map>
#include <string>
#include <vector>

#include "mixasr/corpus.hpp"
#include "mixasr/infer.hpp"
#include "mixasr/types.hpp"

namespace mixasr {

struct EditStats {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t ref_len = 0;
  bool degenerate = false;  // empty reference scored against a nonempty hypothesis

  int64_t errors() const { return substitutions + deletions + insertions; }
  // errors / ref_len; an empty reference with errors yields the error count
  // itself so degenerate hypotheses are still penalized.
  double rate() const;
};

int64_t edit_distance(const TokenSequence& a, const TokenSequence& b);
EditStats edit_stats(const TokenSequence& ref, const TokenSequence& hyp);

// Permutation-invariant scoring: hypotheses are assigned to references by
// minimizing total edit distance over all permutations. Unequal counts are
// padded with empty sequences, so missing hypotheses score as deletions and
// surplus ones as insertions.
struct PitWer {
  EditStats pooled;
  std::vector<int> perm;  // perm[j] = reference index for hypothesis j
  std::vector<EditStats> per_pair;
};

PitWer pit_wer(const std::vector<TokenSequence>& refs, const std::vector<TokenSequence>& hyps);

// One decoded mixture, for generation-order analysis.
struct OrderObservation {
  std::vector<int> source_lengths;  // frames per reference source
  std::vector<TokenSequence> refs;
  std::vector<TokenSequence> hyps;  // in generation order
};

// Relates generation order to source length: sources are ranked by length
// (longest first, ties broken by source index) and each chain step is
// credited with the rank of the reference its hypothesis was assigned to.
// Mixtures with one speaker or with a hypothesis-count mismatch are skipped.
struct OrderLengthAnalysis {
  std::map<int, Mat> counts_by_j;  // J -> J x J table, [step][length rank]
  double mean_spearman = 0.0;      // over used mixtures
  int mixtures_used = 0;
  int mixtures_skipped = 0;
  int64_t diagonal = 0;
  int64_t off_diagonal = 0;
};

OrderLengthAnalysis order_length_analysis(const std::vector<OrderObservation>& observations);

struct JBucket {
  int64_t errors = 0;
  int64_t ref_tokens = 0;
  int utterances = 0;
};

struct EvalSummary {
  std::string split;
  std::string policy;
  int utterances = 0;
  int64_t errors = 0;
  int64_t ref_tokens = 0;
  double wer = 0.0;
  std::map<int, JBucket> by_j;  // keyed by reference speaker count
  int j_mismatch = 0;           // entries whose hypothesis count differed from J
  int degenerate = 0;
  OrderLengthAnalysis order;
};

EvalSummary evaluate_decodes(const LoadedCorpus& corpus, const std::vector<DecodeResult>& decodes,
                             const std::string& split, const std::string& policy);

// Serializes a summary to a JSON file with stable key order.
void write_eval_summary_json(const std::string& path, const EvalSummary& summary);

// Hypothesis files: one JSON object per line, transcripts as text. Timing is
// deliberately not serialized so files from identical runs compare equal.
void write_decodes_jsonl(const std::string& path, const std::vector<DecodeResult>& decodes,
                         const Vocab& vocab);
std::vector<DecodeResult> read_decodes_jsonl(const std::string& path, const Vocab& vocab);

// Renders report.txt and report.csv from the artifacts present in run_dir
// (metrics.jsonl, eval_*.json, rtf_*.json, provenance.json). Known artifacts
// that are absent are listed as missing and skipped.
void render_report(const std::string& run_dir, const std::string& txt_path,
                   const std::string& csv_path);

}  // namespace mixasr
