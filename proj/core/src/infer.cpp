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

#include "mixasr/infer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

namespace mixasr {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::string to_string(DecodePolicy p) {
  return p == DecodePolicy::kFixed ? "fixed" : "adaptive";
}

DecodePolicy parse_decode_policy(const std::string& s) {
  if (s == "fixed") return DecodePolicy::kFixed;
  if (s == "adaptive") return DecodePolicy::kAdaptive;
  throw ConfigError("unknown decode policy: " + s);
}

DecodeResult decode_mixture(const ChainModel& model, const Var& features, DecodePolicy policy,
                            int n_steps, const std::string& id) {
  if (n_steps < 1) throw ConfigError("decode: need at least one step");
  NoGradGuard ng;
  DecodeResult result;
  result.id = id;

  const auto t0 = Clock::now();
  ChainCursor cur = model.start(features);
  double last_step_seconds = 0.0;
  bool last_was_terminator = false;
  for (int j = 0; j < n_steps; ++j) {
    const auto ts = Clock::now();
    StepOutput step = model.step(cur);
    TokenSequence hyp = greedy_decode(step.log_probs->val);
    last_step_seconds = elapsed_s(ts);
    ++result.steps_run;
    if (policy == DecodePolicy::kAdaptive && hyp.empty()) {
      result.stopped_by = kStoppedEmpty;
      last_was_terminator = true;
      break;
    }
    result.hypotheses.push_back(std::move(hyp));
  }
  if (result.stopped_by.empty())
    result.stopped_by = policy == DecodePolicy::kFixed ? kStoppedFixed : kStoppedMax;
  result.seconds = elapsed_s(t0);
  result.seconds_excl_stop = result.seconds - (last_was_terminator ? last_step_seconds : 0.0);
  return result;
}

std::vector<DecodeResult> decode_corpus(const ChainModel& model, const LoadedCorpus& corpus,
                                        DecodePolicy policy, int fixed_steps, int max_speakers,
                                        int workers) {
  if (max_speakers < 1) throw ConfigError("decode: max_speakers must be positive");
  if (workers < 1) throw ConfigError("decode: workers must be positive");
  const int n = static_cast<int>(corpus.entries.size());
  std::vector<DecodeResult> results(n);

  auto decode_one = [&](int i) {
    const ManifestEntry& entry = corpus.entries[i];
    FeatureSequence mix = load_entry_mixture(corpus, entry);
    Var x = constant(std::move(mix.frames));
    const int steps = policy == DecodePolicy::kFixed
                          ? (fixed_steps > 0 ? fixed_steps : entry.num_speakers)
                          : max_speakers;
    results[i] = decode_mixture(model, x, policy, steps, entry.id);
  };

  if (workers == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) decode_one(i);
    return results;
  }

  std::atomic<int> next{0};
  auto run = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) decode_one(i);
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min(workers, n);
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  return results;
}

RtfReport measure_rtf(const ChainModel& model, const LoadedCorpus& corpus, DecodePolicy policy,
                      int fixed_steps, int max_speakers, int repeats) {
  if (repeats < 1) throw ConfigError("rtf: repeats must be positive");
  if (corpus.entries.empty()) throw ConfigError("rtf: empty corpus");

  RtfReport report;
  report.utterances = static_cast<int>(corpus.entries.size());
  report.repeats = repeats;

  // Features are held in memory so repeated passes time decoding, not I/O.
  std::vector<Var> features;
  features.reserve(corpus.entries.size());
  for (const auto& entry : corpus.entries) {
    FeatureSequence mix = load_entry_mixture(corpus, entry);
    report.frames += mix.valid_length;
    features.push_back(constant(std::move(mix.frames)));
  }
  report.audio_seconds = static_cast<double>(report.frames) * corpus.frame_shift_s;

  double best = 0.0, best_excl = 0.0, sum = 0.0, sum_excl = 0.0;
  for (int rep = 0; rep < repeats; ++rep) {
    const int64_t calls_before = model.encoder_rec.forward_calls();
    double pass = 0.0, pass_excl = 0.0;
    for (size_t i = 0; i < features.size(); ++i) {
      const int steps = policy == DecodePolicy::kFixed
                            ? (fixed_steps > 0 ? fixed_steps : corpus.entries[i].num_speakers)
                            : max_speakers;
      DecodeResult r = decode_mixture(model, features[i], policy, steps, corpus.entries[i].id);
      pass += r.seconds;
      pass_excl += r.seconds_excl_stop;
    }
    if (rep == 0) report.encoder_calls_per_pass = model.encoder_rec.forward_calls() - calls_before;
    sum += pass;
    sum_excl += pass_excl;
    if (rep == 0 || pass < best) best = pass;
    if (rep == 0 || pass_excl < best_excl) best_excl = pass_excl;
  }
  report.mean_seconds = sum / repeats;
  report.best_seconds = best;
  report.mean_seconds_excl_stop = sum_excl / repeats;
  report.best_seconds_excl_stop = best_excl;
  report.rtf_mean = report.mean_seconds / report.audio_seconds;
  report.rtf_best = report.best_seconds / report.audio_seconds;
  report.rtf_mean_excl_stop = report.mean_seconds_excl_stop / report.audio_seconds;
  report.rtf_best_excl_stop = report.best_seconds_excl_stop / report.audio_seconds;
  return report;
}

}  // namespace mixasr
