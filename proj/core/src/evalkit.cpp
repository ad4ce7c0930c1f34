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

#include "mixasr/evalkit.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mixasr/ctc.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace mixasr {

double EditStats::rate() const {
  if (ref_len > 0) return static_cast<double>(errors()) / static_cast<double>(ref_len);
  return errors() > 0 ? static_cast<double>(errors()) : 0.0;
}

int64_t edit_distance(const TokenSequence& a, const TokenSequence& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int64_t> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

EditStats edit_stats(const TokenSequence& ref, const TokenSequence& hyp) {
  const size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<int64_t>> dp(n + 1, std::vector<int64_t>(m + 1));
  for (size_t i = 0; i <= n; ++i) dp[i][0] = static_cast<int64_t>(i);
  for (size_t j = 0; j <= m; ++j) dp[0][j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const int64_t sub = dp[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      dp[i][j] = std::min({sub, dp[i - 1][j] + 1, dp[i][j - 1] + 1});
    }
  }

  EditStats stats;
  stats.ref_len = static_cast<int64_t>(n);
  stats.degenerate = n == 0 && m > 0;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && dp[i][j] == dp[i - 1][j - 1]) {
      --i;
      --j;
    } else if (i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1] + 1) {
      ++stats.substitutions;
      --i;
      --j;
    } else if (i > 0 && dp[i][j] == dp[i - 1][j] + 1) {
      ++stats.deletions;
      --i;
    } else {
      ++stats.insertions;
      --j;
    }
  }
  return stats;
}

PitWer pit_wer(const std::vector<TokenSequence>& refs, const std::vector<TokenSequence>& hyps) {
  const size_t u = std::max(refs.size(), hyps.size());
  PitWer result;
  if (u == 0) return result;

  auto ref_at = [&](size_t k) -> const TokenSequence& {
    static const TokenSequence empty;
    return k < refs.size() ? refs[k] : empty;
  };
  auto hyp_at = [&](size_t j) -> const TokenSequence& {
    static const TokenSequence empty;
    return j < hyps.size() ? hyps[j] : empty;
  };

  Mat cost(static_cast<int>(u), static_cast<int>(u));
  for (size_t j = 0; j < u; ++j)
    for (size_t k = 0; k < u; ++k)
      cost.at(static_cast<int>(j), static_cast<int>(k)) =
          static_cast<double>(edit_distance(ref_at(k), hyp_at(j)));

  result.perm = pit_assign(cost).perm;
  for (size_t j = 0; j < u; ++j) {
    EditStats pair = edit_stats(ref_at(result.perm[j]), hyp_at(j));
    result.pooled.substitutions += pair.substitutions;
    result.pooled.deletions += pair.deletions;
    result.pooled.insertions += pair.insertions;
    result.pooled.ref_len += pair.ref_len;
    result.per_pair.push_back(pair);
  }
  result.pooled.degenerate = result.pooled.ref_len == 0 && result.pooled.errors() > 0;
  return result;
}

OrderLengthAnalysis order_length_analysis(const std::vector<OrderObservation>& observations) {
  OrderLengthAnalysis out;
  double spearman_sum = 0.0;
  for (const auto& obs : observations) {
    const int j_count = static_cast<int>(obs.refs.size());
    if (j_count < 2 || obs.hyps.size() != obs.refs.size() ||
        obs.source_lengths.size() != obs.refs.size()) {
      ++out.mixtures_skipped;
      continue;
    }

    // Length ranks: longest source first, ties by source index.
    std::vector<int> order(j_count);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (obs.source_lengths[a] != obs.source_lengths[b])
        return obs.source_lengths[a] > obs.source_lengths[b];
      return a < b;
    });
    std::vector<int> rank_of(j_count);
    for (int r = 0; r < j_count; ++r) rank_of[order[r]] = r;

    const std::vector<int> perm = pit_wer(obs.refs, obs.hyps).perm;
    auto [it, inserted] = out.counts_by_j.try_emplace(j_count, Mat::zeros(j_count, j_count));
    Mat& table = it->second;
    double d2 = 0.0;
    for (int j = 0; j < j_count; ++j) {
      const int r = rank_of[perm[j]];
      table.at(j, r) += 1.0;
      d2 += static_cast<double>((j - r) * (j - r));
    }
    const double denom = static_cast<double>(j_count) * (j_count * j_count - 1);
    spearman_sum += 1.0 - 6.0 * d2 / denom;
    ++out.mixtures_used;
  }
  if (out.mixtures_used > 0) out.mean_spearman = spearman_sum / out.mixtures_used;
  for (const auto& [j_count, table] : out.counts_by_j) {
    for (int r = 0; r < table.rows; ++r)
      for (int c = 0; c < table.cols; ++c) {
        const auto n = static_cast<int64_t>(table.at(r, c));
        if (r == c)
          out.diagonal += n;
        else
          out.off_diagonal += n;
      }
  }
  return out;
}

EvalSummary evaluate_decodes(const LoadedCorpus& corpus, const std::vector<DecodeResult>& decodes,
                             const std::string& split, const std::string& policy) {
  std::unordered_map<std::string, const ManifestEntry*> by_id;
  for (const auto& entry : corpus.entries) by_id[entry.id] = &entry;

  EvalSummary summary;
  summary.split = split;
  summary.policy = policy;
  std::vector<OrderObservation> observations;
  observations.reserve(decodes.size());

  for (const auto& decode : decodes) {
    auto it = by_id.find(decode.id);
    if (it == by_id.end())
      throw ConfigError("evaluate: decoded id not in manifest: " + decode.id);
    const ManifestEntry& entry = *it->second;

    std::vector<TokenSequence> refs;
    refs.reserve(entry.transcripts.size());
    for (const auto& t : entry.transcripts) refs.push_back(tokenize(t, corpus.vocab));

    PitWer pw = pit_wer(refs, decode.hypotheses);
    ++summary.utterances;
    summary.errors += pw.pooled.errors();
    summary.ref_tokens += pw.pooled.ref_len;
    JBucket& bucket = summary.by_j[entry.num_speakers];
    bucket.errors += pw.pooled.errors();
    bucket.ref_tokens += pw.pooled.ref_len;
    ++bucket.utterances;
    if (decode.hypotheses.size() != refs.size()) ++summary.j_mismatch;
    for (const auto& pair : pw.per_pair) {
      if (pair.degenerate) {
        ++summary.degenerate;
        break;
      }
    }

    OrderObservation obs;
    obs.source_lengths = entry_source_lengths(corpus, entry);
    obs.refs = std::move(refs);
    obs.hyps = decode.hypotheses;
    observations.push_back(std::move(obs));
  }

  if (summary.ref_tokens > 0)
    summary.wer = static_cast<double>(summary.errors) / static_cast<double>(summary.ref_tokens);
  summary.order = order_length_analysis(observations);
  return summary;
}

namespace {

ordered_json eval_summary_to_json(const EvalSummary& summary) {
  ordered_json j;
  j["split"] = summary.split;
  j["policy"] = summary.policy;
  j["utterances"] = summary.utterances;
  j["errors"] = summary.errors;
  j["ref_tokens"] = summary.ref_tokens;
  j["wer"] = summary.wer;
  ordered_json by_j = ordered_json::object();
  for (const auto& [jc, bucket] : summary.by_j) {
    ordered_json b;
    b["utterances"] = bucket.utterances;
    b["errors"] = bucket.errors;
    b["ref_tokens"] = bucket.ref_tokens;
    b["wer"] = bucket.ref_tokens > 0
                   ? static_cast<double>(bucket.errors) / static_cast<double>(bucket.ref_tokens)
                   : 0.0;
    by_j[std::to_string(jc)] = b;
  }
  j["by_j"] = by_j;
  j["j_mismatch"] = summary.j_mismatch;
  j["degenerate"] = summary.degenerate;

  ordered_json order;
  order["mean_spearman"] = summary.order.mean_spearman;
  order["mixtures_used"] = summary.order.mixtures_used;
  order["mixtures_skipped"] = summary.order.mixtures_skipped;
  order["diagonal"] = summary.order.diagonal;
  order["off_diagonal"] = summary.order.off_diagonal;
  ordered_json tables = ordered_json::object();
  for (const auto& [jc, table] : summary.order.counts_by_j) {
    ordered_json rows = ordered_json::array();
    for (int r = 0; r < table.rows; ++r) {
      ordered_json row = ordered_json::array();
      for (int c = 0; c < table.cols; ++c) row.push_back(static_cast<int64_t>(table.at(r, c)));
      rows.push_back(row);
    }
    tables[std::to_string(jc)] = rows;
  }
  order["tables"] = tables;
  j["order"] = order;
  return j;
}

}  // namespace

void write_eval_summary_json(const std::string& path, const EvalSummary& summary) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write eval summary: " + path);
  out << eval_summary_to_json(summary).dump(2) << "\n";
}

void write_decodes_jsonl(const std::string& path, const std::vector<DecodeResult>& decodes,
                         const Vocab& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write decodes: " + path);
  for (const auto& d : decodes) {
    ordered_json line;
    line["id"] = d.id;
    ordered_json hyps = ordered_json::array();
    for (const auto& h : d.hypotheses) hyps.push_back(detokenize(h, vocab));
    line["hyps"] = hyps;
    line["steps_run"] = d.steps_run;
    line["stopped_by"] = d.stopped_by;
    out << line.dump() << "\n";
  }
}

std::vector<DecodeResult> read_decodes_jsonl(const std::string& path, const Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read decodes: " + path);
  std::vector<DecodeResult> decodes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    DecodeResult d;
    d.id = j.at("id").get<std::string>();
    for (const auto& h : j.at("hyps")) d.hypotheses.push_back(tokenize(h.get<std::string>(), vocab));
    d.steps_run = j.at("steps_run").get<int>();
    d.stopped_by = j.at("stopped_by").get<std::string>();
    decodes.push_back(std::move(d));
  }
  return decodes;
}

namespace {

// Report writer emitting the same rows to a text and a CSV sink.
class ReportSink {
 public:
  void section(const std::string& name) {
    section_ = name;
    txt_ << "\n[" << name << "]\n";
  }
  void row(const std::string& key, const nlohmann::json& value) {
    const std::string v = value.is_string() ? value.get<std::string>() : value.dump();
    txt_ << key << "=" << v << "\n";
    csv_ << "\"" << section_ << "\",\"" << key << "\",\"" << v << "\"\n";
  }
  void write(const std::string& txt_path, const std::string& csv_path) const {
    std::ofstream t(txt_path, std::ios::trunc);
    if (!t) throw std::runtime_error("cannot write report: " + txt_path);
    t << "# mixasr report v1\n" << txt_.str();
    std::ofstream c(csv_path, std::ios::trunc);
    if (!c) throw std::runtime_error("cannot write report: " + csv_path);
    c << "section,key,value\n" << csv_.str();
  }

 private:
  std::string section_;
  std::ostringstream txt_;
  std::ostringstream csv_;
};

std::vector<std::string> sorted_matches(const std::string& dir, const std::string& prefix,
                                        const std::string& suffix) {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& de : fs::directory_iterator(dir, ec)) {
    const std::string name = de.path().filename().string();
    if (name.size() > prefix.size() + suffix.size() && name.rfind(prefix, 0) == 0 &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  return names;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

void render_report(const std::string& run_dir, const std::string& txt_path,
                   const std::string& csv_path) {
  ReportSink sink;

  std::vector<std::string> present, missing;
  auto exists = [&](const std::string& name) {
    if (fs::exists(fs::path(run_dir) / name)) {
      present.push_back(name);
      return true;
    }
    missing.push_back(name);
    return false;
  };

  const bool has_provenance = exists("provenance.json");
  const bool has_metrics = exists("metrics.jsonl");
  const auto eval_files = sorted_matches(run_dir, "eval_", ".json");
  const auto rtf_files = sorted_matches(run_dir, "rtf_", ".json");
  if (eval_files.empty()) missing.push_back("eval_*.json");
  if (rtf_files.empty()) missing.push_back("rtf_*.json");
  for (const auto& f : eval_files) present.push_back(f);
  for (const auto& f : rtf_files) present.push_back(f);

  sink.section("inputs");
  {
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) {
        if (!s.empty()) s += " ";
        s += x;
      }
      return s.empty() ? std::string("none") : s;
    };
    sink.row("present", join(present));
    sink.row("missing", join(missing));
  }

  if (has_provenance) {
    sink.section("provenance");
    const auto j = read_json_file(fs::path(run_dir) / "provenance.json");
    for (auto it = j.begin(); it != j.end(); ++it) sink.row(it.key(), it.value());
  }

  if (has_metrics) {
    std::ifstream in(fs::path(run_dir) / "metrics.jsonl");
    std::string line, last;
    int epochs = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      last = line;
      ++epochs;
    }
    sink.section("training");
    sink.row("epochs", epochs);
    if (!last.empty()) {
      const auto j = nlohmann::json::parse(last);
      sink.row("final_train_loss", j.at("train_loss"));
      sink.row("final_ctc_loss", j.at("ctc_loss"));
      sink.row("final_interctc_loss", j.at("interctc_loss"));
      if (j.contains("dev_wer")) sink.row("final_dev_wer", j.at("dev_wer"));
    }
  }

  for (const auto& name : eval_files) {
    const auto j = read_json_file(fs::path(run_dir) / name);
    const std::string stem = name.substr(5, name.size() - 5 - 5);  // strip eval_ and .json
    sink.section("eval " + stem);
    sink.row("utterances", j.at("utterances"));
    sink.row("wer", j.at("wer"));
    sink.row("errors", j.at("errors"));
    sink.row("ref_tokens", j.at("ref_tokens"));
    sink.row("j_mismatch", j.at("j_mismatch"));
    sink.row("degenerate", j.at("degenerate"));
    for (auto it = j.at("by_j").begin(); it != j.at("by_j").end(); ++it)
      sink.row("wer_j" + it.key(), it.value().at("wer"));
    const auto& order = j.at("order");
    sink.row("order_mean_spearman", order.at("mean_spearman"));
    sink.row("order_mixtures_used", order.at("mixtures_used"));
    sink.row("order_diagonal", order.at("diagonal"));
    sink.row("order_off_diagonal", order.at("off_diagonal"));
    for (auto it = order.at("tables").begin(); it != order.at("tables").end(); ++it)
      sink.row("order_table_j" + it.key(), it.value());
  }

  for (const auto& name : rtf_files) {
    const auto j = read_json_file(fs::path(run_dir) / name);
    const std::string stem = name.substr(4, name.size() - 4 - 5);
    sink.section("rtf " + stem);
    for (auto it = j.begin(); it != j.end(); ++it) sink.row(it.key(), it.value());
  }

  sink.write(txt_path, csv_path);
}

}  // namespace mixasr
