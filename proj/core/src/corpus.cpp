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

#include "mixasr/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mixasr/featio.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace mixasr {

int Vocab::id_of(char ch) const {
  const std::string needle(1, ch);
  for (int i = 1; i < size(); ++i) {
    if (symbols[i] == needle) return i;
  }
  return -1;
}

Vocab build_vocab(const std::vector<std::string>& transcript_corpus) {
  if (transcript_corpus.empty()) throw ConfigError("build_vocab: empty transcript corpus");
  std::set<char> chars;
  for (const auto& line : transcript_corpus) {
    for (char c : line) chars.insert(c);
  }
  if (chars.empty()) throw ConfigError("build_vocab: corpus has no characters");
  Vocab v;
  v.symbols.push_back("<blank>");
  for (char c : chars) v.symbols.emplace_back(1, c);
  return v;
}

TokenSequence tokenize(const std::string& text, const Vocab& vocab) {
  TokenSequence out;
  out.reserve(text.size());
  for (char c : text) {
    const int id = vocab.id_of(c);
    if (id < 0) {
      throw ConfigError(std::string("tokenize: character '") + c + "' unknown to vocabulary");
    }
    out.push_back(id);
  }
  return out;
}

std::string detokenize(const TokenSequence& tokens, const Vocab& vocab) {
  std::string out;
  for (int id : tokens) {
    if (id <= 0 || id >= vocab.size()) {
      throw ConfigError("detokenize: token id out of range");
    }
    out += vocab.symbols[id];
  }
  return out;
}

void SourceSpec::validate() const {
  if (n_tokens_min < 1 || n_tokens_min > n_tokens_max) {
    throw ConfigError("SourceSpec: bad n_tokens range");
  }
  if (frames_per_token_min < 1 || frames_per_token_min > frames_per_token_max) {
    throw ConfigError("SourceSpec: bad frames_per_token range");
  }
  if (feat_dim < 1) throw ConfigError("SourceSpec: feat_dim must be >= 1");
  if (noise_std < 0.0 || prototype_std < 0.0) {
    throw ConfigError("SourceSpec: noise_std and prototype_std must be >= 0");
  }
}

Mat token_prototype(const SourceSpec& spec, int token_id) {
  Rng rng(Rng::mix(spec.seed, 0x70726f74ull + static_cast<uint64_t>(token_id)));
  Mat proto(1, spec.feat_dim);
  for (int d = 0; d < spec.feat_dim; ++d) proto.at(0, d) = spec.prototype_std * rng.normal();
  return proto;
}

namespace {

// The recognizer subsamples time by 4; a target is alignable only if its
// extended CTC lattice (tokens plus forced blanks between adjacent repeats)
// fits into ceil(T/4) frames.
bool ctc_alignable(const TokenSequence& tokens, int total_frames) {
  int required = static_cast<int>(tokens.size());
  for (size_t i = 1; i < tokens.size(); ++i) {
    if (tokens[i] == tokens[i - 1]) ++required;
  }
  const int subsampled = (total_frames + 3) / 4;
  return required <= subsampled;
}

}  // namespace

SynthResult synth_source(const SourceSpec& spec, const Vocab& vocab, uint64_t rng_seed) {
  spec.validate();
  if (vocab.size() < 2) throw ConfigError("synth_source: vocabulary has no real symbols");
  Rng rng(rng_seed);

  SynthResult out;
  std::vector<int> durations;
  int total_frames = 0;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 1000) {
      throw ConfigError("synth_source: cannot draw an alignable token sequence; "
                        "frames_per_token is too short for the token count");
    }
    const int n_tokens = rng.uniform_int(spec.n_tokens_min, spec.n_tokens_max);
    out.transcript.clear();
    durations.assign(n_tokens, 0);
    total_frames = 0;
    for (int i = 0; i < n_tokens; ++i) {
      out.transcript.push_back(rng.uniform_int(1, vocab.size() - 1));
      durations[i] = rng.uniform_int(spec.frames_per_token_min, spec.frames_per_token_max);
      total_frames += durations[i];
    }
    if (ctc_alignable(out.transcript, total_frames)) break;
  }

  Mat frames(total_frames, spec.feat_dim);
  int row = 0;
  for (size_t i = 0; i < out.transcript.size(); ++i) {
    const Mat proto = token_prototype(spec, out.transcript[i]);
    for (int f = 0; f < durations[i]; ++f, ++row) {
      for (int d = 0; d < spec.feat_dim; ++d) {
        frames.at(row, d) = proto.at(0, d) + spec.noise_std * rng.normal();
      }
    }
  }
  out.features = FeatureSequence(std::move(frames));
  return out;
}

namespace {

double mean_power(const FeatureSequence& seq) {
  if (seq.frames.size() == 0) return 0.0;
  double acc = 0.0;
  for (double v : seq.frames.v) acc += v * v;
  return acc / static_cast<double>(seq.frames.size());
}

}  // namespace

FeatureSequence mix_at_snr(const std::vector<FeatureSequence>& sources,
                           const std::vector<double>& snrs_db) {
  if (sources.empty() || sources.size() != snrs_db.size()) {
    throw ShapeError("mix_at_snr: need len(sources) == len(snrs_db) >= 1");
  }
  const int dim = sources[0].frames.cols;
  int max_len = 0;
  std::vector<double> powers(sources.size());
  for (size_t i = 0; i < sources.size(); ++i) {
    if (sources[i].frames.cols != dim) throw ShapeError("mix_at_snr: feature dims differ");
    powers[i] = mean_power(sources[i]);
    if (powers[i] <= 0.0) throw ConfigError("mix_at_snr: source with zero power");
    max_len = std::max(max_len, sources[i].frames.rows);
  }

  FeatureSequence out{Mat(max_len, dim)};
  for (size_t i = 0; i < sources.size(); ++i) {
    const double scale =
        (i == 0) ? 1.0 : std::sqrt(powers[0] / (powers[i] * std::pow(10.0, snrs_db[i] / 10.0)));
    const Mat& src = sources[i].frames;
    for (int r = 0; r < src.rows; ++r) {
      for (int c = 0; c < dim; ++c) out.frames.at(r, c) += scale * src.at(r, c);
    }
  }
  return out;
}

void CorpusConfig::validate() const {
  source.validate();
  if (alphabet.empty()) throw ConfigError("CorpusConfig: empty alphabet");
  if (snr_min_db > snr_max_db) throw ConfigError("CorpusConfig: snr_min_db > snr_max_db");
  if (frame_shift_s <= 0.0) throw ConfigError("CorpusConfig: frame_shift_s must be > 0");
  for (const auto& split : counts) {
    for (int j = 0; j <= kMaxSpeakers; ++j) {
      if (split[j] < 0) throw ConfigError("CorpusConfig: negative sample count");
    }
  }
}

namespace {

MixtureSample make_sample(const CorpusConfig& cfg, const Vocab& vocab, const SourceSpec& spec,
                          const std::string& id, int num_speakers, uint64_t sample_seed) {
  MixtureSample sample;
  sample.id = id;
  sample.num_speakers = num_speakers;

  Rng snr_rng(Rng::mix(sample_seed, 0x736e72ull));
  double shared_snr = 0.0;
  bool shared_drawn = false;
  for (int j = 0; j < num_speakers; ++j) {
    SynthResult src = synth_source(spec, vocab, Rng::mix(sample_seed, 100 + j));
    sample.sources.push_back(std::move(src.features));
    sample.transcripts.push_back(std::move(src.transcript));
    if (j == 0) {
      sample.snrs_db.push_back(0.0);
    } else if (cfg.snr_per_source) {
      sample.snrs_db.push_back(snr_rng.uniform(cfg.snr_min_db, cfg.snr_max_db));
    } else {
      if (!shared_drawn) {
        shared_snr = snr_rng.uniform(cfg.snr_min_db, cfg.snr_max_db);
        shared_drawn = true;
      }
      sample.snrs_db.push_back(shared_snr);
    }
  }
  sample.mixture = mix_at_snr(sample.sources, sample.snrs_db);
  return sample;
}

std::string split_prefix(int split) {
  switch (split) {
    case 0: return "tr";
    case 1: return "dv";
    default: return "te";
  }
}

}  // namespace

void generate_corpus(const CorpusConfig& cfg, const std::string& out_dir) {
  cfg.validate();

  SourceSpec spec = cfg.source;
  spec.seed = Rng::mix(cfg.seed, 0x70726f746full);  // prototype stream

  std::vector<std::string> alphabet_corpus = {cfg.alphabet};
  const Vocab vocab = build_vocab(alphabet_corpus);

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "feats", ec);
  if (ec) throw std::runtime_error("generate_corpus: cannot create " + out_dir);

  {
    ordered_json jv;
    jv["symbols"] = vocab.symbols;
    std::ofstream out(fs::path(out_dir) / "vocab.json");
    if (!out) throw std::runtime_error("generate_corpus: cannot write vocab.json");
    out << jv.dump(2) << "\n";
  }
  {
    ordered_json jm;
    jm["version"] = 1;
    jm["seed"] = cfg.seed;
    jm["alphabet"] = cfg.alphabet;
    jm["feat_dim"] = spec.feat_dim;
    jm["frame_shift_s"] = cfg.frame_shift_s;
    jm["snr_min_db"] = cfg.snr_min_db;
    jm["snr_max_db"] = cfg.snr_max_db;
    jm["snr_per_source"] = cfg.snr_per_source;
    jm["noise_std"] = spec.noise_std;
    jm["prototype_std"] = spec.prototype_std;
    std::ofstream out(fs::path(out_dir) / "meta.json");
    if (!out) throw std::runtime_error("generate_corpus: cannot write meta.json");
    out << jm.dump(2) << "\n";
  }

  for (int split = 0; split < 3; ++split) {
    const fs::path manifest_path = fs::path(out_dir) / (std::string(kSplitNames[split]) + ".jsonl");
    std::ofstream manifest(manifest_path);
    if (!manifest) throw std::runtime_error("generate_corpus: cannot write " + manifest_path.string());

    int index = 0;
    for (int j = 1; j <= kMaxSpeakers; ++j) {
      for (int rep = 0; rep < cfg.counts[split][j]; ++rep, ++index) {
        // Disjoint seed ranges per split: the split tag is folded into the
        // per-sample stream id.
        const uint64_t sample_seed =
            Rng::mix(cfg.seed, (static_cast<uint64_t>(split + 1) << 40) + static_cast<uint64_t>(index));
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "%s-%06d", split_prefix(split).c_str(), index);
        MixtureSample sample = make_sample(cfg, vocab, spec, idbuf, j, sample_seed);

        const std::string mix_rel = "feats/" + sample.id + ".mix.fseq";
        write_fseq((fs::path(out_dir) / mix_rel).string(), sample.mixture);
        std::vector<std::string> source_rels;
        for (int s = 0; s < j; ++s) {
          std::string rel = "feats/" + sample.id + ".s" + std::to_string(s) + ".fseq";
          write_fseq((fs::path(out_dir) / rel).string(), sample.sources[s]);
          source_rels.push_back(std::move(rel));
        }

        ordered_json line;
        line["id"] = sample.id;
        line["J"] = j;
        line["snrs_db"] = sample.snrs_db;
        line["mixture_path"] = mix_rel;
        line["source_paths"] = source_rels;
        ordered_json texts = ordered_json::array();
        for (const auto& toks : sample.transcripts) texts.push_back(detokenize(toks, vocab));
        line["transcripts"] = texts;
        manifest << line.dump() << "\n";
      }
    }
  }
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.num_speakers = j.at("J").get<int>();
    e.snrs_db = j.at("snrs_db").get<std::vector<double>>();
    e.mixture_path = j.at("mixture_path").get<std::string>();
    e.source_paths = j.at("source_paths").get<std::vector<std::string>>();
    e.transcripts = j.at("transcripts").get<std::vector<std::string>>();
    entries.push_back(std::move(e));
  }
  return entries;
}

Vocab read_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_vocab: cannot open " + path);
  nlohmann::json j;
  in >> j;
  Vocab v;
  v.symbols = j.at("symbols").get<std::vector<std::string>>();
  if (v.symbols.size() < 2) throw ConfigError("read_vocab: vocabulary too small");
  return v;
}

LoadedCorpus load_corpus(const std::string& dir, const std::string& split) {
  LoadedCorpus corpus;
  corpus.dir = dir;
  corpus.vocab = read_vocab((fs::path(dir) / "vocab.json").string());
  {
    std::ifstream in(fs::path(dir) / "meta.json");
    if (!in) throw std::runtime_error("load_corpus: cannot open meta.json in " + dir);
    nlohmann::json j;
    in >> j;
    corpus.frame_shift_s = j.at("frame_shift_s").get<double>();
    corpus.feat_dim = j.at("feat_dim").get<int>();
  }
  corpus.entries = read_manifest((fs::path(dir) / (split + ".jsonl")).string());
  return corpus;
}

FeatureSequence load_entry_mixture(const LoadedCorpus& corpus, const ManifestEntry& entry) {
  return read_fseq((fs::path(corpus.dir) / entry.mixture_path).string());
}

std::vector<int> entry_source_lengths(const LoadedCorpus& corpus, const ManifestEntry& entry) {
  std::vector<int> lengths;
  lengths.reserve(entry.source_paths.size());
  for (const auto& rel : entry.source_paths) {
    lengths.push_back(read_fseq((fs::path(corpus.dir) / rel).string()).valid_length);
  }
  return lengths;
}

}  // namespace mixasr
