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

#include "mixasr/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mixasr {

void RunConfig::validate() const {
  corpus.validate();
  encoder.validate();
  chain.validate();
  train.validate();
  if (max_speakers < 1) throw ConfigError("decode: max_speakers must be positive");
  if (fixed_steps < 0) throw ConfigError("decode: fixed_steps must be nonnegative");
  if (rtf_repeats < 1) throw ConfigError("rtf: repeats must be positive");
}

RunConfig make_preset(const std::string& name) {
  RunConfig cfg;
  if (name == "tiny") {
    cfg.corpus.alphabet = "abcdef";
    cfg.corpus.source.n_tokens_min = 2;
    cfg.corpus.source.n_tokens_max = 5;
    cfg.corpus.source.frames_per_token_min = 6;
    cfg.corpus.source.frames_per_token_max = 9;
    cfg.corpus.source.feat_dim = 16;
    cfg.corpus.source.noise_std = 0.1;
    cfg.corpus.counts[0] = {0, 0, 50, 0, 0};
    cfg.corpus.counts[1] = {0, 0, 10, 0, 0};
    cfg.corpus.counts[2] = {0, 0, 10, 0, 0};
    cfg.encoder.feat_dim = 16;
    cfg.encoder.d_model = 64;
    cfg.encoder.n_heads = 4;
    cfg.encoder.d_ff = 128;
    cfg.encoder.n_layers_rec = 4;
    cfg.encoder.intermediate_layer = 2;
    cfg.encoder.n_layers_sd = 2;
    cfg.encoder.conv_kernel = 7;
    cfg.chain.lstm_hidden = 128;
    cfg.train.learning_rate = 2e-3;
    cfg.train.warmup_steps = 50;
    cfg.train.batch_size = 8;
    cfg.train.epochs = 20;
    cfg.rtf_repeats = 3;
    return cfg;
  }
  if (name == "paper") {
    cfg.corpus.alphabet = "abcdef";
    cfg.corpus.source.feat_dim = 16;
    cfg.corpus.counts[0] = {0, 0, 200, 0, 0};
    cfg.corpus.counts[1] = {0, 0, 20, 0, 0};
    cfg.corpus.counts[2] = {0, 0, 20, 0, 0};
    cfg.encoder.feat_dim = 16;
    cfg.encoder.d_model = 256;
    cfg.encoder.n_heads = 4;
    cfg.encoder.d_ff = 2048;
    cfg.encoder.n_layers_rec = 8;
    cfg.encoder.intermediate_layer = 4;
    cfg.encoder.n_layers_sd = 4;
    cfg.encoder.conv_kernel = 15;
    cfg.chain.lstm_hidden = 1024;
    cfg.train.learning_rate = 1e-3;
    cfg.train.warmup_steps = 500;
    cfg.train.batch_size = 16;
    cfg.train.epochs = 50;
    cfg.rtf_repeats = 5;
    return cfg;
  }
  throw ConfigError("unknown preset: " + name + " (expected tiny or paper)");
}

namespace {

struct Setter {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

int64_t parse_int(const std::string& key, const std::string& value) {
  size_t pos = 0;
  int64_t v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": " + value);
  }
  if (pos != value.size()) throw ConfigError("config: bad integer for " + key + ": " + value);
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": " + value);
  }
  if (pos != value.size()) throw ConfigError("config: bad number for " + key + ": " + value);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("config: bad boolean for " + key + ": " + value);
}

// Shortest decimal that round-trips; keeps the canonical echo stable.
std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  for (int prec = 1; prec <= 16; ++prec) {
    char cand[64];
    std::snprintf(cand, sizeof(cand), "%.*g", prec, v);
    std::sscanf(cand, "%lf", &back);
    if (back == v) return cand;
  }
  return buf;
}

using KeyMap = std::map<std::string, std::map<std::string, Setter>>;

const KeyMap& key_map() {
  static const KeyMap map = [] {
    KeyMap m;

    auto add = [&m](const std::string& section, const std::string& key, Setter s) {
      m[section][key] = std::move(s);
    };

    add("corpus", "seed",
        {[](RunConfig& c, const std::string& v) {
           c.corpus.seed = static_cast<uint64_t>(parse_int("corpus.seed", v));
         },
         [](const RunConfig& c) { return std::to_string(c.corpus.seed); }});
    add("corpus", "alphabet",
        {[](RunConfig& c, const std::string& v) { c.corpus.alphabet = v; },
         [](const RunConfig& c) { return c.corpus.alphabet; }});
    add("corpus", "n_tokens_min",
        {[](RunConfig& c, const std::string& v) {
           c.corpus.source.n_tokens_min = static_cast<int>(parse_int("n_tokens_min", v));
         },
         [](const RunConfig& c) { return std::to_string(c.corpus.source.n_tokens_min); }});
    add("corpus", "n_tokens_max",
        {[](RunConfig& c, const std::string& v) {
           c.corpus.source.n_tokens_max = static_cast<int>(parse_int("n_tokens_max", v));
         },
         [](const RunConfig& c) { return std::to_string(c.corpus.source.n_tokens_max); }});
    add("corpus", "frames_per_token_min",
        {[](RunConfig& c, const std::string& v) {
           c.corpus.source.frames_per_token_min =
               static_cast<int>(parse_int("frames_per_token_min", v));
         },
         [](const RunConfig& c) { return std::to_string(c.corpus.source.frames_per_token_min); }});
    add("corpus", "frames_per_token_max",
        {[](RunConfig& c, const std::string& v) {
           c.corpus.source.frames_per_token_max =
               static_cast<int>(parse_int("frames_per_token_max", v));
         },
         [](const RunConfig& c) { return std::to_string(c.corpus.source.frames_per_token_max); }});
    add("corpus", "feat_dim",
        {[](RunConfig& c, const std::string& v) {
           c.corpus.source.feat_dim = static_cast<int>(parse_int("corpus.feat_dim", v));
         },
         [](const RunConfig& c) { return std::to_string(c.corpus.source.feat_dim); }});
    add("corpus", "noise_std",
        {[](RunConfig& c, const std::string& v) {
           c.corpus.source.noise_std = parse_double("noise_std", v);
         },
         [](const RunConfig& c) { return fmt_double(c.corpus.source.noise_std); }});
    add("corpus", "prototype_std",
        {[](RunConfig& c, const std::string& v) {
           c.corpus.source.prototype_std = parse_double("prototype_std", v);
         },
         [](const RunConfig& c) { return fmt_double(c.corpus.source.prototype_std); }});
    add("corpus", "snr_min_db",
        {[](RunConfig& c, const std::string& v) { c.corpus.snr_min_db = parse_double("snr_min_db", v); },
         [](const RunConfig& c) { return fmt_double(c.corpus.snr_min_db); }});
    add("corpus", "snr_max_db",
        {[](RunConfig& c, const std::string& v) { c.corpus.snr_max_db = parse_double("snr_max_db", v); },
         [](const RunConfig& c) { return fmt_double(c.corpus.snr_max_db); }});
    add("corpus", "snr_per_source",
        {[](RunConfig& c, const std::string& v) {
           c.corpus.snr_per_source = parse_bool("snr_per_source", v);
         },
         [](const RunConfig& c) { return c.corpus.snr_per_source ? "true" : "false"; }});
    add("corpus", "frame_shift_s",
        {[](RunConfig& c, const std::string& v) {
           c.corpus.frame_shift_s = parse_double("frame_shift_s", v);
         },
         [](const RunConfig& c) { return fmt_double(c.corpus.frame_shift_s); }});
    for (int split = 0; split < 3; ++split) {
      for (int j = 1; j <= kMaxSpeakers; ++j) {
        const std::string key = std::string(kSplitNames[split]) + "_j" + std::to_string(j);
        add("corpus", key,
            {[split, j, key](RunConfig& c, const std::string& v) {
               c.corpus.counts[split][j] = static_cast<int>(parse_int(key, v));
             },
             [split, j](const RunConfig& c) { return std::to_string(c.corpus.counts[split][j]); }});
      }
    }

    m["encoder"]["feat_dim"] =
        {[](RunConfig& c, const std::string& v) {
           c.encoder.feat_dim = static_cast<int>(parse_int("encoder.feat_dim", v));
         },
         [](const RunConfig& c) { return std::to_string(c.encoder.feat_dim); }};
    m["encoder"]["d_model"] =
        {[](RunConfig& c, const std::string& v) {
           c.encoder.d_model = static_cast<int>(parse_int("d_model", v));
         },
         [](const RunConfig& c) { return std::to_string(c.encoder.d_model); }};
    m["encoder"]["n_heads"] =
        {[](RunConfig& c, const std::string& v) {
           c.encoder.n_heads = static_cast<int>(parse_int("n_heads", v));
         },
         [](const RunConfig& c) { return std::to_string(c.encoder.n_heads); }};
    m["encoder"]["d_ff"] =
        {[](RunConfig& c, const std::string& v) {
           c.encoder.d_ff = static_cast<int>(parse_int("d_ff", v));
         },
         [](const RunConfig& c) { return std::to_string(c.encoder.d_ff); }};
    m["encoder"]["n_layers_rec"] =
        {[](RunConfig& c, const std::string& v) {
           c.encoder.n_layers_rec = static_cast<int>(parse_int("n_layers_rec", v));
         },
         [](const RunConfig& c) { return std::to_string(c.encoder.n_layers_rec); }};
    m["encoder"]["intermediate_layer"] =
        {[](RunConfig& c, const std::string& v) {
           c.encoder.intermediate_layer = static_cast<int>(parse_int("intermediate_layer", v));
         },
         [](const RunConfig& c) { return std::to_string(c.encoder.intermediate_layer); }};
    m["encoder"]["n_layers_sd"] =
        {[](RunConfig& c, const std::string& v) {
           c.encoder.n_layers_sd = static_cast<int>(parse_int("n_layers_sd", v));
         },
         [](const RunConfig& c) { return std::to_string(c.encoder.n_layers_sd); }};
    m["encoder"]["conv_kernel"] =
        {[](RunConfig& c, const std::string& v) {
           c.encoder.conv_kernel = static_cast<int>(parse_int("conv_kernel", v));
         },
         [](const RunConfig& c) { return std::to_string(c.encoder.conv_kernel); }};
    m["encoder"]["dropout"] =
        {[](RunConfig& c, const std::string& v) { c.encoder.dropout = parse_double("dropout", v); },
         [](const RunConfig& c) { return fmt_double(c.encoder.dropout); }};

    m["chain"]["lstm_hidden"] =
        {[](RunConfig& c, const std::string& v) {
           c.chain.lstm_hidden = static_cast<int>(parse_int("lstm_hidden", v));
         },
         [](const RunConfig& c) { return std::to_string(c.chain.lstm_hidden); }};
    m["chain"]["condition_mode"] =
        {[](RunConfig& c, const std::string& v) { c.chain.condition_mode = parse_condition_mode(v); },
         [](const RunConfig& c) { return to_string(c.chain.condition_mode); }};

    m["train"]["learning_rate"] =
        {[](RunConfig& c, const std::string& v) {
           c.train.learning_rate = parse_double("learning_rate", v);
         },
         [](const RunConfig& c) { return fmt_double(c.train.learning_rate); }};
    m["train"]["warmup_steps"] =
        {[](RunConfig& c, const std::string& v) {
           c.train.warmup_steps = static_cast<int>(parse_int("warmup_steps", v));
         },
         [](const RunConfig& c) { return std::to_string(c.train.warmup_steps); }};
    m["train"]["batch_size"] =
        {[](RunConfig& c, const std::string& v) {
           c.train.batch_size = static_cast<int>(parse_int("batch_size", v));
         },
         [](const RunConfig& c) { return std::to_string(c.train.batch_size); }};
    m["train"]["epochs"] =
        {[](RunConfig& c, const std::string& v) {
           c.train.epochs = static_cast<int>(parse_int("epochs", v));
         },
         [](const RunConfig& c) { return std::to_string(c.train.epochs); }};
    m["train"]["lambda_inter"] =
        {[](RunConfig& c, const std::string& v) {
           c.train.lambda_inter = parse_double("lambda_inter", v);
         },
         [](const RunConfig& c) { return fmt_double(c.train.lambda_inter); }};
    m["train"]["grad_clip"] =
        {[](RunConfig& c, const std::string& v) { c.train.grad_clip = parse_double("grad_clip", v); },
         [](const RunConfig& c) { return fmt_double(c.train.grad_clip); }};
    m["train"]["assignment_mode"] =
        {[](RunConfig& c, const std::string& v) {
           c.train.assignment_mode = parse_assignment_mode(v);
         },
         [](const RunConfig& c) { return to_string(c.train.assignment_mode); }};
    m["train"]["stop_step"] =
        {[](RunConfig& c, const std::string& v) { c.train.stop_step = parse_bool("stop_step", v); },
         [](const RunConfig& c) { return c.train.stop_step ? "true" : "false"; }};
    m["train"]["seed"] =
        {[](RunConfig& c, const std::string& v) {
           c.train.seed = static_cast<uint64_t>(parse_int("train.seed", v));
         },
         [](const RunConfig& c) { return std::to_string(c.train.seed); }};

    m["decode"]["policy"] =
        {[](RunConfig& c, const std::string& v) { c.decode_policy = parse_decode_policy(v); },
         [](const RunConfig& c) { return to_string(c.decode_policy); }};
    m["decode"]["max_speakers"] =
        {[](RunConfig& c, const std::string& v) {
           c.max_speakers = static_cast<int>(parse_int("max_speakers", v));
         },
         [](const RunConfig& c) { return std::to_string(c.max_speakers); }};
    m["decode"]["fixed_steps"] =
        {[](RunConfig& c, const std::string& v) {
           c.fixed_steps = static_cast<int>(parse_int("fixed_steps", v));
         },
         [](const RunConfig& c) { return std::to_string(c.fixed_steps); }};

    m["rtf"]["repeats"] =
        {[](RunConfig& c, const std::string& v) {
           c.rtf_repeats = static_cast<int>(parse_int("repeats", v));
         },
         [](const RunConfig& c) { return std::to_string(c.rtf_repeats); }};

    return m;
  }();
  return map;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig parse_ini(const std::string& text, RunConfig base) {
  const KeyMap& keys = key_map();
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("config line " + std::to_string(lineno) +
                                             ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (keys.find(section) == keys.end())
        throw ConfigError("config line " + std::to_string(lineno) + ": unknown section [" +
                          section + "]");
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": key outside any section");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto& section_keys = keys.at(section);
    auto it = section_keys.find(key);
    if (it == section_keys.end())
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key " + section +
                        "." + key);
    it->second.set(base, value);
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_ini(buf.str(), std::move(base));
}

std::string to_ini(const RunConfig& cfg) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, section_keys] : key_map()) {
    if (!first) out << "\n";
    first = false;
    out << "[" << section << "]\n";
    for (const auto& [key, setter] : section_keys) out << key << " = " << setter.get(cfg) << "\n";
  }
  return out.str();
}

uint64_t fnv1a64(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(to_ini(cfg)); }

}  // namespace mixasr
