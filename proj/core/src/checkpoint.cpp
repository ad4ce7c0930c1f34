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

#include "mixasr/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mixasr {

namespace {

constexpr char kMagic[4] = {'M', 'X', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t get_u32(std::istream& in, const char* what) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error(std::string("checkpoint: truncated reading ") + what);
  return v;
}

uint64_t get_u64(std::istream& in, const char* what) {
  uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error(std::string("checkpoint: truncated reading ") + what);
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const std::string& config_json,
                      const ParamRegistry& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u64(out, config_json.size());
  out.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
  put_u32(out, static_cast<uint32_t>(params.items().size()));
  for (const auto& [name, p] : params.items()) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<uint32_t>(p->val.rows));
    put_u32(out, static_cast<uint32_t>(p->val.cols));
    out.write(reinterpret_cast<const char*>(p->val.v.data()),
              static_cast<std::streamsize>(p->val.v.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const uint32_t version = get_u32(in, "version");
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ckpt;
  const uint64_t blob_len = get_u64(in, "config length");
  ckpt.config_json.resize(blob_len);
  if (!in.read(ckpt.config_json.data(), static_cast<std::streamsize>(blob_len)))
    throw std::runtime_error("checkpoint: truncated config blob in " + path);

  const uint32_t n_tensors = get_u32(in, "tensor count");
  ckpt.tensors.reserve(n_tensors);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    const uint32_t name_len = get_u32(in, "tensor name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len))
      throw std::runtime_error("checkpoint: truncated tensor name in " + path);
    const uint32_t rows = get_u32(in, "tensor rows");
    const uint32_t cols = get_u32(in, "tensor cols");
    Mat m(static_cast<int>(rows), static_cast<int>(cols));
    if (!in.read(reinterpret_cast<char*>(m.v.data()),
                 static_cast<std::streamsize>(m.v.size() * sizeof(double))))
      throw std::runtime_error("checkpoint: truncated tensor data for " + name);
    ckpt.tensors.emplace_back(std::move(name), std::move(m));
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, ParamRegistry& params) {
  if (ckpt.tensors.size() != params.items().size())
    throw std::runtime_error("checkpoint: tensor count " + std::to_string(ckpt.tensors.size()) +
                             " does not match model parameter count " +
                             std::to_string(params.items().size()));
  for (const auto& [name, m] : ckpt.tensors) {
    Var p = params.find(name);
    if (p->val.rows != m.rows || p->val.cols != m.cols)
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    p->val = m;
  }
}

namespace {

nlohmann::ordered_json encoder_config_to_json(const EncoderConfig& cfg) {
  nlohmann::ordered_json j;
  j["feat_dim"] = cfg.feat_dim;
  j["d_model"] = cfg.d_model;
  j["n_heads"] = cfg.n_heads;
  j["d_ff"] = cfg.d_ff;
  j["n_layers_rec"] = cfg.n_layers_rec;
  j["intermediate_layer"] = cfg.intermediate_layer;
  j["n_layers_sd"] = cfg.n_layers_sd;
  j["conv_kernel"] = cfg.conv_kernel;
  j["dropout"] = cfg.dropout;
  return j;
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig cfg;
  cfg.feat_dim = j.at("feat_dim").get<int>();
  cfg.d_model = j.at("d_model").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.d_ff = j.at("d_ff").get<int>();
  cfg.n_layers_rec = j.at("n_layers_rec").get<int>();
  cfg.intermediate_layer = j.at("intermediate_layer").get<int>();
  cfg.n_layers_sd = j.at("n_layers_sd").get<int>();
  cfg.conv_kernel = j.at("conv_kernel").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  return cfg;
}

nlohmann::ordered_json chain_config_to_json(const ChainConfig& cfg) {
  nlohmann::ordered_json j;
  j["lstm_hidden"] = cfg.lstm_hidden;
  j["condition_mode"] = to_string(cfg.condition_mode);
  return j;
}

ChainConfig chain_config_from_json(const nlohmann::json& j) {
  ChainConfig cfg;
  cfg.lstm_hidden = j.at("lstm_hidden").get<int>();
  cfg.condition_mode = parse_condition_mode(j.at("condition_mode").get<std::string>());
  return cfg;
}

}  // namespace

void save_chain_model(const std::string& path, const ChainModel& model,
                      const std::string& extra_json) {
  nlohmann::ordered_json config;
  config["kind"] = "chain";
  config["encoder"] = encoder_config_to_json(model.encoder_config());
  config["chain"] = chain_config_to_json(model.chain_config());
  config["vocab_size"] = model.vocab_size();
  if (!extra_json.empty()) config["extra"] = nlohmann::ordered_json::parse(extra_json);
  write_checkpoint(path, config.dump(), model.params());
}

ChainModel load_chain_model(const std::string& path, std::string* extra_json_out) {
  Checkpoint ckpt = read_checkpoint(path);
  const auto config = nlohmann::json::parse(ckpt.config_json);
  if (config.value("kind", "") != "chain")
    throw std::runtime_error("checkpoint: not a chain model: " + path);
  EncoderConfig enc = encoder_config_from_json(config.at("encoder"));
  ChainConfig chain = chain_config_from_json(config.at("chain"));
  const int vocab_size = config.at("vocab_size").get<int>();
  ChainModel model(enc, chain, vocab_size, 0);
  apply_checkpoint(ckpt, model.params());
  if (extra_json_out != nullptr)
    *extra_json_out = config.contains("extra") ? config.at("extra").dump() : std::string();
  return model;
}

}  // namespace mixasr
