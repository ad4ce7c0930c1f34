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
#include <utility>
#include <vector>

#include "mixasr/chain.hpp"
#include "mixasr/encoder.hpp"

namespace mixasr {

// Binary container: "MXCK" magic, format version, a JSON config blob, then
// named double-precision tensors. All integers little-endian.
struct Checkpoint {
  std::string config_json;
  std::vector<std::pair<std::string, Mat>> tensors;
};

void write_checkpoint(const std::string& path, const std::string& config_json,
                      const ParamRegistry& params);
Checkpoint read_checkpoint(const std::string& path);

// Copies tensors into an existing registry. Every registry parameter must be
// present in the checkpoint with a matching shape, and vice versa.
void apply_checkpoint(const Checkpoint& ckpt, ParamRegistry& params);

// Chain-model wrappers. `extra_json`, when nonempty, must be a JSON object;
// it is stored under config["extra"] and handed back verbatim by load.
void save_chain_model(const std::string& path, const ChainModel& model,
                      const std::string& extra_json = "");
ChainModel load_chain_model(const std::string& path, std::string* extra_json_out = nullptr);

}  // namespace mixasr
