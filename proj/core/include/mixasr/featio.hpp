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

#include "mixasr/types.hpp"

namespace mixasr {

// Flat binary feature file: header {magic "FSEQ", version u32, T u32, D u32},
// then T*D little-endian 32-bit floats, time-major.
inline constexpr uint32_t kFseqVersion = 1;

void write_fseq(const std::string& path, const FeatureSequence& seq);
FeatureSequence read_fseq(const std::string& path);

}  // namespace mixasr
