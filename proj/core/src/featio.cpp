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

#include "mixasr/featio.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mixasr {

namespace {

static_assert(std::endian::native == std::endian::little,
              "FSEQ I/O assumes a little-endian host");

void put_u32(std::ofstream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t get_u32(std::ifstream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void write_fseq(const std::string& path, const FeatureSequence& seq) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_fseq: cannot open " + path);
  out.write("FSEQ", 4);
  put_u32(out, kFseqVersion);
  put_u32(out, static_cast<uint32_t>(seq.frames.rows));
  put_u32(out, static_cast<uint32_t>(seq.frames.cols));
  std::vector<float> buf(seq.frames.v.size());
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(seq.frames.v[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write_fseq: short write to " + path);
}

FeatureSequence read_fseq(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_fseq: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "FSEQ", 4) != 0) {
    throw std::runtime_error("read_fseq: bad magic in " + path);
  }
  const uint32_t version = get_u32(in);
  if (version != kFseqVersion) {
    throw std::runtime_error("read_fseq: unsupported version in " + path);
  }
  const uint32_t t = get_u32(in);
  const uint32_t d = get_u32(in);
  std::vector<float> buf(static_cast<size_t>(t) * d);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw std::runtime_error("read_fseq: truncated data in " + path);
  FeatureSequence seq{Mat(static_cast<int>(t), static_cast<int>(d))};
  for (size_t i = 0; i < buf.size(); ++i) seq.frames.v[i] = static_cast<double>(buf[i]);
  seq.valid_length = static_cast<int>(t);
  return seq;
}

}  // namespace mixasr
