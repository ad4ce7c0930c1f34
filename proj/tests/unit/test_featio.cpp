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

#include <fstream>
#include <string>

#include "doctest.h"
#include "testutil.hpp"

using mixasr::FeatureSequence;
using mixasr::Mat;

TEST_CASE("fseq round-trips through float32 storage") {
  mixtest::TempDir dir("mixasr-fseq");
  mixasr::Rng rng(41);
  FeatureSequence seq{mixtest::random_mat(13, 5, rng, 3.0)};
  const std::string path = (dir / "x.fseq").string();

  mixasr::write_fseq(path, seq);
  FeatureSequence back = mixasr::read_fseq(path);

  REQUIRE(back.frames.rows == 13);
  REQUIRE(back.frames.cols == 5);
  CHECK(back.valid_length == 13);
  for (size_t i = 0; i < seq.frames.size(); ++i) {
    // Written as float32: reading back must give exactly the rounded value.
    CHECK(back.frames.v[i] == static_cast<double>(static_cast<float>(seq.frames.v[i])));
  }

  // Byte-stable: writing the same sequence twice produces identical files.
  const std::string path2 = (dir / "y.fseq").string();
  mixasr::write_fseq(path2, seq);
  CHECK(mixtest::read_file(path) == mixtest::read_file(path2));
}

TEST_CASE("read_fseq rejects missing and malformed files") {
  mixtest::TempDir dir("mixasr-fseq-bad");
  CHECK_THROWS(mixasr::read_fseq((dir / "absent.fseq").string()));

  const std::string bad_magic = (dir / "bad_magic.fseq").string();
  {
    std::ofstream out(bad_magic, std::ios::binary);
    out << "NOPE" << std::string(64, '\0');
  }
  CHECK_THROWS(mixasr::read_fseq(bad_magic));

  // Valid header, truncated payload.
  mixasr::Rng rng(42);
  FeatureSequence seq{mixtest::random_mat(8, 4, rng)};
  const std::string truncated = (dir / "short.fseq").string();
  mixasr::write_fseq(truncated, seq);
  std::string bytes = mixtest::read_file(truncated);
  {
    std::ofstream out(truncated, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
  }
  CHECK_THROWS(mixasr::read_fseq(truncated));
}
