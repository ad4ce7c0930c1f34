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
#include <vector>

namespace mixasr {

// Dense row-major matrix of doubles. Time-major sequences are stored as
// (frames x dims). All training numerics run in 64-bit.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return v.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  static Mat zeros(int r, int c) { return Mat(r, c); }
  static Mat full(int r, int c, double value);
};

Mat matmul(const Mat& a, const Mat& b);
// a^T * b without materializing the transpose.
Mat matmul_tn(const Mat& a, const Mat& b);
// a * b^T without materializing the transpose.
Mat matmul_nt(const Mat& a, const Mat& b);

void add_inplace(Mat& a, const Mat& b);
void axpy_inplace(Mat& a, double s, const Mat& b);  // a += s * b

// Deterministic, platform-stable PRNG (splitmix64 core). The standard
// <random> distributions are implementation-defined, so every draw used for
// data generation or parameter init goes through this class to keep outputs
// bit-identical across platforms and runs.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);
  // Inclusive on both ends.
  int uniform_int(int lo, int hi);
  // Standard normal via Box-Muller (cached spare).
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    // Fisher-Yates; std::shuffle is not reproducible across stdlibs.
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Derives an independent stream seed from (base, stream). Used to give
  // every corpus sample / source its own seed.
  static uint64_t mix(uint64_t base, uint64_t stream);

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mixasr
