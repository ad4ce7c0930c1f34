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

#include "mixasr/mat.hpp"

#include <cmath>
#include <stdexcept>

namespace mixasr {

Mat Mat::full(int r, int c, double value) {
  Mat m(r, c);
  for (auto& x : m.v) x = value;
  return m;
}

// No zero-skip in the inner loops: a data-dependent branch makes runtime a
// function of operand values (zero-state chain steps would look cheaper than
// steady-state ones) and silently turns 0 * inf into 0 instead of NaN.
Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
  Mat out(a.rows, b.cols);
  const int n = b.cols;
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.v[static_cast<size_t>(i) * a.cols];
    double* orow = &out.v[static_cast<size_t>(i) * n];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = &b.v[static_cast<size_t>(k) * n];
      for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: row counts differ");
  Mat out(a.cols, b.cols);
  const int n = b.cols;
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = &a.v[static_cast<size_t>(k) * a.cols];
    const double* brow = &b.v[static_cast<size_t>(k) * n];
    for (int i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      double* orow = &out.v[static_cast<size_t>(i) * n];
      for (int j = 0; j < n; ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: col counts differ");
  Mat out(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.v[static_cast<size_t>(i) * a.cols];
    double* orow = &out.v[static_cast<size_t>(i) * b.rows];
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = &b.v[static_cast<size_t>(j) * b.cols];
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      orow[j] = acc;
    }
  }
  return out;
}

void add_inplace(Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add_inplace: shape mismatch");
  for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

void axpy_inplace(Mat& a, double s, const Mat& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("axpy_inplace: shape mismatch");
  for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += s * b.v[i];
}

uint64_t Rng::next_u64() {
  // splitmix64 (Steele, Lea, Flood 2014); public-domain reference constants.
  state_ += 0x9E3779B97F4A7C15ull;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

int Rng::uniform_int(int lo, int hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
  const uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
  return lo + static_cast<int>(next_u64() % span);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

uint64_t Rng::mix(uint64_t base, uint64_t stream) {
  Rng r(base ^ (0xD1B54A32D192ED03ull * (stream + 1)));
  return r.next_u64();
}

}  // namespace mixasr
