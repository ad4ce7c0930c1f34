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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"

using mixasr::Mat;
using mixasr::Rng;

TEST_CASE("Mat construction and accessors") {
  Mat m(2, 3);
  CHECK(m.rows == 2);
  CHECK(m.cols == 3);
  CHECK(m.size() == 6);
  for (double v : m.v) CHECK(v == 0.0);

  m.at(1, 2) = 4.5;
  CHECK(m.at(1, 2) == 4.5);
  CHECK(m.v[5] == 4.5);  // row-major layout

  Mat f = Mat::full(2, 2, 7.0);
  for (double v : f.v) CHECK(v == 7.0);
  CHECK(m.same_shape(Mat(2, 3)));
  CHECK_FALSE(m.same_shape(f));
}

TEST_CASE("matmul agrees with a hand-computed product") {
  Mat a(2, 3);
  a.v = {1, 2, 3, 4, 5, 6};
  Mat b(3, 2);
  b.v = {7, 8, 9, 10, 11, 12};

  Mat c = mixasr::matmul(a, b);
  REQUIRE(c.rows == 2);
  REQUIRE(c.cols == 2);
  CHECK(c.at(0, 0) == 58);
  CHECK(c.at(0, 1) == 64);
  CHECK(c.at(1, 0) == 139);
  CHECK(c.at(1, 1) == 154);
}

TEST_CASE("matmul_tn and matmul_nt match explicit transposes") {
  Rng rng(11);
  Mat a(4, 3), b(4, 2), c(2, 3);
  for (auto& v : a.v) v = rng.normal();
  for (auto& v : b.v) v = rng.normal();
  for (auto& v : c.v) v = rng.normal();

  Mat at(3, 4);
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 3; ++k) at.at(k, r) = a.at(r, k);
  Mat ct(3, 2);
  for (int r = 0; r < 2; ++r)
    for (int k = 0; k < 3; ++k) ct.at(k, r) = c.at(r, k);

  Mat tn = mixasr::matmul_tn(a, b);     // a^T b, 3x2
  Mat tn_ref = mixasr::matmul(at, b);
  REQUIRE(tn.same_shape(tn_ref));
  for (size_t i = 0; i < tn.size(); ++i) CHECK(tn.v[i] == doctest::Approx(tn_ref.v[i]));

  Mat nt = mixasr::matmul_nt(a, c);     // a c^T, 4x2
  Mat nt_ref = mixasr::matmul(a, ct);
  REQUIRE(nt.same_shape(nt_ref));
  for (size_t i = 0; i < nt.size(); ++i) CHECK(nt.v[i] == doctest::Approx(nt_ref.v[i]));
}

TEST_CASE("add_inplace and axpy_inplace") {
  Mat a = Mat::full(2, 2, 1.0);
  Mat b = Mat::full(2, 2, 2.0);
  mixasr::add_inplace(a, b);
  for (double v : a.v) CHECK(v == 3.0);
  mixasr::axpy_inplace(a, -1.5, b);
  for (double v : a.v) CHECK(v == 0.0);
}

TEST_CASE("Rng is deterministic per seed and diverges across seeds") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 64; ++i) {
    const uint64_t x = a.next_u64();
    all_equal = all_equal && (x == b.next_u64());
    any_diff = any_diff || (x != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("Rng uniform stays in range; uniform_int hits both ends") {
  Rng rng(7);
  bool lo_hit = false, hi_hit = false;
  for (int i = 0; i < 2000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double s = rng.uniform(-2.0, 3.0);
    CHECK(s >= -2.0);
    CHECK(s < 3.0);
    const int k = rng.uniform_int(1, 4);
    CHECK(k >= 1);
    CHECK(k <= 4);
    lo_hit = lo_hit || k == 1;
    hi_hit = hi_hit || k == 4;
  }
  CHECK(lo_hit);
  CHECK(hi_hit);
}

TEST_CASE("Rng normal has roughly standard moments") {
  Rng rng(5);
  const int n = 20000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("Rng::mix derives distinct deterministic streams") {
  CHECK(Rng::mix(1, 2) == Rng::mix(1, 2));
  CHECK(Rng::mix(1, 2) != Rng::mix(1, 3));
  CHECK(Rng::mix(1, 2) != Rng::mix(2, 2));
}

TEST_CASE("Rng shuffle is a deterministic permutation") {
  std::vector<int> items(20);
  std::iota(items.begin(), items.end(), 0);
  std::vector<int> once = items, twice = items;

  Rng a(9);
  a.shuffle(once);
  Rng b(9);
  b.shuffle(twice);
  CHECK(once == twice);

  std::vector<int> sorted = once;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == items);  // still a permutation
  CHECK(once != items);    // and very likely moved
}
