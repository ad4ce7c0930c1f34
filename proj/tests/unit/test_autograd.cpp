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

#include "mixasr/autograd.hpp"

#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "testutil.hpp"

using mixasr::Mat;
using mixasr::Rng;
using mixasr::Var;

namespace {

// Checks d(sum of op output)/d(each input) against central differences.
// `build` maps freshly wrapped leaves onto the op under test.
double check_op(std::vector<Mat> inputs,
                const std::function<Var(const std::vector<Var>&)>& build, double h = 1e-6) {
  std::vector<Var> leaves;
  for (const auto& m : inputs) leaves.push_back(mixasr::leaf(m));
  Var loss = mixasr::sum_all(build(leaves));
  mixasr::backward(loss);

  auto eval = [&]() {
    std::vector<Var> fresh;
    for (const auto& n : leaves) fresh.push_back(mixasr::constant(n->val));
    return mixasr::sum_all(build(fresh))->val.at(0, 0);
  };

  double worst = 0.0;
  for (auto& n : leaves) {
    worst = std::max(worst, mixtest::max_grad_error(n->val, n->grad, h, eval));
  }
  return worst;
}

}  // namespace

TEST_CASE("backward on elementwise ops matches finite differences") {
  Rng rng(101);
  const Mat a = mixtest::random_mat(3, 4, rng);
  const Mat b = mixtest::random_mat(3, 4, rng);
  const Mat row = mixtest::random_mat(1, 4, rng);

  CHECK(check_op({a, b}, [](const std::vector<Var>& v) { return mixasr::add(v[0], v[1]); }) < 1e-6);
  CHECK(check_op({a, b}, [](const std::vector<Var>& v) { return mixasr::sub(v[0], v[1]); }) < 1e-6);
  CHECK(check_op({a, b}, [](const std::vector<Var>& v) { return mixasr::hadamard(v[0], v[1]); }) <
        1e-6);
  CHECK(check_op({a, row}, [](const std::vector<Var>& v) {
          return mixasr::add_rowvec(v[0], v[1]);
        }) < 1e-6);
  CHECK(check_op({a}, [](const std::vector<Var>& v) { return mixasr::scale(v[0], -2.5); }) < 1e-6);
  CHECK(check_op({a}, [](const std::vector<Var>& v) { return mixasr::sigmoid_v(v[0]); }) < 1e-6);
  CHECK(check_op({a}, [](const std::vector<Var>& v) { return mixasr::tanh_v(v[0]); }) < 1e-6);
  CHECK(check_op({a}, [](const std::vector<Var>& v) { return mixasr::swish_v(v[0]); }) < 1e-6);
}

TEST_CASE("backward on relu matches finite differences away from the kink") {
  // Keep every entry at least 0.1 from zero so central differences are valid.
  Rng rng(102);
  Mat a(3, 4);
  for (auto& v : a.v) {
    v = rng.normal();
    if (std::abs(v) < 0.1) v = v < 0 ? -0.1 : 0.1;
  }
  CHECK(check_op({a}, [](const std::vector<Var>& v) { return mixasr::relu_v(v[0]); }) < 1e-6);
}

TEST_CASE("backward on matmul and transpose matches finite differences") {
  Rng rng(103);
  const Mat a = mixtest::random_mat(3, 4, rng);
  const Mat b = mixtest::random_mat(4, 2, rng);
  CHECK(check_op({a, b}, [](const std::vector<Var>& v) { return mixasr::matmul_v(v[0], v[1]); }) <
        1e-6);
  CHECK(check_op({a}, [](const std::vector<Var>& v) { return mixasr::transpose_v(v[0]); }) < 1e-6);
}

TEST_CASE("backward on slices and concats matches finite differences") {
  Rng rng(104);
  const Mat a = mixtest::random_mat(5, 6, rng);
  const Mat b = mixtest::random_mat(5, 3, rng);
  const Mat c = mixtest::random_mat(2, 6, rng);

  CHECK(check_op({a}, [](const std::vector<Var>& v) { return mixasr::slice_rows_v(v[0], 1, 4); }) <
        1e-6);
  CHECK(check_op({a}, [](const std::vector<Var>& v) { return mixasr::slice_cols_v(v[0], 2, 5); }) <
        1e-6);
  CHECK(check_op({a, b}, [](const std::vector<Var>& v) {
          return mixasr::concat_cols_v(v[0], v[1]);
        }) < 1e-6);
  CHECK(check_op({a, b, b}, [](const std::vector<Var>& v) {
          return mixasr::concat_cols_v(std::vector<Var>{v[0], v[1], v[2]});
        }) < 1e-6);
  CHECK(check_op({a, c}, [](const std::vector<Var>& v) {
          return mixasr::concat_rows_v(std::vector<Var>{v[0], v[1]});
        }) < 1e-6);
}

TEST_CASE("backward through normalization layers matches finite differences") {
  Rng rng(105);
  const Mat x = mixtest::random_mat(4, 6, rng);
  const Mat gamma = mixtest::random_mat(1, 6, rng, 0.5);
  const Mat beta = mixtest::random_mat(1, 6, rng, 0.5);

  CHECK(check_op({x, gamma, beta}, [](const std::vector<Var>& v) {
          return mixasr::layer_norm(v[0], v[1], v[2]);
        }) < 1e-5);

  // Row softmaxes are tested through a random linear functional, otherwise
  // the row-sum constraint hides gradient errors (sum of each row is 1).
  const Mat w = mixtest::random_mat(6, 1, rng);
  CHECK(check_op({x}, [&w](const std::vector<Var>& v) {
          return mixasr::matmul_v(mixasr::softmax_rows(v[0]), mixasr::constant(w));
        }) < 1e-5);
  CHECK(check_op({x}, [&w](const std::vector<Var>& v) {
          return mixasr::matmul_v(mixasr::log_softmax_rows(v[0]), mixasr::constant(w));
        }) < 1e-5);
}

TEST_CASE("softmax and log_softmax rows normalize") {
  Rng rng(106);
  Var x = mixasr::constant(mixtest::random_mat(3, 5, rng, 2.0));
  Mat sm = mixasr::softmax_rows(x)->val;
  Mat lsm = mixasr::log_softmax_rows(x)->val;
  for (int r = 0; r < 3; ++r) {
    double s = 0.0, ls = 0.0;
    for (int c = 0; c < 5; ++c) {
      s += sm.at(r, c);
      ls += std::exp(lsm.at(r, c));
      CHECK(std::log(sm.at(r, c)) == doctest::Approx(lsm.at(r, c)).epsilon(1e-9));
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ls == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("backward through convolutions matches finite differences") {
  Rng rng(107);
  const int kernel = 3;
  const Mat x = mixtest::random_mat(7, 2, rng);
  const Mat w = mixtest::random_mat(kernel * 2, 3, rng, 0.5);
  const Mat b = mixtest::random_mat(1, 3, rng, 0.1);
  CHECK(check_op({x, w, b}, [kernel](const std::vector<Var>& v) {
          return mixasr::conv1d_stride2(v[0], v[1], v[2], kernel);
        }) < 1e-6);

  const Mat dw = mixtest::random_mat(kernel, 2, rng, 0.5);
  const Mat db = mixtest::random_mat(1, 2, rng, 0.1);
  CHECK(check_op({x, dw, db}, [kernel](const std::vector<Var>& v) {
          return mixasr::depthwise_conv1d(v[0], v[1], v[2], kernel);
        }) < 1e-6);
}

TEST_CASE("conv1d_stride2 output length is ceil(T/2)") {
  Rng rng(108);
  const Mat w = mixtest::random_mat(3 * 2, 3, rng);
  const Mat b = Mat::zeros(1, 3);
  for (int t = 1; t <= 12; ++t) {
    CHECK(mixasr::conv1d_stride2_out_len(t) == (t + 1) / 2);
    Var x = mixasr::constant(mixtest::random_mat(t, 2, rng));
    Var y = mixasr::conv1d_stride2(x, mixasr::constant(w), mixasr::constant(b), 3);
    CHECK(y->val.rows == (t + 1) / 2);
    CHECK(y->val.cols == 3);
  }
}

TEST_CASE("backward through embedding lookup scatters into the table") {
  Rng rng(109);
  const Mat table = mixtest::random_mat(5, 3, rng);
  const std::vector<int> ids = {1, 4, 1, 0};
  CHECK(check_op({table}, [&ids](const std::vector<Var>& v) {
          return mixasr::embedding_rows(v[0], ids);
        }) < 1e-6);

  // Duplicate ids must accumulate: row 1 is picked twice above, so its
  // gradient under sum_all is exactly 2 everywhere.
  Var t = mixasr::leaf(table);
  mixasr::backward(mixasr::sum_all(mixasr::embedding_rows(t, ids)));
  for (int c = 0; c < 3; ++c) {
    CHECK(t->grad.at(1, c) == doctest::Approx(2.0));
    CHECK(t->grad.at(2, c) == doctest::Approx(0.0));
  }
}

TEST_CASE("dropout is identity at p=0 and deterministic per seed") {
  Rng rng(110);
  const Mat x = mixtest::random_mat(4, 4, rng);

  Rng d0(1);
  Var same = mixasr::dropout_v(mixasr::constant(x), 0.0, d0);
  for (size_t i = 0; i < x.size(); ++i) CHECK(same->val.v[i] == x.v[i]);

  Rng d1(2), d2(2);
  Var a = mixasr::dropout_v(mixasr::constant(x), 0.5, d1);
  Var b = mixasr::dropout_v(mixasr::constant(x), 0.5, d2);
  bool equal = true, any_zero = false;
  for (size_t i = 0; i < x.size(); ++i) {
    equal = equal && a->val.v[i] == b->val.v[i];
    any_zero = any_zero || a->val.v[i] == 0.0;
  }
  CHECK(equal);
  CHECK(any_zero);
}

TEST_CASE("NoGradGuard suppresses graph construction") {
  CHECK(mixasr::grad_enabled());
  Var p = mixasr::leaf(Mat::full(2, 2, 1.0));
  {
    mixasr::NoGradGuard guard;
    CHECK_FALSE(mixasr::grad_enabled());
    Var y = mixasr::add(p, p);
    CHECK_FALSE(y->requires_grad);
    CHECK(y->parents.empty());
  }
  CHECK(mixasr::grad_enabled());
}

TEST_CASE("sum_all produces a 1x1 total and uniform gradient") {
  Var x = mixasr::leaf(Mat::full(3, 2, 2.0));
  Var s = mixasr::sum_all(x);
  REQUIRE(s->val.rows == 1);
  REQUIRE(s->val.cols == 1);
  CHECK(s->val.at(0, 0) == doctest::Approx(12.0));
  mixasr::backward(s);
  for (double g : x->grad.v) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("gradients accumulate across shared subexpressions") {
  // loss = sum(x + x) must push 2 into every x entry.
  Var x = mixasr::leaf(Mat::full(2, 2, 1.0));
  mixasr::backward(mixasr::sum_all(mixasr::add(x, x)));
  for (double g : x->grad.v) CHECK(g == doctest::Approx(2.0));
}
