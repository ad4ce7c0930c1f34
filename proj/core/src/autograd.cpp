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

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace mixasr {

namespace {

thread_local bool g_grad_enabled = true;

bool track(const std::initializer_list<Var>& parents) {
  if (!g_grad_enabled) return false;
  for (const auto& p : parents) {
    if (p->requires_grad) return true;
  }
  return false;
}

Var make_node(Mat val, std::initializer_list<Var> parents, std::function<void()> backprop) {
  Var n = std::make_shared<Node>(std::move(val));
  if (track(parents)) {
    n->requires_grad = true;
    n->parents.assign(parents.begin(), parents.end());
    n->backprop = std::move(backprop);
  }
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->val.same_shape(b->val)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Mat v) { return std::make_shared<Node>(std::move(v)); }

Var leaf(Mat v) {
  Var n = std::make_shared<Node>(std::move(v));
  n->requires_grad = true;
  return n;
}

void backward(const Var& loss) {
  if (loss->val.rows != 1 || loss->val.cols != 1) {
    throw std::invalid_argument("backward: loss must be 1x1");
  }
  if (!loss->requires_grad) return;

  // Iterative post-order DFS over grad-requiring ancestry.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx++].get();
      if (parent->requires_grad && !seen.count(parent)) {
        seen.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad.at(0, 0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop) {
      node->ensure_grad();
      node->backprop();
    }
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Mat out = a->val;
  add_inplace(out, b->val);
  Node* ap = a.get();
  Node* bp = b.get();
  Var n = make_node(std::move(out), {a, b}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, ap, bp]() {
      if (ap->requires_grad) {
        ap->ensure_grad();
        add_inplace(ap->grad, np->grad);
      }
      if (bp->requires_grad) {
        bp->ensure_grad();
        add_inplace(bp->grad, np->grad);
      }
    };
  }
  return n;
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Mat out = a->val;
  axpy_inplace(out, -1.0, b->val);
  Node* ap = a.get();
  Node* bp = b.get();
  Var n = make_node(std::move(out), {a, b}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, ap, bp]() {
      if (ap->requires_grad) {
        ap->ensure_grad();
        add_inplace(ap->grad, np->grad);
      }
      if (bp->requires_grad) {
        bp->ensure_grad();
        axpy_inplace(bp->grad, -1.0, np->grad);
      }
    };
  }
  return n;
}

Var add_rowvec(const Var& x, const Var& bias) {
  if (bias->val.rows != 1 || bias->val.cols != x->val.cols) {
    throw std::invalid_argument("add_rowvec: bias must be 1 x cols(x)");
  }
  Mat out = x->val;
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) out.at(r, c) += bias->val.at(0, c);
  }
  Node* xp = x.get();
  Node* bp = bias.get();
  Var n = make_node(std::move(out), {x, bias}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, xp, bp]() {
      if (xp->requires_grad) {
        xp->ensure_grad();
        add_inplace(xp->grad, np->grad);
      }
      if (bp->requires_grad) {
        bp->ensure_grad();
        for (int r = 0; r < np->grad.rows; ++r) {
          for (int c = 0; c < np->grad.cols; ++c) bp->grad.at(0, c) += np->grad.at(r, c);
        }
      }
    };
  }
  return n;
}

Var scale(const Var& x, double s) {
  Mat out = x->val;
  for (auto& v : out.v) v *= s;
  Node* xp = x.get();
  Var n = make_node(std::move(out), {x}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, xp, s]() {
      xp->ensure_grad();
      axpy_inplace(xp->grad, s, np->grad);
    };
  }
  return n;
}

Var hadamard(const Var& a, const Var& b) {
  check_same_shape(a, b, "hadamard");
  Mat out = a->val;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b->val.v[i];
  Node* ap = a.get();
  Node* bp = b.get();
  Var n = make_node(std::move(out), {a, b}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, ap, bp]() {
      if (ap->requires_grad) {
        ap->ensure_grad();
        for (size_t i = 0; i < np->grad.v.size(); ++i) ap->grad.v[i] += np->grad.v[i] * bp->val.v[i];
      }
      if (bp->requires_grad) {
        bp->ensure_grad();
        for (size_t i = 0; i < np->grad.v.size(); ++i) bp->grad.v[i] += np->grad.v[i] * ap->val.v[i];
      }
    };
  }
  return n;
}

Var matmul_v(const Var& a, const Var& b) {
  Mat out = matmul(a->val, b->val);
  Node* ap = a.get();
  Node* bp = b.get();
  Var n = make_node(std::move(out), {a, b}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, ap, bp]() {
      if (ap->requires_grad) {
        ap->ensure_grad();
        add_inplace(ap->grad, matmul_nt(np->grad, bp->val));
      }
      if (bp->requires_grad) {
        bp->ensure_grad();
        add_inplace(bp->grad, matmul_tn(ap->val, np->grad));
      }
    };
  }
  return n;
}

Var transpose_v(const Var& x) {
  Mat out(x->val.cols, x->val.rows);
  for (int r = 0; r < x->val.rows; ++r) {
    for (int c = 0; c < x->val.cols; ++c) out.at(c, r) = x->val.at(r, c);
  }
  Node* xp = x.get();
  Var n = make_node(std::move(out), {x}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, xp]() {
      xp->ensure_grad();
      for (int r = 0; r < np->grad.rows; ++r) {
        for (int c = 0; c < np->grad.cols; ++c) xp->grad.at(c, r) += np->grad.at(r, c);
      }
    };
  }
  return n;
}

namespace {

template <typename FwdFn, typename GradFn>
Var unary_elementwise(const Var& x, FwdFn fwd, GradFn dydx_from_xy) {
  Mat out = x->val;
  for (auto& v : out.v) v = fwd(v);
  Node* xp = x.get();
  Var n = std::make_shared<Node>(std::move(out));
  if (g_grad_enabled && x->requires_grad) {
    n->requires_grad = true;
    n->parents = {x};
    Node* np = n.get();
    n->backprop = [np, xp, dydx_from_xy]() {
      xp->ensure_grad();
      for (size_t i = 0; i < np->grad.v.size(); ++i) {
        xp->grad.v[i] += np->grad.v[i] * dydx_from_xy(xp->val.v[i], np->val.v[i]);
      }
    };
  }
  return n;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace

Var sigmoid_v(const Var& x) {
  return unary_elementwise(
      x, [](double v) { return stable_sigmoid(v); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh_v(const Var& x) {
  return unary_elementwise(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu_v(const Var& x) {
  return unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var swish_v(const Var& x) {
  return unary_elementwise(
      x, [](double v) { return v * stable_sigmoid(v); },
      [](double v, double) {
        const double s = stable_sigmoid(v);
        return s + v * s * (1.0 - s);
      });
}

Var slice_rows_v(const Var& x, int r0, int r1) {
  if (r0 < 0 || r1 > x->val.rows || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
  Mat out(r1 - r0, x->val.cols);
  for (int r = r0; r < r1; ++r) {
    for (int c = 0; c < x->val.cols; ++c) out.at(r - r0, c) = x->val.at(r, c);
  }
  Node* xp = x.get();
  Var n = make_node(std::move(out), {x}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, xp, r0]() {
      xp->ensure_grad();
      for (int r = 0; r < np->grad.rows; ++r) {
        for (int c = 0; c < np->grad.cols; ++c) xp->grad.at(r0 + r, c) += np->grad.at(r, c);
      }
    };
  }
  return n;
}

Var slice_cols_v(const Var& x, int c0, int c1) {
  if (c0 < 0 || c1 > x->val.cols || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
  Mat out(x->val.rows, c1 - c0);
  for (int r = 0; r < x->val.rows; ++r) {
    for (int c = c0; c < c1; ++c) out.at(r, c - c0) = x->val.at(r, c);
  }
  Node* xp = x.get();
  Var n = make_node(std::move(out), {x}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, xp, c0]() {
      xp->ensure_grad();
      for (int r = 0; r < np->grad.rows; ++r) {
        for (int c = 0; c < np->grad.cols; ++c) xp->grad.at(r, c0 + c) += np->grad.at(r, c);
      }
    };
  }
  return n;
}

Var concat_cols_v(const Var& a, const Var& b) {
  if (a->val.rows != b->val.rows) throw std::invalid_argument("concat_cols: row counts differ");
  Mat out(a->val.rows, a->val.cols + b->val.cols);
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < a->val.cols; ++c) out.at(r, c) = a->val.at(r, c);
    for (int c = 0; c < b->val.cols; ++c) out.at(r, a->val.cols + c) = b->val.at(r, c);
  }
  Node* ap = a.get();
  Node* bp = b.get();
  Var n = make_node(std::move(out), {a, b}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    const int acols = a->val.cols;
    n->backprop = [np, ap, bp, acols]() {
      if (ap->requires_grad) {
        ap->ensure_grad();
        for (int r = 0; r < np->grad.rows; ++r) {
          for (int c = 0; c < acols; ++c) ap->grad.at(r, c) += np->grad.at(r, c);
        }
      }
      if (bp->requires_grad) {
        bp->ensure_grad();
        for (int r = 0; r < np->grad.rows; ++r) {
          for (int c = 0; c < bp->val.cols; ++c) bp->grad.at(r, c) += np->grad.at(r, acols + c);
        }
      }
    };
  }
  return n;
}

Var concat_cols_v(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty part list");
  Var out = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) out = concat_cols_v(out, parts[i]);
  return out;
}

Var concat_rows_v(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  int total = 0;
  const int cols = parts[0]->val.cols;
  for (const auto& p : parts) {
    if (p->val.cols != cols) throw std::invalid_argument("concat_rows: col counts differ");
    total += p->val.rows;
  }
  Mat out(total, cols);
  int row = 0;
  for (const auto& p : parts) {
    for (int r = 0; r < p->val.rows; ++r, ++row) {
      for (int c = 0; c < cols; ++c) out.at(row, c) = p->val.at(r, c);
    }
  }
  Var n = std::make_shared<Node>(std::move(out));
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parts) needs = needs || p->requires_grad;
  }
  if (needs) {
    n->requires_grad = true;
    n->parents = parts;
    Node* np = n.get();
    std::vector<Node*> raw;
    std::vector<int> row_of;
    int r0 = 0;
    for (const auto& p : parts) {
      raw.push_back(p.get());
      row_of.push_back(r0);
      r0 += p->val.rows;
    }
    n->backprop = [np, raw, row_of]() {
      for (size_t i = 0; i < raw.size(); ++i) {
        Node* p = raw[i];
        if (!p->requires_grad) continue;
        p->ensure_grad();
        for (int r = 0; r < p->val.rows; ++r) {
          for (int c = 0; c < p->val.cols; ++c) {
            p->grad.at(r, c) += np->grad.at(row_of[i] + r, c);
          }
        }
      }
    };
  }
  return n;
}

Var sum_all(const Var& x) {
  Mat out(1, 1);
  double acc = 0.0;
  for (double v : x->val.v) acc += v;
  out.at(0, 0) = acc;
  Node* xp = x.get();
  Var n = make_node(std::move(out), {x}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, xp]() {
      xp->ensure_grad();
      const double g = np->grad.at(0, 0);
      for (auto& v : xp->grad.v) v += g;
    };
  }
  return n;
}

Var dropout_v(const Var& x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  Mat mask(x->val.rows, x->val.cols);
  const double keep = 1.0 - p;
  for (auto& m : mask.v) m = (rng.uniform() < keep) ? 1.0 / keep : 0.0;
  Mat out = x->val;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= mask.v[i];
  Node* xp = x.get();
  Var n = make_node(std::move(out), {x}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    auto mask_copy = std::make_shared<Mat>(std::move(mask));
    n->backprop = [np, xp, mask_copy]() {
      xp->ensure_grad();
      for (size_t i = 0; i < np->grad.v.size(); ++i) xp->grad.v[i] += np->grad.v[i] * mask_copy->v[i];
    };
  }
  return n;
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  if (gamma->val.rows != 1 || gamma->val.cols != x->val.cols || !gamma->val.same_shape(beta->val)) {
    throw std::invalid_argument("layer_norm: gamma/beta must be 1 x cols(x)");
  }
  const int rows = x->val.rows;
  const int cols = x->val.cols;
  Mat out(rows, cols);
  Mat xhat(rows, cols);
  std::vector<double> inv_std(rows);
  for (int r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += x->val.at(r, c);
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double d = x->val.at(r, c) - mean;
      var += d * d;
    }
    var /= cols;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (int c = 0; c < cols; ++c) {
      const double h = (x->val.at(r, c) - mean) * is;
      xhat.at(r, c) = h;
      out.at(r, c) = h * gamma->val.at(0, c) + beta->val.at(0, c);
    }
  }
  Node* xp = x.get();
  Node* gp = gamma.get();
  Node* bp = beta.get();
  Var n = make_node(std::move(out), {x, gamma, beta}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    auto xhat_keep = std::make_shared<Mat>(std::move(xhat));
    auto istd_keep = std::make_shared<std::vector<double>>(std::move(inv_std));
    n->backprop = [np, xp, gp, bp, xhat_keep, istd_keep]() {
      const Mat& h = *xhat_keep;
      const int rows = h.rows;
      const int cols = h.cols;
      if (gp->requires_grad) {
        gp->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < cols; ++c) gp->grad.at(0, c) += np->grad.at(r, c) * h.at(r, c);
        }
      }
      if (bp->requires_grad) {
        bp->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < cols; ++c) bp->grad.at(0, c) += np->grad.at(r, c);
        }
      }
      if (xp->requires_grad) {
        xp->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          double sum_gy = 0.0;
          double sum_gyh = 0.0;
          for (int c = 0; c < cols; ++c) {
            const double gy = np->grad.at(r, c) * gp->val.at(0, c);
            sum_gy += gy;
            sum_gyh += gy * h.at(r, c);
          }
          const double mean_gy = sum_gy / cols;
          const double mean_gyh = sum_gyh / cols;
          for (int c = 0; c < cols; ++c) {
            const double gy = np->grad.at(r, c) * gp->val.at(0, c);
            xp->grad.at(r, c) += (*istd_keep)[r] * (gy - mean_gy - h.at(r, c) * mean_gyh);
          }
        }
      }
    };
  }
  return n;
}

Var softmax_rows(const Var& x) {
  const int rows = x->val.rows;
  const int cols = x->val.cols;
  Mat out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double mx = -HUGE_VAL;
    for (int c = 0; c < cols; ++c) mx = std::max(mx, x->val.at(r, c));
    double z = 0.0;
    for (int c = 0; c < cols; ++c) z += std::exp(x->val.at(r, c) - mx);
    for (int c = 0; c < cols; ++c) out.at(r, c) = std::exp(x->val.at(r, c) - mx) / z;
  }
  Node* xp = x.get();
  Var n = make_node(std::move(out), {x}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, xp]() {
      xp->ensure_grad();
      for (int r = 0; r < np->val.rows; ++r) {
        double dot = 0.0;
        for (int c = 0; c < np->val.cols; ++c) dot += np->grad.at(r, c) * np->val.at(r, c);
        for (int c = 0; c < np->val.cols; ++c) {
          xp->grad.at(r, c) += np->val.at(r, c) * (np->grad.at(r, c) - dot);
        }
      }
    };
  }
  return n;
}

Var log_softmax_rows(const Var& x) {
  const int rows = x->val.rows;
  const int cols = x->val.cols;
  Mat out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double mx = -HUGE_VAL;
    for (int c = 0; c < cols; ++c) mx = std::max(mx, x->val.at(r, c));
    double z = 0.0;
    for (int c = 0; c < cols; ++c) z += std::exp(x->val.at(r, c) - mx);
    const double lz = mx + std::log(z);
    for (int c = 0; c < cols; ++c) out.at(r, c) = x->val.at(r, c) - lz;
  }
  Node* xp = x.get();
  Var n = make_node(std::move(out), {x}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, xp]() {
      xp->ensure_grad();
      for (int r = 0; r < np->val.rows; ++r) {
        double sum_g = 0.0;
        for (int c = 0; c < np->val.cols; ++c) sum_g += np->grad.at(r, c);
        for (int c = 0; c < np->val.cols; ++c) {
          xp->grad.at(r, c) += np->grad.at(r, c) - std::exp(np->val.at(r, c)) * sum_g;
        }
      }
    };
  }
  return n;
}

int conv1d_stride2_out_len(int t) { return (t - 1) / 2 + 1; }

Var conv1d_stride2(const Var& x, const Var& w, const Var& b, int kernel) {
  if (kernel % 2 == 0) throw std::invalid_argument("conv1d_stride2: kernel must be odd");
  const int t_in = x->val.rows;
  const int in_ch = x->val.cols;
  if (w->val.rows != kernel * in_ch) throw std::invalid_argument("conv1d_stride2: weight rows != kernel*in_ch");
  const int out_ch = w->val.cols;
  if (b->val.rows != 1 || b->val.cols != out_ch) throw std::invalid_argument("conv1d_stride2: bad bias shape");
  const int pad = (kernel - 1) / 2;
  const int t_out = conv1d_stride2_out_len(t_in);

  Mat out(t_out, out_ch);
  for (int t = 0; t < t_out; ++t) {
    const int start = 2 * t - pad;
    for (int o = 0; o < out_ch; ++o) out.at(t, o) = b->val.at(0, o);
    for (int k = 0; k < kernel; ++k) {
      const int src = start + k;
      if (src < 0 || src >= t_in) continue;
      for (int i = 0; i < in_ch; ++i) {
        const double xv = x->val.at(src, i);
        if (xv == 0.0) continue;
        const int wrow = k * in_ch + i;
        for (int o = 0; o < out_ch; ++o) out.at(t, o) += xv * w->val.at(wrow, o);
      }
    }
  }
  Node* xp = x.get();
  Node* wp = w.get();
  Node* bp = b.get();
  Var n = make_node(std::move(out), {x, w, b}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, xp, wp, bp, kernel, pad, t_in, in_ch]() {
      const int t_out = np->val.rows;
      const int out_ch = np->val.cols;
      if (bp->requires_grad) {
        bp->ensure_grad();
        for (int t = 0; t < t_out; ++t) {
          for (int o = 0; o < out_ch; ++o) bp->grad.at(0, o) += np->grad.at(t, o);
        }
      }
      const bool need_x = xp->requires_grad;
      const bool need_w = wp->requires_grad;
      if (need_x) xp->ensure_grad();
      if (need_w) wp->ensure_grad();
      for (int t = 0; t < t_out; ++t) {
        const int start = 2 * t - pad;
        for (int k = 0; k < kernel; ++k) {
          const int src = start + k;
          if (src < 0 || src >= t_in) continue;
          for (int i = 0; i < in_ch; ++i) {
            const int wrow = k * in_ch + i;
            double gx = 0.0;
            for (int o = 0; o < out_ch; ++o) {
              const double gy = np->grad.at(t, o);
              if (need_w) wp->grad.at(wrow, o) += gy * xp->val.at(src, i);
              gx += gy * wp->val.at(wrow, o);
            }
            if (need_x) xp->grad.at(src, i) += gx;
          }
        }
      }
    };
  }
  return n;
}

Var depthwise_conv1d(const Var& x, const Var& w, const Var& b, int kernel) {
  if (kernel % 2 == 0) throw std::invalid_argument("depthwise_conv1d: kernel must be odd");
  const int t_in = x->val.rows;
  const int ch = x->val.cols;
  if (w->val.rows != kernel || w->val.cols != ch) throw std::invalid_argument("depthwise_conv1d: bad weight shape");
  if (b->val.rows != 1 || b->val.cols != ch) throw std::invalid_argument("depthwise_conv1d: bad bias shape");
  const int pad = (kernel - 1) / 2;

  Mat out(t_in, ch);
  for (int t = 0; t < t_in; ++t) {
    for (int c = 0; c < ch; ++c) out.at(t, c) = b->val.at(0, c);
    for (int k = 0; k < kernel; ++k) {
      const int src = t - pad + k;
      if (src < 0 || src >= t_in) continue;
      for (int c = 0; c < ch; ++c) out.at(t, c) += x->val.at(src, c) * w->val.at(k, c);
    }
  }
  Node* xp = x.get();
  Node* wp = w.get();
  Node* bp = b.get();
  Var n = make_node(std::move(out), {x, w, b}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    n->backprop = [np, xp, wp, bp, kernel, pad, t_in]() {
      const int ch = np->val.cols;
      if (bp->requires_grad) {
        bp->ensure_grad();
        for (int t = 0; t < t_in; ++t) {
          for (int c = 0; c < ch; ++c) bp->grad.at(0, c) += np->grad.at(t, c);
        }
      }
      const bool need_x = xp->requires_grad;
      const bool need_w = wp->requires_grad;
      if (need_x) xp->ensure_grad();
      if (need_w) wp->ensure_grad();
      for (int t = 0; t < t_in; ++t) {
        for (int k = 0; k < kernel; ++k) {
          const int src = t - pad + k;
          if (src < 0 || src >= t_in) continue;
          for (int c = 0; c < ch; ++c) {
            const double gy = np->grad.at(t, c);
            if (need_w) wp->grad.at(k, c) += gy * xp->val.at(src, c);
            if (need_x) xp->grad.at(src, c) += gy * wp->val.at(k, c);
          }
        }
      }
    };
  }
  return n;
}

Var embedding_rows(const Var& table, const std::vector<int>& ids) {
  const int rows = static_cast<int>(ids.size());
  const int cols = table->val.cols;
  Mat out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const int id = ids[r];
    if (id < 0 || id >= table->val.rows) throw std::invalid_argument("embedding_rows: id out of range");
    for (int c = 0; c < cols; ++c) out.at(r, c) = table->val.at(id, c);
  }
  Node* tp = table.get();
  Var n = make_node(std::move(out), {table}, nullptr);
  if (n->requires_grad) {
    Node* np = n.get();
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    n->backprop = [np, tp, ids_copy]() {
      tp->ensure_grad();
      for (int r = 0; r < np->grad.rows; ++r) {
        const int id = (*ids_copy)[r];
        for (int c = 0; c < np->grad.cols; ++c) tp->grad.at(id, c) += np->grad.at(r, c);
      }
    };
  }
  return n;
}

}  // namespace mixasr
