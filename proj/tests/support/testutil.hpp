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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mixasr/autograd.hpp"
#include "mixasr/mat.hpp"
#include "mixasr/types.hpp"

namespace mixtest {

// Fresh scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / (tag + "-" + std::to_string(i));
      std::error_code ec;
      if (std::filesystem::create_directories(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("TempDir: cannot create scratch directory for " + tag);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Random per-frame log-probabilities: softmax of uniform logits, exactly the
// shape CTC consumes (rows sum to one in probability space).
inline mixasr::Mat random_log_probs(int t_len, int vocab, mixasr::Rng& rng) {
  mixasr::Mat lp(t_len, vocab);
  for (int t = 0; t < t_len; ++t) {
    std::vector<double> logits(vocab);
    double mx = -1e30;
    for (int v = 0; v < vocab; ++v) {
      logits[v] = rng.uniform(-3.0, 3.0);
      mx = std::max(mx, logits[v]);
    }
    double z = 0.0;
    for (int v = 0; v < vocab; ++v) z += std::exp(logits[v] - mx);
    const double log_z = mx + std::log(z);
    for (int v = 0; v < vocab; ++v) lp.at(t, v) = logits[v] - log_z;
  }
  return lp;
}

// Independent CTC oracle: enumerate every frame labeling in {0..V-1}^T,
// collapse it (merge repeats, drop blanks) and accumulate the probability of
// the labelings that collapse to `target`. O(V^T), fine for the tiny grids
// the oracle suite uses.
inline double brute_force_ctc_loss(const mixasr::Mat& lp, const mixasr::TokenSequence& target) {
  const int t_len = lp.rows;
  const int vocab = lp.cols;
  std::vector<int> frame(t_len, 0);
  double prob = 0.0;
  while (true) {
    // Collapse this labeling.
    mixasr::TokenSequence collapsed;
    int prev = -1;
    for (int t = 0; t < t_len; ++t) {
      if (frame[t] != prev && frame[t] != 0) collapsed.push_back(frame[t]);
      prev = frame[t];
    }
    if (collapsed == target) {
      double lp_sum = 0.0;
      for (int t = 0; t < t_len; ++t) lp_sum += lp.at(t, frame[t]);
      prob += std::exp(lp_sum);
    }
    // Odometer increment over the V^T grid.
    int pos = t_len - 1;
    while (pos >= 0 && frame[pos] == vocab - 1) frame[pos--] = 0;
    if (pos < 0) break;
    ++frame[pos];
  }
  if (prob <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(prob);
}

// Relative error with a floor, so near-zero entries compare absolutely.
inline double rel_error(double a, double b, double floor_mag) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor_mag});
}

// Central-difference derivative of `eval` w.r.t. one matrix entry.
template <typename F>
double central_diff(mixasr::Mat& m, int r, int c, double h, F&& eval) {
  const double saved = m.at(r, c);
  m.at(r, c) = saved + h;
  const double up = eval();
  m.at(r, c) = saved - h;
  const double down = eval();
  m.at(r, c) = saved;
  return (up - down) / (2.0 * h);
}

// Max floored relative error between an analytic gradient and central
// differences over every entry of `leaf_val`, where `eval` recomputes the
// scalar loss from current matrix contents.
template <typename F>
double max_grad_error(mixasr::Mat& leaf_val, const mixasr::Mat& analytic, double h, F&& eval,
                      double floor_mag = 1e-4) {
  double worst = 0.0;
  for (int r = 0; r < leaf_val.rows; ++r) {
    for (int c = 0; c < leaf_val.cols; ++c) {
      const double fd = central_diff(leaf_val, r, c, h, eval);
      worst = std::max(worst, rel_error(analytic.at(r, c), fd, floor_mag));
    }
  }
  return worst;
}

inline mixasr::Mat random_mat(int rows, int cols, mixasr::Rng& rng, double scale = 1.0) {
  mixasr::Mat m(rows, cols);
  for (auto& v : m.v) v = scale * rng.normal();
  return m;
}

}  // namespace mixtest
