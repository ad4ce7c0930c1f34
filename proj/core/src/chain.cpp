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

#include "mixasr/chain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mixasr/evalkit.hpp"

namespace mixasr {

using ordered_json = nlohmann::ordered_json;

std::string to_string(ConditionMode m) {
  return m == ConditionMode::kSoft ? "soft" : "hard";
}

std::string to_string(AssignmentMode m) {
  return m == AssignmentMode::kJoint ? "joint" : "greedy";
}

ConditionMode parse_condition_mode(const std::string& s) {
  if (s == "soft") return ConditionMode::kSoft;
  if (s == "hard") return ConditionMode::kHard;
  throw ConfigError("unknown condition mode: " + s);
}

AssignmentMode parse_assignment_mode(const std::string& s) {
  if (s == "joint") return AssignmentMode::kJoint;
  if (s == "greedy") return AssignmentMode::kGreedyPerStep;
  throw ConfigError("unknown assignment mode: " + s);
}

void ChainConfig::validate() const {
  if (lstm_hidden <= 0) throw ConfigError("chain: lstm_hidden must be positive");
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be positive");
  if (warmup_steps < 1) throw ConfigError("train: warmup_steps must be positive");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (epochs < 1) throw ConfigError("train: epochs must be positive");
  if (lambda_inter < 0.0 || lambda_inter > 1.0)
    throw ConfigError("train: lambda_inter must be in [0, 1]");
  if (grad_clip < 0.0) throw ConfigError("train: grad_clip must be nonnegative");
}

ChainModel::ChainModel(const EncoderConfig& enc_cfg, const ChainConfig& chain_cfg, int vocab_size,
                       uint64_t seed)
    : enc_cfg_(enc_cfg), chain_cfg_(chain_cfg), vocab_size_(vocab_size) {
  enc_cfg_.validate();
  chain_cfg_.validate();
  if (vocab_size < 2) throw ConfigError("chain: vocabulary needs blank plus one symbol");
  Rng rng(Rng::mix(seed, 0x6d6f64656cULL));
  const int d = enc_cfg_.d_model;
  const int hid = chain_cfg_.lstm_hidden;
  encoder_mix = MixtureEncoder(reg_, "mix", enc_cfg_, rng);
  encoder_rec = RecognitionEncoder(reg_, "rec", enc_cfg_, rng);
  head = CtcHead(reg_, "head", d, vocab_size, rng);
  lstm_wx_ = reg_.add("chain.lstm.wx", xavier_uniform(2 * d, 4 * hid, rng));
  lstm_wh_ = reg_.add("chain.lstm.wh", xavier_uniform(hid, 4 * hid, rng));
  Mat b = Mat::zeros(1, 4 * hid);
  for (int i = hid; i < 2 * hid; ++i) b.at(0, i) = 1.0;  // forget-gate bias
  lstm_b_ = reg_.add("chain.lstm.b", std::move(b));
  lstm_proj_ = Linear(reg_, "chain.proj", hid, d, rng);
  if (chain_cfg_.condition_mode == ConditionMode::kHard) {
    cond_embed_ = reg_.add("chain.embed", xavier_uniform(vocab_size, d, rng));
    cond_mlp_in_ = Linear(reg_, "chain.mlp1", d, d, rng);
    cond_mlp_out_ = Linear(reg_, "chain.mlp2", d, d, rng);
  }
}

Var ChainModel::lstm_cell(const Var& x, Var& h, Var& c) const {
  const int hid = chain_cfg_.lstm_hidden;
  Var gates = add_rowvec(add(matmul_v(x, lstm_wx_), matmul_v(h, lstm_wh_)), lstm_b_);
  Var i = sigmoid_v(slice_cols_v(gates, 0, hid));
  Var f = sigmoid_v(slice_cols_v(gates, hid, 2 * hid));
  Var g = tanh_v(slice_cols_v(gates, 2 * hid, 3 * hid));
  Var o = sigmoid_v(slice_cols_v(gates, 3 * hid, 4 * hid));
  c = add(hadamard(f, c), hadamard(i, g));
  h = hadamard(o, tanh_v(c));
  return h;
}

Var ChainModel::condition_from(const StepOutput& prev) const {
  if (chain_cfg_.condition_mode == ConditionMode::kSoft) return prev.g;
  Var e = embedding_rows(cond_embed_, prev.alignment);
  return cond_mlp_out_.forward(relu_v(cond_mlp_in_.forward(e)));
}

ChainCursor ChainModel::start(const Var& features) const {
  ChainCursor cur;
  cur.mix = encoder_mix.forward(features);
  const int t_sub = cur.mix->val.rows;
  cur.h = constant(Mat::zeros(t_sub, chain_cfg_.lstm_hidden));
  cur.c = constant(Mat::zeros(t_sub, chain_cfg_.lstm_hidden));
  return cur;
}

StepOutput ChainModel::step(ChainCursor& cursor, Rng* dropout_rng) const {
  Var cond = cursor.has_prev ? condition_from(cursor.prev)
                             : constant(Mat::zeros(cursor.mix->val.rows, enc_cfg_.d_model));
  Var x = concat_cols_v({cursor.mix, cond});
  lstm_cell(x, cursor.h, cursor.c);
  Var enc_in = lstm_proj_.forward(cursor.h);
  auto [g, inter] = encoder_rec.forward(enc_in, dropout_rng);
  StepOutput out;
  out.g = g;
  out.h_inter = inter;
  out.log_probs = head.forward(g);
  out.log_probs_inter = head.forward(inter);
  out.alignment = greedy_alignment(out.log_probs->val);
  cursor.prev = out;
  cursor.has_prev = true;
  ++cursor.steps_taken;
  return out;
}

std::vector<StepOutput> ChainModel::forward(const Var& features, int steps,
                                            Rng* dropout_rng) const {
  if (steps < 1) throw ShapeError("chain forward requires at least one step");
  ChainCursor cur = start(features);
  std::vector<StepOutput> out;
  out.reserve(steps);
  for (int j = 0; j < steps; ++j) out.push_back(step(cur, dropout_rng));
  return out;
}

namespace {

// Cost matrix of final-layer CTC losses; rows are chain steps, columns
// reference targets.
Mat step_cost_matrix(const std::vector<StepOutput>& fwd,
                     const std::vector<TokenSequence>& targets) {
  const int n = static_cast<int>(targets.size());
  Mat cost(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      cost.at(j, k) = ctc_forward_backward(fwd[j].log_probs->val, targets[k], false).loss;
  return cost;
}

std::vector<int> greedy_assignment(const Mat& cost) {
  const int n = cost.rows;
  std::vector<int> perm(n, -1);
  std::vector<bool> used(n, false);
  for (int j = 0; j < n; ++j) {
    int best = -1;
    for (int k = 0; k < n; ++k) {
      if (used[k]) continue;
      if (best < 0 || cost.at(j, k) < cost.at(j, best)) best = k;
    }
    if (!std::isfinite(cost.at(j, best)) && cost.at(j, best) > 0)
      throw ConfigError("greedy assignment: no feasible target for step " + std::to_string(j));
    perm[j] = best;
    used[best] = true;
  }
  return perm;
}

}  // namespace

ChainLoss chain_pit_loss(const ChainModel& model, const Var& features,
                         const std::vector<TokenSequence>& targets, double lambda_inter,
                         bool stop_step, AssignmentMode mode, Rng* dropout_rng) {
  const int n = static_cast<int>(targets.size());
  if (n < 1) throw ShapeError("chain loss requires at least one target");
  const int steps = n + (stop_step ? 1 : 0);
  auto fwd = model.forward(features, steps, dropout_rng);

  Mat cost = step_cost_matrix(fwd, targets);
  std::vector<int> perm =
      mode == AssignmentMode::kJoint ? pit_assign(cost).perm : greedy_assignment(cost);

  ChainLoss result;
  result.permutation = perm;
  Var total;
  auto accumulate = [&](const Var& term) { total = total ? add(total, term) : term; };
  for (int j = 0; j < steps; ++j) {
    const TokenSequence empty;
    const TokenSequence& y = j < n ? targets[perm[j]] : empty;
    Var fin = ctc_loss_var(fwd[j].log_probs, y);
    Var inter = ctc_loss_var(fwd[j].log_probs_inter, y);
    result.final_ctc += fin->val.at(0, 0);
    result.inter_ctc += inter->val.at(0, 0);
    accumulate(scale(fin, 1.0 - lambda_inter));
    if (lambda_inter > 0.0) accumulate(scale(inter, lambda_inter));
  }
  result.total = total;
  return result;
}

PitParallelModel::PitParallelModel(const EncoderConfig& enc_cfg, int n_branches, int vocab_size,
                                   uint64_t seed)
    : enc_cfg_(enc_cfg), vocab_size_(vocab_size) {
  enc_cfg_.validate();
  if (n_branches < 1) throw ConfigError("parallel baseline: need at least one branch");
  if (vocab_size < 2) throw ConfigError("parallel baseline: vocabulary needs blank plus one symbol");
  Rng rng(Rng::mix(seed, 0x706172616cULL));
  encoder_mix = MixtureEncoder(reg_, "mix", enc_cfg_, rng);
  branches_.resize(n_branches);
  for (int b = 0; b < n_branches; ++b) {
    branches_[b].reserve(enc_cfg_.n_layers_sd);
    for (int l = 0; l < enc_cfg_.n_layers_sd; ++l)
      branches_[b].emplace_back(
          reg_, "sd" + std::to_string(b) + ".block" + std::to_string(l), enc_cfg_, rng);
  }
  encoder_rec = RecognitionEncoder(reg_, "rec", enc_cfg_, rng);
  head = CtcHead(reg_, "head", enc_cfg_.d_model, vocab_size, rng);
}

std::vector<Var> PitParallelModel::forward(const Var& features, int n_speakers,
                                           Rng* dropout_rng) const {
  if (n_speakers != n_branches())
    throw ConfigError("parallel baseline built for " + std::to_string(n_branches()) +
                      " speakers, asked to handle " + std::to_string(n_speakers));
  Var mix = encoder_mix.forward(features);
  std::vector<Var> log_probs;
  log_probs.reserve(n_speakers);
  for (const auto& branch : branches_) {
    Var h = mix;
    for (const auto& block : branch) h = block.forward(h, dropout_rng);
    auto [g, inter] = encoder_rec.forward(h, dropout_rng);
    (void)inter;
    log_probs.push_back(head.forward(g));
  }
  return log_probs;
}

ParallelLoss parallel_pit_loss(const PitParallelModel& model, const Var& features,
                               const std::vector<TokenSequence>& targets, Rng* dropout_rng) {
  const int n = static_cast<int>(targets.size());
  auto lps = model.forward(features, n, dropout_rng);
  Mat cost(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      cost.at(j, k) = ctc_forward_backward(lps[j]->val, targets[k], false).loss;
  ParallelLoss result;
  result.permutation = pit_assign(cost).perm;
  Var total;
  for (int j = 0; j < n; ++j) {
    Var term = ctc_loss_var(lps[j], targets[result.permutation[j]]);
    total = total ? add(total, term) : term;
  }
  result.total = total;
  return result;
}

AdamOptimizer::AdamOptimizer(ParamRegistry& reg, double peak_lr, int warmup_steps)
    : reg_(reg), peak_lr_(peak_lr), warmup_steps_(warmup_steps) {
  for (const auto& [name, p] : reg_.items()) {
    m_.push_back(Mat::zeros(p->val.rows, p->val.cols));
    v_.push_back(Mat::zeros(p->val.rows, p->val.cols));
  }
}

double AdamOptimizer::current_lr() const {
  const double t = static_cast<double>(std::max<int64_t>(t_, 1));
  const double w = static_cast<double>(warmup_steps_);
  return peak_lr_ * std::min(t / w, std::sqrt(w / t));
}

void AdamOptimizer::step() {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ++t_;
  const double lr = current_lr();
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  const auto& items = reg_.items();
  for (size_t i = 0; i < items.size(); ++i) {
    auto& p = items[i].second;
    if (p->grad.v.empty()) continue;
    for (size_t k = 0; k < p->val.v.size(); ++k) {
      const double g = p->grad.v[k];
      m_[i].v[k] = kBeta1 * m_[i].v[k] + (1.0 - kBeta1) * g;
      v_[i].v[k] = kBeta2 * v_[i].v[k] + (1.0 - kBeta2) * g * g;
      const double mhat = m_[i].v[k] / bc1;
      const double vhat = v_[i].v[k] / bc2;
      p->val.v[k] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

double clip_grad_norm(ParamRegistry& reg, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : reg.items())
    for (double g : p->grad.v) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, p] : reg.items())
      for (double& g : p->grad.v) g *= s;
  }
  return norm;
}

std::vector<TokenSequence> greedy_chain_decode(const ChainModel& model, const Var& features,
                                               int steps) {
  NoGradGuard ng;
  auto fwd = model.forward(features, steps);
  std::vector<TokenSequence> hyps;
  hyps.reserve(steps);
  for (const auto& step : fwd) hyps.push_back(greedy_decode(step.log_probs->val));
  return hyps;
}

namespace {

std::string perm_key(const std::vector<int>& perm) {
  std::string key;
  for (int k : perm) key += std::to_string(k);
  return key;
}

double dev_wer_pooled(const ChainModel& model, const LoadedCorpus& dev) {
  int64_t errors = 0;
  int64_t ref_tokens = 0;
  for (const auto& entry : dev.entries) {
    FeatureSequence mix = load_entry_mixture(dev, entry);
    Var x = constant(std::move(mix.frames));
    auto hyps = greedy_chain_decode(model, x, entry.num_speakers);
    std::vector<TokenSequence> refs;
    refs.reserve(entry.transcripts.size());
    for (const auto& t : entry.transcripts) refs.push_back(tokenize(t, dev.vocab));
    PitWer pw = pit_wer(refs, hyps);
    errors += pw.pooled.errors();
    ref_tokens += pw.pooled.ref_len;
  }
  if (ref_tokens == 0) return 0.0;
  return static_cast<double>(errors) / static_cast<double>(ref_tokens);
}

}  // namespace

TrainResult train_chain(ChainModel& model, const LoadedCorpus& train_corpus,
                        const LoadedCorpus* dev_corpus, const TrainConfig& cfg,
                        const std::string& metrics_path,
                        const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  const int n = static_cast<int>(train_corpus.entries.size());
  if (n == 0) throw ConfigError("training corpus is empty");

  std::ofstream metrics;
  if (!metrics_path.empty()) {
    metrics.open(metrics_path, std::ios::trunc);
    if (!metrics) throw ConfigError("cannot open metrics file: " + metrics_path);
  }

  AdamOptimizer opt(model.params(), cfg.learning_rate, cfg.warmup_steps);
  const bool use_dropout = model.encoder_config().dropout > 0.0;

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(Rng::mix(cfg.seed, 0x73687566ULL + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    Rng dropout_rng(Rng::mix(cfg.seed, 0x64726f70ULL + static_cast<uint64_t>(epoch)));

    double sum_total = 0.0;
    double sum_final = 0.0;
    double sum_inter = 0.0;
    std::map<std::string, int64_t> histogram;

    for (int start = 0; start < n; start += cfg.batch_size) {
      const int end = std::min(n, start + cfg.batch_size);
      model.params().zero_grads();
      Var batch_loss;
      for (int i = start; i < end; ++i) {
        const ManifestEntry& entry = train_corpus.entries[order[i]];
        FeatureSequence mix = load_entry_mixture(train_corpus, entry);
        Var x = constant(std::move(mix.frames));
        std::vector<TokenSequence> targets;
        targets.reserve(entry.transcripts.size());
        for (const auto& t : entry.transcripts) targets.push_back(tokenize(t, train_corpus.vocab));
        ChainLoss loss = chain_pit_loss(model, x, targets, cfg.lambda_inter, cfg.stop_step,
                                        cfg.assignment_mode, use_dropout ? &dropout_rng : nullptr);
        const double lv = loss.total->val.at(0, 0);
        if (!std::isfinite(lv)) {
          std::ostringstream msg;
          msg << "training diverged: loss " << lv << " at epoch " << epoch << ", mixture "
              << entry.id << " (optimizer step " << opt.steps_taken() << ")";
          throw std::runtime_error(msg.str());
        }
        sum_total += lv;
        sum_final += loss.final_ctc;
        sum_inter += loss.inter_ctc;
        ++histogram[perm_key(loss.permutation)];
        batch_loss = batch_loss ? add(batch_loss, loss.total) : loss.total;
      }
      backward(batch_loss);
      clip_grad_norm(model.params(), cfg.grad_clip);
      opt.step();
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = sum_total / n;
    em.ctc_loss = sum_final / n;
    em.interctc_loss = sum_inter / n;
    em.permutation_histogram = histogram;
    if (dev_corpus != nullptr) em.dev_wer = dev_wer_pooled(model, *dev_corpus);

    if (metrics.is_open()) {
      ordered_json line;
      line["epoch"] = em.epoch;
      line["train_loss"] = em.train_loss;
      line["ctc_loss"] = em.ctc_loss;
      line["interctc_loss"] = em.interctc_loss;
      if (dev_corpus != nullptr) line["dev_wer"] = em.dev_wer;
      ordered_json hist = ordered_json::object();
      for (const auto& [k, v] : em.permutation_histogram) hist[k] = v;
      line["permutation_histogram"] = hist;
      metrics << line.dump() << "\n";
      metrics.flush();
    }
    if (on_epoch) on_epoch(em);
    result.history.push_back(std::move(em));
  }
  result.optimizer_steps = opt.steps_taken();
  return result;
}

}  // namespace mixasr
