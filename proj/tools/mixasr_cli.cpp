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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mixasr/checkpoint.hpp"
#include "mixasr/config.hpp"
#include "mixasr/corpus.hpp"
#include "mixasr/evalkit.hpp"
#include "mixasr/infer.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kToolVersion[] = "0.1.0";

struct CliArgs {
  std::string config_path;
  std::string preset = "tiny";
  std::string out = "out";
  std::string resume;
  std::string policy;
  int64_t seed = -1;
  int max_speakers = 0;
  int workers = 1;
};

std::string hex64(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

mixasr::RunConfig effective_config(const CliArgs& args) {
  mixasr::RunConfig cfg = mixasr::make_preset(args.preset);
  if (!args.config_path.empty()) cfg = mixasr::load_config_file(args.config_path, std::move(cfg));
  if (args.seed >= 0) {
    cfg.corpus.seed = static_cast<uint64_t>(args.seed);
    cfg.train.seed = static_cast<uint64_t>(args.seed);
  }
  if (!args.policy.empty()) cfg.decode_policy = mixasr::parse_decode_policy(args.policy);
  if (args.max_speakers > 0) cfg.max_speakers = args.max_speakers;
  cfg.validate();
  return cfg;
}

// Effective config echo plus provenance stamp, written next to all outputs.
void write_run_stamp(const mixasr::RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream echo(fs::path(out_dir) / "config.echo.ini", std::ios::trunc);
    if (!echo) throw std::runtime_error("cannot write config echo in " + out_dir);
    echo << mixasr::to_ini(cfg);
  }
  ordered_json p;
  p["config_hash"] = hex64(mixasr::config_hash(cfg));
  p["seed"] = cfg.corpus.seed;
  p["version"] = kToolVersion;
  std::ofstream prov(fs::path(out_dir) / "provenance.json", std::ios::trunc);
  if (!prov) throw std::runtime_error("cannot write provenance in " + out_dir);
  prov << p.dump(2) << "\n";
}

void update_files_manifest(const std::string& out_dir, const std::string& command,
                           std::vector<std::string> files) {
  std::sort(files.begin(), files.end());
  const fs::path path = fs::path(out_dir) / "files.json";
  ordered_json manifest = ordered_json::object();
  if (fs::exists(path)) {
    std::ifstream in(path);
    in >> manifest;
  }
  manifest[command] = files;
  std::ofstream out(path, std::ios::trunc);
  out << manifest.dump(2) << "\n";
}

std::vector<std::string> list_tree(const std::string& out_dir, const std::string& subdir) {
  std::vector<std::string> files;
  const fs::path root = fs::path(out_dir) / subdir;
  for (const auto& de : fs::recursive_directory_iterator(root)) {
    if (de.is_regular_file())
      files.push_back(fs::relative(de.path(), out_dir).generic_string());
  }
  return files;
}

int run_generate_data(const CliArgs& args) {
  mixasr::RunConfig cfg = effective_config(args);
  write_run_stamp(cfg, args.out);
  const std::string corpus_dir = (fs::path(args.out) / "corpus").string();
  mixasr::generate_corpus(cfg.corpus, corpus_dir);
  auto files = list_tree(args.out, "corpus");
  files.push_back("config.echo.ini");
  files.push_back("provenance.json");
  update_files_manifest(args.out, "generate-data", std::move(files));
  std::cout << "generated corpus under " << corpus_dir << "\n";
  return 0;
}

int run_train(const CliArgs& args) {
  mixasr::RunConfig cfg = effective_config(args);
  write_run_stamp(cfg, args.out);
  const std::string corpus_dir = (fs::path(args.out) / "corpus").string();
  mixasr::LoadedCorpus train = mixasr::load_corpus(corpus_dir, "train");
  mixasr::LoadedCorpus dev = mixasr::load_corpus(corpus_dir, "dev");
  if (train.feat_dim != cfg.encoder.feat_dim)
    throw mixasr::ConfigError("corpus feat_dim " + std::to_string(train.feat_dim) +
                              " does not match encoder.feat_dim " +
                              std::to_string(cfg.encoder.feat_dim));

  auto model = args.resume.empty()
                   ? mixasr::ChainModel(cfg.encoder, cfg.chain, train.vocab.size(), cfg.train.seed)
                   : mixasr::load_chain_model(args.resume);
  if (model.encoder_config().feat_dim != train.feat_dim)
    throw mixasr::ConfigError("resumed model feature dimension does not match corpus");

  const std::string metrics_path = (fs::path(args.out) / "metrics.jsonl").string();
  mixasr::TrainResult result = mixasr::train_chain(
      model, train, dev.entries.empty() ? nullptr : &dev, cfg.train, metrics_path,
      [](const mixasr::EpochMetrics& em) {
        std::cout << "epoch " << em.epoch << " loss " << em.train_loss;
        if (em.dev_wer >= 0.0) std::cout << " dev_wer " << em.dev_wer;
        std::cout << "\n";
      });

  ordered_json extra;
  extra["epochs"] = cfg.train.epochs;
  extra["optimizer_steps"] = result.optimizer_steps;
  extra["config_hash"] = hex64(mixasr::config_hash(cfg));
  const std::string ckpt_path = (fs::path(args.out) / "model.ckpt").string();
  mixasr::save_chain_model(ckpt_path, model, extra.dump());
  update_files_manifest(args.out, "train",
                        {"metrics.jsonl", "model.ckpt", "config.echo.ini", "provenance.json"});
  std::cout << "saved " << ckpt_path << "\n";
  return 0;
}

int run_decode(const CliArgs& args) {
  mixasr::RunConfig cfg = effective_config(args);
  write_run_stamp(cfg, args.out);
  const std::string corpus_dir = (fs::path(args.out) / "corpus").string();
  mixasr::LoadedCorpus test = mixasr::load_corpus(corpus_dir, "test");
  mixasr::ChainModel model =
      mixasr::load_chain_model((fs::path(args.out) / "model.ckpt").string());

  auto decodes = mixasr::decode_corpus(model, test, cfg.decode_policy, cfg.fixed_steps,
                                       cfg.max_speakers, args.workers);
  const std::string name = "hyps_test_" + mixasr::to_string(cfg.decode_policy) + ".jsonl";
  mixasr::write_decodes_jsonl((fs::path(args.out) / name).string(), decodes, test.vocab);

  int by_empty = 0, by_max = 0, by_fixed = 0;
  for (const auto& d : decodes) {
    if (d.stopped_by == mixasr::kStoppedEmpty) ++by_empty;
    else if (d.stopped_by == mixasr::kStoppedMax) ++by_max;
    else ++by_fixed;
  }
  update_files_manifest(args.out, "decode", {name, "config.echo.ini", "provenance.json"});
  std::cout << "decoded " << decodes.size() << " utterances (stopped_by empty_output=" << by_empty
            << " max_speakers=" << by_max << " fixed_J=" << by_fixed << ") -> " << name << "\n";
  return 0;
}

int run_evaluate(const CliArgs& args) {
  mixasr::RunConfig cfg = effective_config(args);
  write_run_stamp(cfg, args.out);
  const std::string corpus_dir = (fs::path(args.out) / "corpus").string();
  mixasr::LoadedCorpus test = mixasr::load_corpus(corpus_dir, "test");
  const std::string policy = mixasr::to_string(cfg.decode_policy);
  const std::string hyps_name = "hyps_test_" + policy + ".jsonl";
  auto decodes =
      mixasr::read_decodes_jsonl((fs::path(args.out) / hyps_name).string(), test.vocab);
  mixasr::EvalSummary summary = mixasr::evaluate_decodes(test, decodes, "test", policy);
  const std::string eval_name = "eval_test_" + policy + ".json";
  mixasr::write_eval_summary_json((fs::path(args.out) / eval_name).string(), summary);
  update_files_manifest(args.out, "evaluate", {eval_name, "config.echo.ini", "provenance.json"});
  std::cout << "wer " << summary.wer << " over " << summary.utterances << " utterances -> "
            << eval_name << "\n";
  return 0;
}

int run_benchmark_rtf(const CliArgs& args) {
  mixasr::RunConfig cfg = effective_config(args);
  write_run_stamp(cfg, args.out);
  const std::string corpus_dir = (fs::path(args.out) / "corpus").string();
  mixasr::LoadedCorpus test = mixasr::load_corpus(corpus_dir, "test");
  mixasr::ChainModel model =
      mixasr::load_chain_model((fs::path(args.out) / "model.ckpt").string());

  mixasr::RtfReport report = mixasr::measure_rtf(model, test, cfg.decode_policy, cfg.fixed_steps,
                                                 cfg.max_speakers, cfg.rtf_repeats);
  ordered_json j;
  j["policy"] = mixasr::to_string(cfg.decode_policy);
  j["utterances"] = report.utterances;
  j["frames"] = report.frames;
  j["audio_seconds"] = report.audio_seconds;
  j["repeats"] = report.repeats;
  j["mean_seconds"] = report.mean_seconds;
  j["best_seconds"] = report.best_seconds;
  j["mean_seconds_excl_stop"] = report.mean_seconds_excl_stop;
  j["best_seconds_excl_stop"] = report.best_seconds_excl_stop;
  j["rtf_mean"] = report.rtf_mean;
  j["rtf_best"] = report.rtf_best;
  j["rtf_mean_excl_stop"] = report.rtf_mean_excl_stop;
  j["rtf_best_excl_stop"] = report.rtf_best_excl_stop;
  j["encoder_calls_per_pass"] = report.encoder_calls_per_pass;
  const std::string name = "rtf_test_" + mixasr::to_string(cfg.decode_policy) + ".json";
  std::ofstream out(fs::path(args.out) / name, std::ios::trunc);
  out << j.dump(2) << "\n";
  update_files_manifest(args.out, "benchmark-rtf", {name, "config.echo.ini", "provenance.json"});
  std::cout << "rtf_mean " << report.rtf_mean << " rtf_best " << report.rtf_best << " -> " << name
            << "\n";
  return 0;
}

int run_report(const CliArgs& args) {
  const std::string txt = (fs::path(args.out) / "report.txt").string();
  const std::string csv = (fs::path(args.out) / "report.csv").string();
  mixasr::render_report(args.out, txt, csv);
  update_files_manifest(args.out, "report", {"report.txt", "report.csv"});
  std::cout << "wrote " << txt << " and " << csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixasr: multi-speaker CTC speech recognition with a conditional speaker chain"};
  app.require_subcommand(1);

  CliArgs args;
  auto add_common = [&args](CLI::App* cmd, bool config_required) {
    auto* config = cmd->add_option("--config", args.config_path, "INI config file");
    if (config_required) config->required();
    cmd->add_option("--preset", args.preset, "Base preset: tiny or paper")
        ->check(CLI::IsMember({"tiny", "paper"}));
    cmd->add_option("--seed", args.seed, "Override corpus and training seeds");
    cmd->add_option("--out", args.out, "Artifact directory");
  };

  auto* gen = app.add_subcommand("generate-data", "Synthesize a mixture corpus");
  add_common(gen, true);

  auto* train = app.add_subcommand("train", "Train the conditional chain model");
  add_common(train, true);
  train->add_option("--resume", args.resume, "Checkpoint to continue from");

  auto* decode = app.add_subcommand("decode", "Decode the test split");
  add_common(decode, true);
  decode->add_option("--policy", args.policy, "fixed or adaptive")
      ->check(CLI::IsMember({"fixed", "adaptive"}));
  decode->add_option("--max-speakers", args.max_speakers, "Adaptive decoding cap");
  decode->add_option("--workers", args.workers, "Parallel decode threads")
      ->check(CLI::PositiveNumber);

  auto* evaluate = app.add_subcommand("evaluate", "Score decoded hypotheses");
  add_common(evaluate, true);
  evaluate->add_option("--policy", args.policy, "Which decode output to score")
      ->check(CLI::IsMember({"fixed", "adaptive"}));

  auto* rtf = app.add_subcommand("benchmark-rtf", "Measure decoding real-time factor");
  add_common(rtf, true);
  rtf->add_option("--policy", args.policy, "fixed or adaptive")
      ->check(CLI::IsMember({"fixed", "adaptive"}));
  rtf->add_option("--max-speakers", args.max_speakers, "Adaptive decoding cap");

  auto* report = app.add_subcommand("report", "Render report.txt/report.csv from artifacts");
  report->add_option("--out", args.out, "Artifact directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) return run_generate_data(args);
    if (train->parsed()) return run_train(args);
    if (decode->parsed()) return run_decode(args);
    if (evaluate->parsed()) return run_evaluate(args);
    if (rtf->parsed()) return run_benchmark_rtf(args);
    if (report->parsed()) return run_report(args);
  } catch (const mixasr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
