/*
 * Copyright 2026 The det Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// det: command-line front end over the det C API.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "det/c_api.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Thrown by check(); carries the exit code for the failed status.
struct Failure {
  int code;
};

void check(det_status status, const char* what) {
  if (status == DET_OK) return;
  std::fprintf(stderr, "det: %s: %s: %s\n", what, det_status_name(status), det_last_error());
  const bool usage = status == DET_ERR_CONFIG || status == DET_ERR_ARGUMENT;
  throw Failure{usage ? kExitUsage : kExitRuntime};
}

[[noreturn]] void usage_error(const std::string& message) {
  std::fprintf(stderr, "det: %s\n", message.c_str());
  throw Failure{kExitUsage};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<det_config, Deleter<det_config, det_config_free>>;
using Vocab = std::unique_ptr<det_vocab, Deleter<det_vocab, det_vocab_free>>;
using Data = std::unique_ptr<det_dataset, Deleter<det_dataset, det_dataset_free>>;
using Perturbed = std::unique_ptr<det_perturbed, Deleter<det_perturbed, det_perturbed_free>>;
using Noise = std::unique_ptr<det_noise_model, Deleter<det_noise_model, det_noise_model_free>>;
using Typing =
    std::unique_ptr<det_typing_model, Deleter<det_typing_model, det_typing_model_free>>;
using Metrics = std::unique_ptr<det_metrics, Deleter<det_metrics, det_metrics_free>>;

struct Options {
  std::string config;
  std::optional<uint64_t> seed;
  bool force = false;
  std::optional<double> threshold;
  std::string out;
  std::string data;
  std::string model;
  std::string typing_model;
  std::string perturbed;
  std::string denoised;
  std::string run_dir;
  std::string ablation;
  std::string id;
};

Config load_config(const Options& o) {
  det_config* raw = nullptr;
  check(det_config_load(o.config.c_str(), &raw), "loading config");
  Config c(raw);
  if (o.seed) check(det_config_set_seed(c.get(), *o.seed), "--seed");
  return c;
}

std::string config_path(const det_config* config, const char* which) {
  char* raw = nullptr;
  check(det_config_path(config, which, &raw), "reading config");
  std::string out(raw);
  det_string_free(raw);
  return out;
}

// Refuses to replace an existing file unless --force.
void guard_output(const std::string& path, bool force) {
  if (!force && std::filesystem::exists(path)) {
    usage_error(path + " already exists (use --force to overwrite)");
  }
}

Data load_data(const det_config* config, const std::string& path, const char* which,
               const char* kind) {
  det_dataset* raw = nullptr;
  if (path.empty()) {
    check(det_config_load_dataset(config, which, &raw), "loading dataset");
  } else {
    det_vocab* v = nullptr;
    check(det_config_load_vocab(config, &v), "loading vocabulary");
    Vocab vocab(v);
    check(det_dataset_load(path.c_str(), vocab.get(), kind, &raw), "loading dataset");
  }
  return Data(raw);
}

int cmd_gen(const Options& o) {
  Config c = load_config(o);
  if (!o.force && std::filesystem::exists(o.out) && !std::filesystem::is_empty(o.out)) {
    usage_error(o.out + " is not empty (use --force to overwrite)");
  }
  check(det_generate(c.get(), o.out.c_str()), "generating corpus");
  std::printf("wrote vocab.txt, gold.jsonl, distant.jsonl, dev.jsonl, hierarchy.tsv to %s\n",
              o.out.c_str());
  return 0;
}

int cmd_perturb(const Options& o) {
  Config c = load_config(o);
  guard_output(o.out, o.force);
  det_perturbed* raw = nullptr;
  check(det_perturb(c.get(), &raw), "perturbing gold data");
  Perturbed p(raw);
  check(det_perturbed_save(p.get(), o.out.c_str()), "writing perturbed set");
  std::printf("wrote %zu perturbed instances to %s\n", det_perturbed_size(p.get()),
              o.out.c_str());
  return 0;
}

int cmd_train_noise(const Options& o) {
  Config c = load_config(o);
  guard_output(o.out, o.force);
  Perturbed fixed;
  if (!o.perturbed.empty()) {
    det_vocab* v = nullptr;
    check(det_config_load_vocab(c.get(), &v), "loading vocabulary");
    Vocab vocab(v);
    det_perturbed* raw = nullptr;
    check(det_perturbed_load(o.perturbed.c_str(), vocab.get(), &raw), "loading perturbed set");
    fixed.reset(raw);
  }
  det_noise_model* raw = nullptr;
  check(det_train_noise(c.get(), fixed.get(), -1.0, &raw), "training noise model");
  Noise model(raw);
  check(det_noise_model_save(model.get(), o.out.c_str()), "saving noise model");
  std::printf("wrote noise model to %s\n", o.out.c_str());
  return 0;
}

int cmd_denoise(const Options& o) {
  Config c = load_config(o);
  guard_output(o.out, o.force);
  double threshold = 0.5;
  check(det_config_threshold(c.get(), "denoise", &threshold), "reading threshold");
  if (o.threshold) threshold = *o.threshold;
  det_noise_model* nm = nullptr;
  check(det_noise_model_load(o.model.c_str(), &nm), "loading noise model");
  Noise model(nm);
  Data in = load_data(c.get(), o.data, "distant", "distant");
  det_dataset* raw = nullptr;
  check(det_denoise(model.get(), in.get(), threshold, &raw), "denoising");
  Data out(raw);
  check(det_dataset_save(out.get(), o.out.c_str()), "writing denoised data");
  std::printf("wrote %zu denoised instances to %s\n", det_dataset_size(out.get()),
              o.out.c_str());
  return 0;
}

int cmd_train_typing(const Options& o) {
  Config c = load_config(o);
  guard_output(o.out, o.force);
  Data denoised;
  if (!o.denoised.empty()) denoised = load_data(c.get(), o.denoised, "distant", "denoised");
  det_typing_model* raw = nullptr;
  check(det_train_typing(c.get(), denoised.get(), &raw), "training typing model");
  Typing model(raw);
  check(det_typing_model_save(model.get(), o.out.c_str()), "saving typing model");
  std::printf("wrote typing model to %s\n", o.out.c_str());
  return 0;
}

void print_metrics(const det_metrics* m) {
  std::printf("MRR %.4f  P %.4f  R %.4f  F1 %.4f  threshold %.2f\n", det_metrics_mrr(m),
              det_metrics_macro_p(m), det_metrics_macro_r(m), det_metrics_macro_f1(m),
              det_metrics_threshold(m));
}

int cmd_iterate(const Options& o) {
  Config c = load_config(o);
  if (!o.run_dir.empty()) check(det_config_set_run_dir(c.get(), o.run_dir.c_str()), "--run-dir");
  if (!o.ablation.empty()) check(det_config_set_ablation(c.get(), o.ablation.c_str()), "--ablation");
  if (o.threshold) check(det_config_set_threshold(c.get(), *o.threshold), "--threshold");
  det_metrics* raw = nullptr;
  check(det_iterate(c.get(), o.force ? 1 : 0, &raw), "iterating");
  Metrics m(raw);
  std::printf("run directory %s\nfinal ", config_path(c.get(), "run_dir").c_str());
  print_metrics(m.get());
  return 0;
}

int cmd_eval(const Options& o) {
  Config c = load_config(o);
  const std::filesystem::path out = o.out;
  guard_output((out / "metrics.json").string(), o.force);
  guard_output((out / "pr_curve.csv").string(), o.force);
  double threshold = -1.0;
  check(det_config_threshold(c.get(), "eval", &threshold), "reading threshold");
  if (o.threshold) threshold = *o.threshold;
  det_typing_model* tm = nullptr;
  check(det_typing_model_load(o.model.c_str(), &tm), "loading typing model");
  Typing model(tm);
  Data data = load_data(c.get(), o.data, "dev", "gold");

  const std::string hierarchy = config_path(c.get(), "hierarchy");
  det_metrics* raw = nullptr;
  check(det_evaluate(model.get(), data.get(), hierarchy.empty() ? nullptr : hierarchy.c_str(),
                     det_config_grid_size(c.get()), threshold, &raw),
        "evaluating");
  Metrics m(raw);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) usage_error("cannot create " + out.string());
  check(det_metrics_save(m.get(), (out / "metrics.json").c_str(), (out / "pr_curve.csv").c_str()),
        "writing metrics");
  check(det_write_predictions(model.get(), data.get(), (out / "predictions.jsonl").c_str()),
        "writing predictions");
  print_metrics(m.get());
  return 0;
}

int cmd_inspect(const Options& o) {
  Config c = load_config(o);
  det_noise_model* nm = nullptr;
  check(det_noise_model_load(o.model.c_str(), &nm), "loading noise model");
  Noise noise(nm);
  det_typing_model* tm = nullptr;
  check(det_typing_model_load(o.typing_model.c_str(), &tm), "loading typing model");
  Typing typing(tm);
  det_vocab* v = nullptr;
  check(det_config_load_vocab(c.get(), &v), "loading vocabulary");
  Vocab vocab(v);
  Data data = load_data(c.get(), o.data, "distant", "distant");

  size_t index = 0;
  check(det_dataset_find(data.get(), o.id.c_str(), &index), "finding instance");
  const size_t t = det_dataset_num_types(data.get());
  std::vector<uint8_t> ds(t);
  std::vector<double> e(t), y(t), s(t);
  check(det_dataset_labels(data.get(), index, ds.data()), "reading labels");
  check(det_noise_estimate(noise.get(), data.get(), index, e.data()), "estimating noise");
  check(det_noise_recover(noise.get(), data.get(), index, y.data()), "recovering labels");
  check(det_typing_score(typing.get(), data.get(), index, s.data()), "scoring");
  const double cut = o.threshold.value_or(0.5);

  std::vector<size_t> rows;
  for (size_t i = 0; i < t; ++i) {
    if (ds[i] || y[i] > cut || s[i] > cut) rows.push_back(i);
  }
  std::stable_sort(rows.begin(), rows.end(), [&](size_t a, size_t b) { return y[a] > y[b]; });

  char* text = nullptr;
  check(det_dataset_instance_text(data.get(), index, &text), "reading instance");
  std::printf("%s: %s\n", o.id.c_str(), text);
  det_string_free(text);
  size_t width = 4;
  for (size_t i : rows) width = std::max(width, std::string(det_vocab_phrase(vocab.get(), i)).size());
  std::printf("%-*s  %2s  %8s  %8s  %8s  %s\n", static_cast<int>(width), "type", "DS", "noise",
              "recover", "score", "note");
  for (size_t i : rows) {
    const char* note = "";
    if (!ds[i] && y[i] > cut) note = "added";
    if (ds[i] && y[i] <= cut) note = "removed";
    std::printf("%-*s  %2d  %8.4f  %8.4f  %8.4f  %s\n", static_cast<int>(width),
                det_vocab_phrase(vocab.get(), i), ds[i], e[i], y[i], s[i], note);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Denoising-enhanced distantly supervised entity typing"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "run config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override every seed in the config");
    sub->add_flag("--force", o.force, "overwrite existing outputs");
  };

  auto* gen = app.add_subcommand("gen", "generate the synthetic corpus");
  add_common(gen);
  gen->add_option("-o,--out", o.out, "output directory")->required();

  auto* perturb = app.add_subcommand("perturb", "build the perturbed gold set D_P");
  add_common(perturb);
  perturb->add_option("-o,--out", o.out, "output JSONL")->required();

  auto* train_noise = app.add_subcommand("train-noise", "train the noise model once");
  add_common(train_noise);
  train_noise->add_option("--perturbed", o.perturbed, "fixed D_P (default: redraw each epoch)");
  train_noise->add_option("-o,--out", o.out, "output checkpoint")->required();

  auto* denoise = app.add_subcommand("denoise", "denoise a distant dataset");
  add_common(denoise);
  denoise->add_option("-m,--model", o.model, "noise-model checkpoint")->required();
  denoise->add_option("-d,--data", o.data, "dataset (default: paths.distant)");
  denoise->add_option("--threshold", o.threshold, "binarization threshold");
  denoise->add_option("-o,--out", o.out, "output JSONL")->required();

  auto* train_typing = app.add_subcommand("train-typing", "train the typing model once");
  add_common(train_typing);
  train_typing->add_option("--denoised", o.denoised, "denoised distant data");
  train_typing->add_option("-o,--out", o.out, "output checkpoint")->required();

  auto* iterate = app.add_subcommand("iterate", "run the iterative training loop");
  add_common(iterate);
  iterate->add_option("--run-dir", o.run_dir, "run directory (default: paths.run_dir)");
  iterate->add_option("--ablation", o.ablation,
                      "full | no_denoise | no_denoise_no_dn | no_cross_attention");
  iterate->add_option("--threshold", o.threshold, "fixed evaluation threshold");

  auto* eval = app.add_subcommand("eval", "evaluate a typing model");
  add_common(eval);
  eval->add_option("-m,--model", o.model, "typing-model checkpoint")->required();
  eval->add_option("-d,--data", o.data, "dataset (default: paths.dev)");
  eval->add_option("--threshold", o.threshold, "fixed threshold instead of tuning");
  eval->add_option("-o,--out", o.out, "output directory for metrics.json, pr_curve.csv and predictions.jsonl")
      ->required();

  auto* inspect = app.add_subcommand("inspect", "per-type table for one instance");
  add_common(inspect);
  inspect->add_option("--noise-model", o.model, "noise-model checkpoint")->required();
  inspect->add_option("--typing-model", o.typing_model, "typing-model checkpoint")->required();
  inspect->add_option("--id", o.id, "instance id")->required();
  inspect->add_option("-d,--data", o.data, "dataset (default: paths.distant)");
  inspect->add_option("--threshold", o.threshold, "display cut (default 0.5)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (o.threshold && !(*o.threshold >= 0.0 && *o.threshold <= 1.0)) {
    std::fprintf(stderr, "det: --threshold must lie in [0, 1]\n");
    return kExitUsage;
  }
  try {
    if (*gen) return cmd_gen(o);
    if (*perturb) return cmd_perturb(o);
    if (*train_noise) return cmd_train_noise(o);
    if (*denoise) return cmd_denoise(o);
    if (*train_typing) return cmd_train_typing(o);
    if (*iterate) return cmd_iterate(o);
    if (*eval) return cmd_eval(o);
    if (*inspect) return cmd_inspect(o);
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "det: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
