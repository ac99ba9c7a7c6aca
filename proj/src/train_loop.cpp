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

#include "det/train_loop.hpp"

#include <cstdio>
#include <fstream>

#include "det/error.hpp"
#include "det/perturb.hpp"
#include "det/random.hpp"

namespace det {

using nlohmann::json;

namespace {

enum : uint64_t {
  kStreamNoiseInit = 31,
  kStreamTypingInit = 32,
  kStreamNoiseOpt = 33,
  kStreamTypingOpt = 34,
  kStreamPerturb = 35,
};

template <typename F>
auto in_phase(int iteration, const char* phase, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.kind(), "iteration " + std::to_string(iteration) + ", " + phase + ": " +
                              e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kState, "iteration " + std::to_string(iteration) + ", " + phase +
                                       ": " + e.what());
  }
}

std::optional<PrfScore> label_quality(const Dataset& ds) {
  if (ds.empty()) return std::nullopt;
  for (const auto& inst : ds.instances) {
    if (!inst.gold_labels) return std::nullopt;
  }
  return macro_prf(labels_of(ds), gold_labels_of(ds));
}

MetricsReport evaluate_typing(const TypingModel& model, const RunConfig& config,
                              const RunData& data) {
  const Dataset& eval = data.dev.empty() ? data.gold : data.dev;
  return evaluate_scores(score_dataset(model, eval), labels_of(eval), data.pairs,
                         config.iteration.grid_size, config.eval_threshold);
}

OptimizerConfig phase_optimizer(const OptimizerConfig& base, uint64_t run_seed, uint64_t stream,
                                int iteration) {
  OptimizerConfig c = base;
  c.seed = derive_seed(run_seed, {stream, static_cast<uint64_t>(iteration), base.seed});
  return c;
}

EncoderConfig tower_config(const RunConfig& config, const TokenVocabulary& tokens,
                           uint64_t stream) {
  EncoderConfig c = config.encoder;
  c.vocab_size = tokens.size();
  c.seed = derive_seed(config.encoder.seed, {stream});
  return c;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::filesystem::path iteration_dir(const RunConfig& config, int k) {
  if (config.paths.run_dir.empty()) return {};
  auto dir = config.paths.run_dir / ("iter-" + std::to_string(k));
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_record(const std::filesystem::path& dir, const IterationRecord& rec) {
  json m = to_json(rec.metrics);
  m["iteration"] = rec.iteration;
  m["alpha"] = rec.alpha;
  if (rec.d_prime_quality) {
    m["d_prime_label_f1"] = rec.d_prime_quality->f1;
  }
  if (rec.denoised_quality) {
    m["denoised_label_f1"] = rec.denoised_quality->f1;
  }
  write_text(dir / "metrics.json", m.dump(2) + "\n");

  if (!rec.noise_trace.empty()) {
    std::string csv = "epoch,J_DP,J_DN,J_total\n";
    for (const auto& r : rec.noise_trace) {
      csv += std::to_string(r.epoch) + "," + fmt(r.j_dp) + "," + fmt(r.j_dn) + "," +
             fmt(r.j_total) + "\n";
    }
    write_text(dir / "losses.csv", csv);
  }
  std::string csv = "epoch,J_typing\n";
  for (const auto& r : rec.typing_trace) {
    csv += std::to_string(r.epoch) + "," + fmt(r.loss) + "\n";
  }
  write_text(dir / "typing_losses.csv", csv);
}

void write_run_json(const RunConfig& config) {
  if (config.paths.run_dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(config.paths.run_dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + config.paths.run_dir.string());
  write_text(config.paths.run_dir / "run.json", to_json(config).dump(2) + "\n");
}

void check_inputs(const RunData& data) {
  if (!data.gold.vocabulary) fail(ErrorKind::kConfig, "gold dataset has no type vocabulary");
  for (const Dataset* ds : {&data.distant, &data.dev}) {
    if (!ds->empty() && !(*ds->vocabulary == *data.gold.vocabulary)) {
      fail(ErrorKind::kVocabulary, "datasets use different type vocabularies");
    }
  }
}

// Typing model trained K times (warm start) on gold plus a fixed extra set.
IterationResult typing_only(const RunConfig& config, const RunData& data, const Dataset& extra) {
  const auto& it = config.iteration;
  IterationResult result{std::nullopt, initial_typing_model(config, data.gold, extra), {}};
  write_run_json(config);
  for (int k = 1; k <= it.num_iterations; ++k) {
    IterationRecord rec;
    rec.iteration = k;
    auto trained = in_phase(k, "typing training", [&] {
      return typing_phase(config, data.gold, std::move(result.typing), extra, k);
    });
    result.typing = std::move(trained.model);
    rec.typing_trace = std::move(trained.trace);
    rec.metrics = in_phase(k, "evaluation", [&] { return evaluate_typing(result.typing, config, data); });
    if (auto dir = iteration_dir(config, k); !dir.empty()) {
      in_phase(k, "writing artifacts", [&] {
        result.typing.to_checkpoint().save(dir / "typing.ckpt");
        write_record(dir, rec);
        return 0;
      });
    }
    result.iterations.push_back(std::move(rec));
  }
  return result;
}

}  // namespace

NoiseModel initial_noise_model(const RunConfig& config, const RunData& data) {
  TokenVocabulary tokens = build_token_vocabulary(*data.gold.vocabulary, {&data.gold, &data.distant});
  const NoiseEncoding encoding = config.ablation == AblationMode::kNoCrossAttention
                                     ? NoiseEncoding::kSeparateSum
                                     : NoiseEncoding::kJoint;
  EncoderConfig enc = tower_config(config, tokens, kStreamNoiseInit);
  return NoiseModel::initialize(data.gold.vocabulary, std::move(tokens), enc, encoding);
}

TypingModel initial_typing_model(const RunConfig& config, const Dataset& gold,
                                 const Dataset& extra) {
  std::vector<const Dataset*> sources{&gold};
  if (!extra.empty()) sources.push_back(&extra);
  TokenVocabulary tokens = build_token_vocabulary(*gold.vocabulary, sources);
  EncoderConfig enc = tower_config(config, tokens, kStreamTypingInit);
  return TypingModel::initialize(gold.vocabulary, std::move(tokens), enc);
}

NoiseTrainResult noise_phase(const RunConfig& config, const RunData& data, NoiseModel model,
                             const Dataset& d_prime, double alpha, int iteration,
                             const std::vector<PerturbedInstance>* fixed) {
  const auto& it = config.iteration;
  const OptimizerConfig opt = phase_optimizer(it.noise_optimizer, it.seed, kStreamNoiseOpt, iteration);
  if (fixed) return train_noise_model(std::move(model), *fixed, d_prime, alpha, opt);
  const PerturbedSource source = [&](int epoch) {
    return build_dp(data.gold, data.distant, it.drop_rate,
                    derive_seed(it.seed, {kStreamPerturb, static_cast<uint64_t>(iteration),
                                          static_cast<uint64_t>(epoch)}));
  };
  return train_noise_model(std::move(model), source, d_prime, alpha, opt);
}

TypingTrainResult typing_phase(const RunConfig& config, const Dataset& gold, TypingModel model,
                               const Dataset& extra, int iteration) {
  const auto& it = config.iteration;
  return train_typing(std::move(model), gold, extra,
                      phase_optimizer(it.typing_optimizer, it.seed, kStreamTypingOpt, iteration));
}

IterationResult run_iterations(const RunConfig& config, const RunData& data) {
  config.validate();
  check_inputs(data);
  const auto& it = config.iteration;
  NoiseModel noise = initial_noise_model(config, data);
  IterationResult result{std::nullopt, initial_typing_model(config, data.gold, data.distant), {}};
  write_run_json(config);

  Dataset d_prime = data.distant;
  const auto alphas = it.alpha_schedule();
  for (int k = 1; k <= it.num_iterations; ++k) {
    IterationRecord rec;
    rec.iteration = k;
    rec.alpha = alphas[static_cast<size_t>(k - 1)];
    rec.d_prime_quality = label_quality(d_prime);
    const auto dir = iteration_dir(config, k);
    if (!dir.empty()) {
      in_phase(k, "writing artifacts", [&] {
        save_jsonl(d_prime, dir / "d_prime.jsonl");
        return 0;
      });
    }

    auto noise_trained = in_phase(k, "noise-model training", [&] {
      return noise_phase(config, data, std::move(noise), d_prime, rec.alpha, k);
    });
    noise = std::move(noise_trained.model);
    rec.noise_trace = std::move(noise_trained.trace);

    Dataset denoised = in_phase(k, "denoising",
                                [&] { return denoise_dataset(noise, d_prime, it.denoise_threshold); });
    rec.denoised_quality = label_quality(denoised);

    auto typing_trained = in_phase(k, "typing training", [&] {
      return typing_phase(config, data.gold, std::move(result.typing), denoised, k);
    });
    result.typing = std::move(typing_trained.model);
    rec.typing_trace = std::move(typing_trained.trace);

    d_prime = in_phase(k, "relabeling", [&] {
      return relabel_dataset(result.typing, d_prime, it.relabel_threshold);
    });
    rec.metrics = in_phase(k, "evaluation", [&] { return evaluate_typing(result.typing, config, data); });

    if (!dir.empty()) {
      in_phase(k, "writing artifacts", [&] {
        noise.to_checkpoint().save(dir / "noise.ckpt");
        result.typing.to_checkpoint().save(dir / "typing.ckpt");
        save_jsonl(denoised, dir / "d_denoised.jsonl");
        write_record(dir, rec);
        return 0;
      });
    }
    result.iterations.push_back(std::move(rec));
  }
  result.noise = std::move(noise);
  return result;
}

IterationResult ablation_run(const RunConfig& config, const RunData& data) {
  config.validate();
  check_inputs(data);
  switch (config.ablation) {
    case AblationMode::kFull:
    case AblationMode::kNoCrossAttention:
      return run_iterations(config, data);
    case AblationMode::kNoDenoise:
      return typing_only(config, data, data.distant);
    case AblationMode::kNoDenoiseNoDistant: {
      Dataset none;
      none.vocabulary = data.gold.vocabulary;
      none.kind = DatasetKind::kDistant;
      return typing_only(config, data, none);
    }
  }
  fail(ErrorKind::kConfig, "unknown ablation mode");
}

RunData load_run_data(const RunConfig& config) {
  const auto& p = config.paths;
  if (p.vocab.empty()) fail(ErrorKind::kConfig, "config is missing paths.vocab");
  if (p.gold.empty()) fail(ErrorKind::kConfig, "config is missing paths.gold");
  auto types = std::make_shared<const TypeVocabulary>(TypeVocabulary::load(p.vocab));
  RunData data;
  data.gold = load_jsonl(p.gold, types, DatasetKind::kGold);
  data.distant.vocabulary = types;
  data.distant.kind = DatasetKind::kDistant;
  if (!p.distant.empty()) data.distant = load_jsonl(p.distant, types, DatasetKind::kDistant);
  data.dev.vocabulary = types;
  data.dev.kind = DatasetKind::kGold;
  if (!p.dev.empty()) data.dev = load_jsonl(p.dev, types, DatasetKind::kGold);
  if (!p.hierarchy.empty()) data.pairs = load_hierarchy(p.hierarchy, *types);
  return data;
}

}  // namespace det
