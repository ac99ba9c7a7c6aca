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

#include "det/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "det/checkpoint.hpp"
#include "det/error.hpp"

namespace det {

using nlohmann::json;

const char* ablation_mode_name(AblationMode mode) {
  switch (mode) {
    case AblationMode::kFull:
      return "full";
    case AblationMode::kNoDenoise:
      return "no_denoise";
    case AblationMode::kNoDenoiseNoDistant:
      return "no_denoise_no_dn";
    case AblationMode::kNoCrossAttention:
      return "no_cross_attention";
  }
  return "full";
}

AblationMode parse_ablation_mode(const std::string& name) {
  for (auto m : {AblationMode::kFull, AblationMode::kNoDenoise,
                 AblationMode::kNoDenoiseNoDistant, AblationMode::kNoCrossAttention}) {
    if (name == ablation_mode_name(m)) return m;
  }
  fail(ErrorKind::kConfig, "unknown ablation mode '" + name +
                               "' (expected full, no_denoise, no_denoise_no_dn or "
                               "no_cross_attention)");
}

void IterationConfig::validate() const {
  if (num_iterations < 1) fail(ErrorKind::kConfig, "num_iterations must be at least 1");
  if (!(alpha_0 >= 0.0)) fail(ErrorKind::kConfig, "alpha_0 must be non-negative");
  if (!(alpha_growth >= 1.0)) fail(ErrorKind::kConfig, "alpha_growth must be at least 1");
  if (!(alpha_cap >= 0.0)) fail(ErrorKind::kConfig, "alpha_cap must be non-negative");
  for (double p : {drop_rate, denoise_threshold, relabel_threshold}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      fail(ErrorKind::kConfig, "drop_rate and thresholds must lie in [0, 1]");
    }
  }
  if (grid_size < 2) fail(ErrorKind::kConfig, "grid_size must be at least 2");
  noise_optimizer.validate();
  typing_optimizer.validate();
}

std::vector<double> IterationConfig::alpha_schedule() const {
  std::vector<double> out;
  double alpha = std::min(alpha_0, alpha_cap);
  for (int k = 0; k < num_iterations; ++k) {
    out.push_back(alpha);
    alpha = std::min(alpha * alpha_growth, alpha_cap);
  }
  return out;
}

void RunConfig::validate() const {
  synth.validate();
  iteration.validate();
  EncoderConfig probe = encoder;
  probe.vocab_size = std::max(probe.vocab_size, 7);
  probe.validate();
  if (eval_threshold && !(*eval_threshold >= 0.0 && *eval_threshold <= 1.0)) {
    fail(ErrorKind::kConfig, "eval threshold must lie in [0, 1]");
  }
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::kConfig, where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) {
      fail(ErrorKind::kConfig, "unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

OptimizerConfig optimizer_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "epochs", "seed"},
                 where);
  OptimizerConfig c;
  read(j, "learning_rate", c.learning_rate);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "epsilon", c.epsilon);
  read(j, "batch_size", c.batch_size);
  read(j, "epochs", c.epochs);
  read(j, "seed", c.seed);
  return c;
}

std::filesystem::path resolve(const json& j, const char* key,
                              const std::filesystem::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  std::filesystem::path p = j.at(key).get<std::string>();
  return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

json to_json(const OptimizerConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2},
          {"epsilon", c.epsilon},             {"batch_size", c.batch_size},
          {"epochs", c.epochs},               {"seed", c.seed}};
}

json to_json(const SynthConfig& c) {
  return {{"num_types", c.num_types},
          {"num_gold", c.num_gold},
          {"num_distant", c.num_distant},
          {"num_dev", c.num_dev},
          {"mean_gold_types", c.mean_gold_types},
          {"mean_ds_types", c.mean_ds_types},
          {"drop_prob", c.drop_prob},
          {"add_prob", c.add_prob},
          {"seed", c.seed}};
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  try {
    reject_unknown(j, {"paths", "synth", "encoder", "iteration", "eval", "ablation"}, "config");
    RunConfig c;
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      reject_unknown(p, {"vocab", "gold", "distant", "dev", "hierarchy", "run_dir"}, "paths");
      c.paths.vocab = resolve(p, "vocab", base_dir);
      c.paths.gold = resolve(p, "gold", base_dir);
      c.paths.distant = resolve(p, "distant", base_dir);
      c.paths.dev = resolve(p, "dev", base_dir);
      c.paths.hierarchy = resolve(p, "hierarchy", base_dir);
      c.paths.run_dir = resolve(p, "run_dir", base_dir);
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      reject_unknown(s, {"num_types", "num_gold", "num_distant", "num_dev", "mean_gold_types",
                         "mean_ds_types", "drop_prob", "add_prob", "seed"},
                     "synth");
      read(s, "num_types", c.synth.num_types);
      read(s, "num_gold", c.synth.num_gold);
      read(s, "num_distant", c.synth.num_distant);
      read(s, "num_dev", c.synth.num_dev);
      read(s, "mean_gold_types", c.synth.mean_gold_types);
      read(s, "mean_ds_types", c.synth.mean_ds_types);
      read(s, "drop_prob", c.synth.drop_prob);
      read(s, "add_prob", c.synth.add_prob);
      read(s, "seed", c.synth.seed);
    }
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      reject_unknown(e, {"embed_dim", "num_blocks", "num_heads", "max_positions", "dropout_rate",
                         "seed"},
                     "encoder");
      c.encoder = encoder_config_from_json(e);
    }
    if (j.contains("iteration")) {
      const auto& it = j.at("iteration");
      reject_unknown(it, {"num_iterations", "alpha_0", "alpha_growth", "alpha_cap", "drop_rate",
                          "denoise_threshold", "relabel_threshold", "noise_optimizer",
                          "typing_optimizer", "seed"},
                     "iteration");
      read(it, "num_iterations", c.iteration.num_iterations);
      read(it, "alpha_0", c.iteration.alpha_0);
      read(it, "alpha_growth", c.iteration.alpha_growth);
      read(it, "alpha_cap", c.iteration.alpha_cap);
      read(it, "drop_rate", c.iteration.drop_rate);
      read(it, "denoise_threshold", c.iteration.denoise_threshold);
      read(it, "relabel_threshold", c.iteration.relabel_threshold);
      read(it, "seed", c.iteration.seed);
      if (it.contains("noise_optimizer")) {
        c.iteration.noise_optimizer =
            optimizer_from_json(it.at("noise_optimizer"), "iteration.noise_optimizer");
      }
      if (it.contains("typing_optimizer")) {
        c.iteration.typing_optimizer =
            optimizer_from_json(it.at("typing_optimizer"), "iteration.typing_optimizer");
      }
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      reject_unknown(e, {"grid_size", "threshold"}, "eval");
      read(e, "grid_size", c.iteration.grid_size);
      if (e.contains("threshold") && !e.at("threshold").is_null()) {
        c.eval_threshold = e.at("threshold").get<double>();
      }
    }
    if (j.contains("ablation")) c.ablation = parse_ablation_mode(j.at("ablation").get<std::string>());
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("malformed config: ") + e.what());
  }
}

json to_json(const RunConfig& c) {
  auto path = [](const std::filesystem::path& p) -> json {
    return p.empty() ? json(nullptr) : json(p.string());
  };
  json enc = encoder_config_to_json(c.encoder);
  enc.erase("vocab_size");
  return {{"paths",
           {{"vocab", path(c.paths.vocab)},
            {"gold", path(c.paths.gold)},
            {"distant", path(c.paths.distant)},
            {"dev", path(c.paths.dev)},
            {"hierarchy", path(c.paths.hierarchy)},
            {"run_dir", path(c.paths.run_dir)}}},
          {"synth", to_json(c.synth)},
          {"encoder", enc},
          {"iteration",
           {{"num_iterations", c.iteration.num_iterations},
            {"alpha_0", c.iteration.alpha_0},
            {"alpha_growth", c.iteration.alpha_growth},
            {"alpha_cap", c.iteration.alpha_cap},
            {"drop_rate", c.iteration.drop_rate},
            {"denoise_threshold", c.iteration.denoise_threshold},
            {"relabel_threshold", c.iteration.relabel_threshold},
            {"noise_optimizer", to_json(c.iteration.noise_optimizer)},
            {"typing_optimizer", to_json(c.iteration.typing_optimizer)},
            {"seed", c.iteration.seed}}},
          {"eval",
           {{"grid_size", c.iteration.grid_size},
            {"threshold", c.eval_threshold ? json(*c.eval_threshold) : json(nullptr)}}},
          {"ablation", ablation_mode_name(c.ablation)}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

}  // namespace det
