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

#ifndef DET_CONFIG_HPP_
#define DET_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "det/corpus.hpp"
#include "det/encoder.hpp"
#include "det/optimizer.hpp"
#include "json.hpp"

namespace det {

enum class AblationMode { kFull, kNoDenoise, kNoDenoiseNoDistant, kNoCrossAttention };

const char* ablation_mode_name(AblationMode mode);
// Accepts full | no_denoise | no_denoise_no_dn | no_cross_attention.
AblationMode parse_ablation_mode(const std::string& name);

struct IterationConfig {
  int num_iterations = 3;
  double alpha_0 = 0.25;
  double alpha_growth = 2.0;
  double alpha_cap = 1.0;
  double drop_rate = 0.7;
  double denoise_threshold = 0.5;
  double relabel_threshold = 0.5;
  OptimizerConfig noise_optimizer;
  OptimizerConfig typing_optimizer;
  uint64_t seed = 1;
  int grid_size = 50;

  void validate() const;
  // alpha_1 .. alpha_K.
  std::vector<double> alpha_schedule() const;
};

struct RunPaths {
  std::filesystem::path vocab;
  std::filesystem::path gold;
  std::filesystem::path distant;
  std::filesystem::path dev;
  std::filesystem::path hierarchy;
  std::filesystem::path run_dir;
};

// Everything a CLI command needs. All numeric hyperparameters live here.
struct RunConfig {
  RunPaths paths;
  SynthConfig synth;
  EncoderConfig encoder;
  IterationConfig iteration;
  std::optional<double> eval_threshold;
  AblationMode ablation = AblationMode::kFull;

  void validate() const;
};

// Relative paths are resolved against `base_dir`. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const OptimizerConfig& config);
nlohmann::json to_json(const SynthConfig& config);

}  // namespace det

#endif  // DET_CONFIG_HPP_
