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

#ifndef DET_TRAIN_LOOP_HPP_
#define DET_TRAIN_LOOP_HPP_

#include <filesystem>
#include <optional>
#include <vector>

#include "det/config.hpp"
#include "det/corpus.hpp"
#include "det/eval.hpp"
#include "det/noise_model.hpp"
#include "det/typing_model.hpp"

namespace det {

// Data for one run. `dev` may be empty, in which case metrics use `gold`.
struct RunData {
  Dataset gold;
  Dataset distant;
  Dataset dev;
  HierarchyPairs pairs;
};

struct IterationRecord {
  int iteration = 0;  // 1-based
  double alpha = 0.0;
  std::vector<NoiseLossRecord> noise_trace;
  std::vector<TypingLossRecord> typing_trace;
  // Typing model on the evaluation set after this iteration.
  MetricsReport metrics;
  // Label quality against hidden truth; only set when every distant
  // instance carries gold labels.
  std::optional<PrfScore> d_prime_quality;
  std::optional<PrfScore> denoised_quality;
};

struct IterationResult {
  std::optional<NoiseModel> noise;
  TypingModel typing;
  std::vector<IterationRecord> iterations;

  const MetricsReport& final_metrics() const { return iterations.back().metrics; }
};

// Initial models for a run. The token vocabulary covers gold plus `extra`.
NoiseModel initial_noise_model(const RunConfig& config, const RunData& data);
TypingModel initial_typing_model(const RunConfig& config, const Dataset& gold,
                                 const Dataset& extra);

// One noise-model phase of iteration `iteration` (1-based). Without `fixed`,
// D_P is redrawn from gold and distant for every epoch.
NoiseTrainResult noise_phase(const RunConfig& config, const RunData& data, NoiseModel model,
                             const Dataset& d_prime, double alpha, int iteration,
                             const std::vector<PerturbedInstance>* fixed = nullptr);
// One warm-started typing-model phase on gold plus `extra`.
TypingTrainResult typing_phase(const RunConfig& config, const Dataset& gold, TypingModel model,
                               const Dataset& extra, int iteration);

// The alternating noise-model / typing-model loop. Writes iter-k/ artifacts
// and run.json below config.paths.run_dir when it is set. Errors are
// re-raised with the iteration number and phase.
IterationResult run_iterations(const RunConfig& config, const RunData& data);

// Runs the variant named by config.ablation with the same typing-model
// budget as the full loop.
IterationResult ablation_run(const RunConfig& config, const RunData& data);

// Reads gold, distant, dev and hierarchy from config.paths (dev and
// hierarchy optional).
RunData load_run_data(const RunConfig& config);

}  // namespace det

#endif  // DET_TRAIN_LOOP_HPP_
