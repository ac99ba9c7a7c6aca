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

#ifndef DET_EVAL_HPP_
#define DET_EVAL_HPP_

#include <filesystem>
#include <optional>
#include <vector>

#include "det/corpus.hpp"
#include "det/noise_model.hpp"
#include "det/perturb.hpp"
#include "json.hpp"

namespace det {

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct ConsistencyScore {
  long pair_count = 0;
  long sub_count = 0;
  double accuracy = 0.0;
};

struct MetricsReport {
  double mrr = 0.0;
  double macro_p = 0.0;
  double macro_r = 0.0;
  double macro_f1 = 0.0;
  double threshold_used = 0.5;
  std::vector<PrPoint> pr_curve;
  ConsistencyScore consistency;
};

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);
void write_pr_curve_csv(const std::vector<PrPoint>& curve, const std::filesystem::path& path);
// One {"id", "scores"} record per instance.
void write_predictions_jsonl(const Dataset& dataset, const std::vector<std::vector<double>>& scores,
                             const std::filesystem::path& path);

// Per-instance set precision averaged over instances that predict something,
// per-instance recall averaged over instances with gold types, F1 their
// harmonic mean (0 when both are 0).
PrfScore macro_prf(const std::vector<LabelVector>& predictions,
                   const std::vector<LabelVector>& gold);

// Mean over instances with gold types of the mean reciprocal rank of their
// gold types. Types are ranked by descending score, ties by ascending id.
double mrr(const std::vector<std::vector<double>>& scores, const std::vector<LabelVector>& gold);

// 1{score >= threshold}.
std::vector<LabelVector> binarize(const std::vector<std::vector<double>>& scores,
                                  double threshold);

struct ThresholdChoice {
  double threshold = 0.5;
  double f1 = 0.0;
};

// Scans k / grid_size for k = 1 .. grid_size - 1 and keeps the first
// threshold with the highest macro F1.
ThresholdChoice tune_threshold(const std::vector<std::vector<double>>& scores,
                               const std::vector<LabelVector>& gold, int grid_size = 50);

// One point per threshold k / grid_size, k = 1 .. grid_size. The last point
// (threshold 1) is the degenerate end of the curve.
std::vector<PrPoint> pr_curve(const std::vector<std::vector<double>>& scores,
                              const std::vector<LabelVector>& gold, int grid_size = 50);

// How often a predicted subtype comes with its supertype.
ConsistencyScore consistency(const std::vector<LabelVector>& predictions,
                             const HierarchyPairs& pairs);

// Full report for typing scores. A given threshold overrides tuning.
MetricsReport evaluate_scores(const std::vector<std::vector<double>>& scores,
                              const std::vector<LabelVector>& gold, const HierarchyPairs& pairs,
                              int grid_size = 50,
                              std::optional<double> threshold = std::nullopt);

struct NoiseRecoveryScores {
  PrfScore gold;
  PrfScore low_recall;
  PrfScore low_precision;
};

// Recovered labels from one noise-model pass, binarized at `threshold`.
std::vector<LabelVector> recover_labels(const NoiseModel& model, const Dataset& dataset,
                                        double threshold = 0.5);

// Recovery quality on the unperturbed dev set and its two corruptions, each
// scored against the uncorrupted labels.
NoiseRecoveryScores noise_recovery_f1(const NoiseModel& model, const Dataset& gold_dev,
                                      const std::vector<PerturbedInstance>& low_recall,
                                      const std::vector<PerturbedInstance>& low_precision);

std::vector<LabelVector> labels_of(const Dataset& dataset);
// Hidden truth where present, observed labels otherwise.
std::vector<LabelVector> gold_labels_of(const Dataset& dataset);

}  // namespace det

#endif  // DET_EVAL_HPP_
