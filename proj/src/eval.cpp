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

#include "det/eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "det/error.hpp"

namespace det {

using nlohmann::json;

namespace {

void check_aligned(size_t a, size_t b, const char* what) {
  if (a != b) {
    fail(ErrorKind::kShape, std::string(what) + ": " + std::to_string(a) + " predictions vs " +
                                std::to_string(b) + " gold vectors");
  }
}

double grid_point(int k, int grid_size) {
  return static_cast<double>(k) / static_cast<double>(grid_size);
}

}  // namespace

PrfScore macro_prf(const std::vector<LabelVector>& predictions,
                   const std::vector<LabelVector>& gold) {
  check_aligned(predictions.size(), gold.size(), "macro_prf");
  double p_sum = 0.0, r_sum = 0.0;
  long p_count = 0, r_count = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const auto& pred = predictions[i];
    const auto& g = gold[i];
    if (pred.size() != g.size()) fail(ErrorKind::kShape, "macro_prf: label widths differ");
    long n_pred = 0, n_gold = 0, overlap = 0;
    for (size_t t = 0; t < pred.size(); ++t) {
      n_pred += pred[t];
      n_gold += g[t];
      overlap += pred[t] && g[t];
    }
    if (n_pred > 0) {
      p_sum += static_cast<double>(overlap) / static_cast<double>(n_pred);
      ++p_count;
    }
    if (n_gold > 0) {
      r_sum += static_cast<double>(overlap) / static_cast<double>(n_gold);
      ++r_count;
    }
  }
  PrfScore s;
  s.precision = p_count ? p_sum / static_cast<double>(p_count) : 0.0;
  s.recall = r_count ? r_sum / static_cast<double>(r_count) : 0.0;
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

double mrr(const std::vector<std::vector<double>>& scores, const std::vector<LabelVector>& gold) {
  check_aligned(scores.size(), gold.size(), "mrr");
  double total = 0.0;
  long counted = 0;
  std::vector<int> order;
  for (size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const auto& g = gold[i];
    if (s.size() != g.size()) fail(ErrorKind::kShape, "mrr: score and label widths differ");
    if (std::none_of(g.begin(), g.end(), [](uint8_t v) { return v != 0; })) continue;
    order.resize(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s[a] > s[b]; });
    double sum = 0.0;
    long n_gold = 0;
    for (size_t rank = 0; rank < order.size(); ++rank) {
      if (g[order[rank]]) {
        sum += 1.0 / static_cast<double>(rank + 1);
        ++n_gold;
      }
    }
    total += sum / static_cast<double>(n_gold);
    ++counted;
  }
  return counted ? total / static_cast<double>(counted) : 0.0;
}

std::vector<LabelVector> binarize(const std::vector<std::vector<double>>& scores,
                                  double threshold) {
  std::vector<LabelVector> out;
  out.reserve(scores.size());
  for (const auto& s : scores) {
    LabelVector v(s.size());
    for (size_t t = 0; t < s.size(); ++t) v[t] = s[t] >= threshold ? 1 : 0;
    out.push_back(std::move(v));
  }
  return out;
}

ThresholdChoice tune_threshold(const std::vector<std::vector<double>>& scores,
                               const std::vector<LabelVector>& gold, int grid_size) {
  if (grid_size < 2) fail(ErrorKind::kConfig, "grid_size must be at least 2");
  ThresholdChoice best;
  bool have = false;
  for (int k = 1; k < grid_size; ++k) {
    const double th = grid_point(k, grid_size);
    const double f1 = macro_prf(binarize(scores, th), gold).f1;
    if (!have || f1 > best.f1) {
      best = {th, f1};
      have = true;
    }
  }
  return best;
}

std::vector<PrPoint> pr_curve(const std::vector<std::vector<double>>& scores,
                              const std::vector<LabelVector>& gold, int grid_size) {
  if (grid_size < 2) fail(ErrorKind::kConfig, "grid_size must be at least 2");
  std::vector<PrPoint> curve;
  curve.reserve(grid_size);
  for (int k = 1; k <= grid_size; ++k) {
    const double th = grid_point(k, grid_size);
    const PrfScore s = macro_prf(binarize(scores, th), gold);
    curve.push_back({th, s.precision, s.recall});
  }
  return curve;
}

ConsistencyScore consistency(const std::vector<LabelVector>& predictions,
                             const HierarchyPairs& pairs) {
  ConsistencyScore out;
  for (const auto& [super, sub] : pairs) {
    for (const auto& pred : predictions) {
      if (super < 0 || sub < 0 || static_cast<size_t>(std::max(super, sub)) >= pred.size()) {
        fail(ErrorKind::kShape, "hierarchy pair references a type outside the label vector");
      }
      if (pred[sub]) {
        ++out.sub_count;
        if (pred[super]) ++out.pair_count;
      }
    }
  }
  out.accuracy = out.sub_count ? static_cast<double>(out.pair_count) /
                                     static_cast<double>(out.sub_count)
                               : 0.0;
  return out;
}

MetricsReport evaluate_scores(const std::vector<std::vector<double>>& scores,
                              const std::vector<LabelVector>& gold, const HierarchyPairs& pairs,
                              int grid_size, std::optional<double> threshold) {
  MetricsReport r;
  r.mrr = mrr(scores, gold);
  r.threshold_used = threshold ? *threshold : tune_threshold(scores, gold, grid_size).threshold;
  const auto predictions = binarize(scores, r.threshold_used);
  const PrfScore prf = macro_prf(predictions, gold);
  r.macro_p = prf.precision;
  r.macro_r = prf.recall;
  r.macro_f1 = prf.f1;
  r.pr_curve = pr_curve(scores, gold, grid_size);
  r.consistency = consistency(predictions, pairs);
  return r;
}

std::vector<LabelVector> recover_labels(const NoiseModel& model, const Dataset& dataset,
                                        double threshold) {
  std::vector<LabelVector> out;
  out.reserve(dataset.size());
  for (const auto& inst : dataset.instances) {
    const auto noise =
        estimate_noise(model, inst.tokens, inst.mention, positive_types(inst.labels));
    const auto rec = recover(inst.labels, noise);
    LabelVector v(rec.size());
    for (size_t t = 0; t < rec.size(); ++t) v[t] = rec[t] >= threshold ? 1 : 0;
    out.push_back(std::move(v));
  }
  return out;
}

NoiseRecoveryScores noise_recovery_f1(const NoiseModel& model, const Dataset& gold_dev,
                                      const std::vector<PerturbedInstance>& low_recall,
                                      const std::vector<PerturbedInstance>& low_precision) {
  auto score_perturbed = [&](const std::vector<PerturbedInstance>& items) {
    const Dataset ds = perturbed_as_dataset(items, model.types);
    return macro_prf(recover_labels(model, ds), gold_labels_of(ds));
  };
  NoiseRecoveryScores s;
  s.gold = macro_prf(recover_labels(model, gold_dev), labels_of(gold_dev));
  s.low_recall = score_perturbed(low_recall);
  s.low_precision = score_perturbed(low_precision);
  return s;
}

std::vector<LabelVector> labels_of(const Dataset& dataset) {
  std::vector<LabelVector> out;
  out.reserve(dataset.size());
  for (const auto& i : dataset.instances) out.push_back(i.labels);
  return out;
}

std::vector<LabelVector> gold_labels_of(const Dataset& dataset) {
  std::vector<LabelVector> out;
  out.reserve(dataset.size());
  for (const auto& i : dataset.instances) out.push_back(i.gold_labels ? *i.gold_labels : i.labels);
  return out;
}

json to_json(const MetricsReport& r) {
  json curve = json::array();
  for (const auto& p : r.pr_curve) {
    curve.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
  }
  return {{"mrr", r.mrr},
          {"macro_p", r.macro_p},
          {"macro_r", r.macro_r},
          {"macro_f1", r.macro_f1},
          {"threshold_used", r.threshold_used},
          {"pr_curve", curve},
          {"consistency",
           {{"pair_count", r.consistency.pair_count},
            {"sub_count", r.consistency.sub_count},
            {"accuracy", r.consistency.accuracy}}}};
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport r;
  r.mrr = j.at("mrr").get<double>();
  r.macro_p = j.at("macro_p").get<double>();
  r.macro_r = j.at("macro_r").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.threshold_used = j.at("threshold_used").get<double>();
  for (const auto& p : j.at("pr_curve")) {
    r.pr_curve.push_back({p.at("threshold").get<double>(), p.at("precision").get<double>(),
                          p.at("recall").get<double>()});
  }
  const auto& c = j.at("consistency");
  r.consistency = {c.at("pair_count").get<long>(), c.at("sub_count").get<long>(),
                   c.at("accuracy").get<double>()};
  return r;
}

void write_pr_curve_csv(const std::vector<PrPoint>& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << "threshold,precision,recall\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.precision, p.recall);
    out << buf;
  }
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

void write_predictions_jsonl(const Dataset& dataset, const std::vector<std::vector<double>>& scores,
                             const std::filesystem::path& path) {
  if (scores.size() != dataset.size()) {
    fail(ErrorKind::kShape, "prediction count does not match the dataset");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (size_t i = 0; i < scores.size(); ++i) {
    nlohmann::json j = {{"id", dataset.instances[i].id}, {"scores", scores[i]}};
    out << j.dump() << "\n";
  }
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace det
