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

#ifndef DET_CORPUS_HPP_
#define DET_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "det/vocabulary.hpp"

namespace det {

using LabelVector = std::vector<uint8_t>;
using NoiseLabels = std::vector<int8_t>;

// Half-open token range [begin, end).
struct MentionSpan {
  int begin = 0;
  int end = 0;
  bool operator==(const MentionSpan&) const = default;
};

struct Instance {
  std::string id;
  std::vector<std::string> tokens;
  MentionSpan mention;
  LabelVector labels;
  // Hidden ground truth; present for synthetic and dev data only.
  std::optional<LabelVector> gold_labels;
  // Planted corruption, elementwise labels - gold_labels.
  std::optional<NoiseLabels> planted_noise;

  bool operator==(const Instance&) const = default;
};

enum class DatasetKind { kGold, kDistant, kPerturbed, kDenoised };

const char* dataset_kind_name(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& name);

struct Dataset {
  std::shared_ptr<const TypeVocabulary> vocabulary;
  std::vector<Instance> instances;
  DatasetKind kind = DatasetKind::kGold;

  int num_types() const { return vocabulary ? vocabulary->size() : 0; }
  size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }
};

bool same_instances(const Dataset& a, const Dataset& b);

// Positive type ids of a label vector, ascending.
std::vector<TypeId> positive_types(const LabelVector& labels);
LabelVector labels_from_types(const std::vector<TypeId>& types, int num_types);

// Checks span bounds, label widths and value ranges. The planted-noise
// identity gold = [min(labels - noise, 1)]_+ only holds until labels are
// rewritten by denoising or relabeling, so it is checked on request.
void validate_instance(const Instance& instance, int num_types,
                       bool check_noise_identity = false);

// One JSON record per line:
// {"id", "tokens", "mention_span": [p, q], "types", "gold_types"?,
//  "planted_noise"?}
Dataset load_jsonl(const std::filesystem::path& path,
                   std::shared_ptr<const TypeVocabulary> vocabulary,
                   DatasetKind kind = DatasetKind::kGold);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);

struct SynthConfig {
  int num_types = 50;
  int num_gold = 500;
  int num_distant = 5000;
  int num_dev = 500;
  double mean_gold_types = 5.4;
  double mean_ds_types = 1.5;
  double drop_prob = 0.5;
  double add_prob = 0.01;
  uint64_t seed = 1;

  void validate() const;
};

// (supertype, subtype) pairs used for consistency accuracy.
using HierarchyPairs = std::vector<std::pair<TypeId, TypeId>>;

HierarchyPairs load_hierarchy(const std::filesystem::path& path,
                              const TypeVocabulary& vocabulary);
void save_hierarchy(const HierarchyPairs& pairs,
                    const TypeVocabulary& vocabulary,
                    const std::filesystem::path& path);

struct SyntheticCorpus {
  std::shared_ptr<const TypeVocabulary> vocabulary;
  Dataset gold;
  Dataset distant;
  Dataset dev;
  HierarchyPairs hierarchy;
};

// Builds a clustered type inventory (one general type per cluster plus
// fine-grained subtypes), gives every type its own trigger words, and writes
// contexts that contain one trigger per true type among filler words. The
// distant split observes each true type with probability 1 - drop_prob and
// each false type with probability add_prob; the hidden truth of distant
// instances is sized so that the observed count averages mean_ds_types.
SyntheticCorpus generate_synthetic(const SynthConfig& config);

}  // namespace det

#endif  // DET_CORPUS_HPP_
