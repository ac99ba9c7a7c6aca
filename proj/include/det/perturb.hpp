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

#ifndef DET_PERTURB_HPP_
#define DET_PERTURB_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "det/corpus.hpp"

namespace det {

enum class PerturbMode { kRecallDrop, kPrecisionReplace };

const char* perturb_mode_name(PerturbMode mode);

// A gold instance whose observed type set was corrupted. `target` is the
// untouched gold label vector.
struct PerturbedInstance {
  Instance base;
  LabelVector perturbed;
  LabelVector target;
  PerturbMode mode = PerturbMode::kRecallDrop;

  std::vector<TypeId> perturbed_types() const { return positive_types(perturbed); }
  // perturbed - target, in {-1, 0, 1}.
  NoiseLabels exact_noise() const;

  bool operator==(const PerturbedInstance&) const = default;
};

// Drops each gold type independently with probability drop_rate. Empty
// results are kept.
std::vector<PerturbedInstance> perturb_recall(const Dataset& gold, double drop_rate,
                                              uint64_t seed);

// Replaces each gold type set with the observed set of a uniformly drawn
// distant instance.
std::vector<PerturbedInstance> perturb_precision(const Dataset& gold,
                                                 const Dataset& distant, uint64_t seed);

// One recall-dropped and one precision-replaced copy of every gold instance,
// shuffled by seed.
std::vector<PerturbedInstance> build_dp(const Dataset& gold, const Dataset& distant,
                                        double drop_rate, uint64_t seed);

// Corpus JSONL with the corrupted set as "types", the target as "gold_types",
// the exact noise as "planted_noise" and a "perturb_mode" field.
void save_perturbed_jsonl(const std::vector<PerturbedInstance>& items,
                          const TypeVocabulary& vocabulary,
                          const std::filesystem::path& path);
std::vector<PerturbedInstance> load_perturbed_jsonl(const std::filesystem::path& path,
                                                    const TypeVocabulary& vocabulary);

// View of perturbed items as a dataset whose labels are the corrupted sets
// and whose gold_labels are the targets.
Dataset perturbed_as_dataset(const std::vector<PerturbedInstance>& items,
                             std::shared_ptr<const TypeVocabulary> vocabulary);

}  // namespace det

#endif  // DET_PERTURB_HPP_
