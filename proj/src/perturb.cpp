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

#include "det/perturb.hpp"

#include <fstream>

#include "det/error.hpp"
#include "det/random.hpp"
#include "json.hpp"

namespace det {

using nlohmann::json;

const char* perturb_mode_name(PerturbMode mode) {
  return mode == PerturbMode::kRecallDrop ? "recall_drop" : "precision_replace";
}

NoiseLabels PerturbedInstance::exact_noise() const {
  NoiseLabels e(perturbed.size());
  for (size_t t = 0; t < perturbed.size(); ++t) {
    e[t] = static_cast<int8_t>(perturbed[t] - target[t]);
  }
  return e;
}

namespace {

void require_gold(const Dataset& gold) {
  if (gold.kind != DatasetKind::kGold) {
    fail(ErrorKind::kConfig, std::string("perturbation expects a gold dataset, got ") +
                                 dataset_kind_name(gold.kind));
  }
}

PerturbedInstance start_from(const Instance& inst, PerturbMode mode) {
  PerturbedInstance p;
  p.base = inst;
  p.target = inst.labels;
  p.mode = mode;
  return p;
}

}  // namespace

std::vector<PerturbedInstance> perturb_recall(const Dataset& gold, double drop_rate,
                                              uint64_t seed) {
  require_gold(gold);
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) {
    fail(ErrorKind::kConfig, "drop_rate must lie in [0, 1]");
  }
  Rng rng(derive_seed(seed, {0x5245}));
  std::vector<PerturbedInstance> out;
  out.reserve(gold.size());
  for (const auto& inst : gold.instances) {
    PerturbedInstance p = start_from(inst, PerturbMode::kRecallDrop);
    p.perturbed = inst.labels;
    for (auto& v : p.perturbed) {
      if (v && rng.bernoulli(drop_rate)) v = 0;
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PerturbedInstance> perturb_precision(const Dataset& gold,
                                                 const Dataset& distant, uint64_t seed) {
  require_gold(gold);
  if (distant.empty()) {
    fail(ErrorKind::kConfig, "precision perturbation needs a non-empty distant dataset");
  }
  if (distant.num_types() != gold.num_types()) {
    fail(ErrorKind::kShape, "gold and distant datasets disagree on the type count");
  }
  Rng rng(derive_seed(seed, {0x5052}));
  std::vector<PerturbedInstance> out;
  out.reserve(gold.size());
  for (const auto& inst : gold.instances) {
    PerturbedInstance p = start_from(inst, PerturbMode::kPrecisionReplace);
    p.perturbed = distant.instances[rng.below(distant.size())].labels;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PerturbedInstance> build_dp(const Dataset& gold, const Dataset& distant,
                                        double drop_rate, uint64_t seed) {
  auto out = perturb_recall(gold, drop_rate, seed);
  auto precision = perturb_precision(gold, distant, seed);
  out.insert(out.end(), std::make_move_iterator(precision.begin()),
             std::make_move_iterator(precision.end()));
  Rng rng(derive_seed(seed, {0x5348}));
  rng.shuffle(out);
  return out;
}

void save_perturbed_jsonl(const std::vector<PerturbedInstance>& items,
                          const TypeVocabulary& vocabulary,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write perturbed file " + path.string());
  auto phrases = [&](const LabelVector& labels) {
    json a = json::array();
    for (TypeId t : positive_types(labels)) a.push_back(vocabulary.phrase(t));
    return a;
  };
  for (const auto& p : items) {
    json rec;
    rec["id"] = p.base.id;
    rec["tokens"] = p.base.tokens;
    rec["mention_span"] = {p.base.mention.begin, p.base.mention.end};
    rec["types"] = phrases(p.perturbed);
    rec["gold_types"] = phrases(p.target);
    rec["planted_noise"] = p.exact_noise();
    rec["perturb_mode"] = perturb_mode_name(p.mode);
    out << rec.dump() << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<PerturbedInstance> load_perturbed_jsonl(const std::filesystem::path& path,
                                                    const TypeVocabulary& vocabulary) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open perturbed file " + path.string());
  std::vector<PerturbedInstance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      PerturbedInstance p;
      p.base.id = rec.at("id").get<std::string>();
      p.base.tokens = rec.at("tokens").get<std::vector<std::string>>();
      const auto span = rec.at("mention_span").get<std::vector<int>>();
      if (span.size() != 2) fail(ErrorKind::kParse, "mention_span must have two entries");
      p.base.mention = {span[0], span[1]};
      std::vector<TypeId> observed, target;
      for (const auto& s : rec.at("types")) observed.push_back(vocabulary.id_of(s.get<std::string>()));
      for (const auto& s : rec.at("gold_types")) target.push_back(vocabulary.id_of(s.get<std::string>()));
      p.perturbed = labels_from_types(observed, vocabulary.size());
      p.target = labels_from_types(target, vocabulary.size());
      p.base.labels = p.target;
      const auto mode = rec.at("perturb_mode").get<std::string>();
      if (mode == "recall_drop") {
        p.mode = PerturbMode::kRecallDrop;
      } else if (mode == "precision_replace") {
        p.mode = PerturbMode::kPrecisionReplace;
      } else {
        fail(ErrorKind::kParse, "unknown perturb_mode '" + mode + "'");
      }
      validate_instance(p.base, vocabulary.size());
      out.push_back(std::move(p));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kVocabulary) throw;
      fail(e.kind(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse,
           path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Dataset perturbed_as_dataset(const std::vector<PerturbedInstance>& items,
                             std::shared_ptr<const TypeVocabulary> vocabulary) {
  Dataset ds;
  ds.vocabulary = std::move(vocabulary);
  ds.kind = DatasetKind::kPerturbed;
  ds.instances.reserve(items.size());
  for (const auto& p : items) {
    Instance inst = p.base;
    inst.labels = p.perturbed;
    inst.gold_labels = p.target;
    inst.planted_noise = p.exact_noise();
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

}  // namespace det
