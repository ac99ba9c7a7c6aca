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

#include "det/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include "det/error.hpp"
#include "det/random.hpp"
#include "json.hpp"

namespace det {

using nlohmann::json;

const char* dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kGold:
      return "gold";
    case DatasetKind::kDistant:
      return "distant";
    case DatasetKind::kPerturbed:
      return "perturbed";
    case DatasetKind::kDenoised:
      return "denoised";
  }
  return "gold";
}

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "gold") return DatasetKind::kGold;
  if (name == "distant") return DatasetKind::kDistant;
  if (name == "perturbed") return DatasetKind::kPerturbed;
  if (name == "denoised") return DatasetKind::kDenoised;
  fail(ErrorKind::kConfig, "unknown dataset kind '" + name + "'");
}

bool same_instances(const Dataset& a, const Dataset& b) {
  return a.instances == b.instances;
}

std::vector<TypeId> positive_types(const LabelVector& labels) {
  std::vector<TypeId> out;
  for (size_t t = 0; t < labels.size(); ++t) {
    if (labels[t]) out.push_back(static_cast<TypeId>(t));
  }
  return out;
}

LabelVector labels_from_types(const std::vector<TypeId>& types, int num_types) {
  LabelVector out(num_types, 0);
  for (TypeId t : types) {
    if (t < 0 || t >= num_types) {
      fail(ErrorKind::kVocabulary, "type id " + std::to_string(t) + " out of range");
    }
    out[t] = 1;
  }
  return out;
}

void validate_instance(const Instance& instance, int num_types,
                       bool check_noise_identity) {
  const int n = static_cast<int>(instance.tokens.size());
  if (!(0 <= instance.mention.begin && instance.mention.begin < instance.mention.end &&
        instance.mention.end <= n)) {
    fail(ErrorKind::kShape, "instance '" + instance.id + "': mention span [" +
                                std::to_string(instance.mention.begin) + ", " +
                                std::to_string(instance.mention.end) +
                                ") is invalid for " + std::to_string(n) + " tokens");
  }
  auto check_width = [&](size_t width, const char* what) {
    if (static_cast<int>(width) != num_types) {
      fail(ErrorKind::kShape, "instance '" + instance.id + "': " + what +
                                  " has length " + std::to_string(width) +
                                  ", expected " + std::to_string(num_types));
    }
  };
  check_width(instance.labels.size(), "labels");
  for (uint8_t v : instance.labels) {
    if (v > 1) fail(ErrorKind::kShape, "instance '" + instance.id + "': non-binary label");
  }
  if (instance.gold_labels) check_width(instance.gold_labels->size(), "gold_labels");
  if (instance.planted_noise) {
    check_width(instance.planted_noise->size(), "planted_noise");
    if (!instance.gold_labels) {
      fail(ErrorKind::kShape,
           "instance '" + instance.id + "': planted_noise requires gold_types");
    }
    for (int t = 0; t < num_types; ++t) {
      const int e = (*instance.planted_noise)[t];
      if (e < -1 || e > 1) {
        fail(ErrorKind::kShape, "instance '" + instance.id + "': noise outside {-1,0,1}");
      }
      const int recovered = std::max(std::min(instance.labels[t] - e, 1), 0);
      if (check_noise_identity && recovered != (*instance.gold_labels)[t]) {
        fail(ErrorKind::kShape, "instance '" + instance.id +
                                    "': planted_noise inconsistent with labels at type " +
                                    std::to_string(t));
      }
    }
  }
}

namespace {

LabelVector parse_type_list(const json& array, const TypeVocabulary& vocab) {
  if (!array.is_array()) fail(ErrorKind::kParse, "type list must be an array");
  LabelVector out(vocab.size(), 0);
  for (const auto& item : array) {
    if (!item.is_string()) fail(ErrorKind::kParse, "type phrases must be strings");
    out[vocab.id_of(item.get<std::string>())] = 1;
  }
  return out;
}

json type_list(const LabelVector& labels, const TypeVocabulary& vocab) {
  json out = json::array();
  for (TypeId t : positive_types(labels)) out.push_back(vocab.phrase(t));
  return out;
}

Instance parse_record(const json& rec, const TypeVocabulary& vocab) {
  if (!rec.is_object()) fail(ErrorKind::kParse, "record is not a JSON object");
  Instance inst;
  inst.id = rec.at("id").get<std::string>();
  inst.tokens = rec.at("tokens").get<std::vector<std::string>>();
  const auto span = rec.at("mention_span").get<std::vector<int>>();
  if (span.size() != 2) fail(ErrorKind::kParse, "mention_span must have two entries");
  inst.mention = {span[0], span[1]};
  inst.labels = parse_type_list(rec.at("types"), vocab);
  if (rec.contains("gold_types")) {
    inst.gold_labels = parse_type_list(rec.at("gold_types"), vocab);
  }
  if (rec.contains("planted_noise")) {
    inst.planted_noise = rec.at("planted_noise").get<std::vector<int8_t>>();
  }
  validate_instance(inst, vocab.size());
  return inst;
}

}  // namespace

Dataset load_jsonl(const std::filesystem::path& path,
                   std::shared_ptr<const TypeVocabulary> vocabulary,
                   DatasetKind kind) {
  if (!vocabulary) fail(ErrorKind::kVocabulary, "no vocabulary supplied");
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open dataset file " + path.string());
  Dataset ds;
  ds.vocabulary = vocabulary;
  ds.kind = kind;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ds.instances.push_back(parse_record(json::parse(line), *vocabulary));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kVocabulary) throw;
      fail(e.kind(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse,
           path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write dataset file " + path.string());
  const auto& vocab = *dataset.vocabulary;
  for (const auto& inst : dataset.instances) {
    json rec;
    rec["id"] = inst.id;
    rec["tokens"] = inst.tokens;
    rec["mention_span"] = {inst.mention.begin, inst.mention.end};
    rec["types"] = type_list(inst.labels, vocab);
    if (inst.gold_labels) rec["gold_types"] = type_list(*inst.gold_labels, vocab);
    if (inst.planted_noise) rec["planted_noise"] = *inst.planted_noise;
    out << rec.dump() << '\n';
  }
  out.flush();
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

void SynthConfig::validate() const {
  if (num_types <= 0) fail(ErrorKind::kConfig, "num_types must be positive");
  if (num_gold <= 0 || num_distant <= 0) {
    fail(ErrorKind::kConfig, "num_gold and num_distant must be positive");
  }
  if (num_dev < 0) fail(ErrorKind::kConfig, "num_dev must be non-negative");
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      fail(ErrorKind::kConfig, std::string(name) + " must lie in [0, 1]");
    }
  };
  prob(drop_prob, "drop_prob");
  prob(add_prob, "add_prob");
  if (!(mean_gold_types >= 0.0) || !(mean_ds_types >= 0.0)) {
    fail(ErrorKind::kConfig, "mean type counts must be non-negative");
  }
}

HierarchyPairs load_hierarchy(const std::filesystem::path& path,
                              const TypeVocabulary& vocabulary) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open hierarchy file " + path.string());
  HierarchyPairs pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) +
                                  ": expected 'supertype<TAB>subtype'");
    }
    std::pair<TypeId, TypeId> p{vocabulary.id_of(line.substr(0, tab)),
                                vocabulary.id_of(line.substr(tab + 1))};
    if (std::find(pairs.begin(), pairs.end(), p) != pairs.end()) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) +
                                  ": duplicate pair");
    }
    pairs.push_back(p);
  }
  return pairs;
}

void save_hierarchy(const HierarchyPairs& pairs, const TypeVocabulary& vocabulary,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write hierarchy file " + path.string());
  for (const auto& [super, sub] : pairs) {
    out << vocabulary.phrase(super) << '\t' << vocabulary.phrase(sub) << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Synthetic corpus.

namespace {

constexpr int kTriggersPerType = 2;
constexpr int kMinFiller = 3;
constexpr int kMaxFiller = 6;

constexpr std::array<const char*, 16> kGeneralNames = {
    "person",  "organization", "location", "event",    "product", "work",
    "group",   "animal",       "food",     "vehicle",  "building", "award",
    "disease", "language",     "law",      "substance"};

constexpr std::array<const char*, 60> kFiller = {
    "the",   "a",     "of",     "in",    "on",     "at",    "was",   "is",
    "and",   "to",    "with",   "for",   "by",     "from",  "after", "before",
    "during", "his",  "her",    "their", "first",  "new",   "old",   "one",
    "two",   "three", "time",   "year",  "day",    "said",  "made",  "took",
    "found", "became", "later", "then",  "also",   "has",   "had",   "been",
    "will",  "would", "this",   "that",  "which",  "who",   "where", "when",
    "round", "early", "late",   "most",  "many",   "some",  "into",  "over",
    "under", "about", "against", "while"};

constexpr std::array<const char*, 24> kNames = {
    "alex",  "maria",  "chen",  "olga",   "samir", "lena",   "tomas", "ines",
    "kofi",  "yuki",   "omar",  "petra",  "ravi",  "nadia",  "bruno", "ada",
    "ivan",  "sofia",  "hugo",  "amara",  "felix", "zara",   "leon",  "mei"};

std::string pseudo_word(int index, const char* const* syllables, int num_syllables,
                        int length) {
  std::string w;
  for (int i = 0; i < length; ++i) {
    w += syllables[index % num_syllables];
    index /= num_syllables;
  }
  return w;
}

const char* const kTypeSyllables[] = {"ka", "lo", "mi", "ne", "su",
                                      "ta", "ri", "vo", "ze", "pu"};
const char* const kTriggerSyllables[] = {"bar", "den", "fil", "gor", "hun",
                                         "jas", "kel", "mor", "nip", "rud"};

struct World {
  std::vector<std::string> phrases;
  std::vector<std::vector<TypeId>> clusters;  // [0] is the general type
  std::vector<std::array<std::string, kTriggersPerType>> triggers;
  HierarchyPairs hierarchy;
};

World build_world(int num_types) {
  World w;
  const int num_clusters = std::max(1, num_types / 10);
  w.clusters.resize(num_clusters);
  int next = 0;
  int fine_index = 0;
  for (int c = 0; c < num_clusters; ++c) {
    const int size = num_types / num_clusters + (c < num_types % num_clusters ? 1 : 0);
    const std::string general = c < static_cast<int>(kGeneralNames.size())
                                    ? kGeneralNames[c]
                                    : "general" + std::to_string(c);
    for (int k = 0; k < size; ++k) {
      const TypeId id = next++;
      w.clusters[c].push_back(id);
      if (k == 0) {
        w.phrases.push_back(general);
      } else {
        std::string phrase = pseudo_word(fine_index, kTypeSyllables, 10, 3);
        if (fine_index % 3 == 2) phrase += " " + general;
        ++fine_index;
        w.phrases.push_back(std::move(phrase));
        w.hierarchy.emplace_back(w.clusters[c][0], id);
      }
    }
  }
  w.triggers.resize(num_types);
  for (int t = 0; t < num_types; ++t) {
    for (int k = 0; k < kTriggersPerType; ++k) {
      w.triggers[t][k] = pseudo_word(t * kTriggersPerType + k, kTriggerSyllables, 10, 3);
    }
  }
  return w;
}

// Draws a true type set whose expected size is `mean`: the general type of a
// uniformly chosen cluster plus each of its subtypes independently.
LabelVector sample_true_types(const World& w, double mean, int num_types, Rng& rng) {
  double avg_sub = 0.0;
  for (const auto& c : w.clusters) avg_sub += static_cast<double>(c.size() - 1);
  avg_sub /= static_cast<double>(w.clusters.size());
  double p_general = 1.0;
  double p_sub = 0.0;
  if (mean < 1.0) {
    p_general = mean;
  } else if (avg_sub > 0.0) {
    p_sub = std::min(1.0, (mean - 1.0) / avg_sub);
  }
  const auto& cluster = w.clusters[rng.below(w.clusters.size())];
  LabelVector labels(num_types, 0);
  if (rng.bernoulli(p_general)) labels[cluster[0]] = 1;
  for (size_t k = 1; k < cluster.size(); ++k) {
    if (rng.bernoulli(p_sub)) labels[cluster[k]] = 1;
  }
  return labels;
}

Instance make_context(const World& w, const LabelVector& truth, Rng& rng) {
  std::vector<std::string> body;
  for (TypeId t : positive_types(truth)) {
    body.push_back(w.triggers[t][rng.below(kTriggersPerType)]);
  }
  const int filler = kMinFiller + static_cast<int>(rng.below(kMaxFiller - kMinFiller + 1));
  for (int i = 0; i < filler; ++i) body.emplace_back(kFiller[rng.below(kFiller.size())]);
  rng.shuffle(body);

  const int mention_len = 1 + static_cast<int>(rng.below(2));
  const int at = static_cast<int>(rng.below(body.size() + 1));
  Instance inst;
  inst.tokens.assign(body.begin(), body.begin() + at);
  for (int i = 0; i < mention_len; ++i) {
    inst.tokens.emplace_back(kNames[rng.below(kNames.size())]);
  }
  inst.tokens.insert(inst.tokens.end(), body.begin() + at, body.end());
  inst.mention = {at, at + mention_len};
  return inst;
}

Dataset make_gold_split(const World& w, const SynthConfig& cfg,
                        std::shared_ptr<const TypeVocabulary> vocab, int count,
                        const std::string& prefix, uint64_t stream) {
  Rng rng(derive_seed(cfg.seed, {stream}));
  Dataset ds;
  ds.vocabulary = std::move(vocab);
  ds.kind = DatasetKind::kGold;
  ds.instances.reserve(count);
  for (int i = 0; i < count; ++i) {
    LabelVector truth = sample_true_types(w, cfg.mean_gold_types, cfg.num_types, rng);
    Instance inst = make_context(w, truth, rng);
    inst.id = prefix + std::to_string(i);
    inst.labels = truth;
    inst.gold_labels = truth;
    inst.planted_noise = NoiseLabels(cfg.num_types, 0);
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SynthConfig& config) {
  config.validate();
  const World world = build_world(config.num_types);

  SyntheticCorpus corpus;
  corpus.vocabulary = std::make_shared<const TypeVocabulary>(world.phrases);
  corpus.hierarchy = world.hierarchy;
  corpus.gold = make_gold_split(world, config, corpus.vocabulary, config.num_gold, "g", 1);
  corpus.dev = make_gold_split(world, config, corpus.vocabulary, config.num_dev, "v", 3);

  // Observed count = truth * (1 - drop - add) + T * add in expectation.
  const double keep = 1.0 - config.drop_prob - config.add_prob;
  double hidden_mean = config.mean_gold_types;
  if (keep > 1e-9) {
    hidden_mean = (config.mean_ds_types - config.num_types * config.add_prob) / keep;
    hidden_mean = std::clamp(hidden_mean, 0.0, static_cast<double>(config.num_types));
  }

  Rng rng(derive_seed(config.seed, {2}));
  Dataset& distant = corpus.distant;
  distant.vocabulary = corpus.vocabulary;
  distant.kind = DatasetKind::kDistant;
  distant.instances.reserve(config.num_distant);
  for (int i = 0; i < config.num_distant; ++i) {
    LabelVector truth = sample_true_types(world, hidden_mean, config.num_types, rng);
    Instance inst = make_context(world, truth, rng);
    inst.id = "d" + std::to_string(i);
    inst.labels.assign(config.num_types, 0);
    NoiseLabels noise(config.num_types, 0);
    for (int t = 0; t < config.num_types; ++t) {
      const bool observed =
          truth[t] ? !rng.bernoulli(config.drop_prob) : rng.bernoulli(config.add_prob);
      inst.labels[t] = observed ? 1 : 0;
      noise[t] = static_cast<int8_t>(inst.labels[t] - truth[t]);
    }
    inst.gold_labels = std::move(truth);
    inst.planted_noise = std::move(noise);
    distant.instances.push_back(std::move(inst));
  }
  return corpus;
}

}  // namespace det
