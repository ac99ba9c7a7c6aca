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

#include "det/c_api.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "det/config.hpp"
#include "det/error.hpp"
#include "det/eval.hpp"
#include "det/noise_model.hpp"
#include "det/perturb.hpp"
#include "det/train_loop.hpp"
#include "det/typing_model.hpp"

struct det_config {
  det::RunConfig value;
};
struct det_vocab {
  std::shared_ptr<const det::TypeVocabulary> value;
};
struct det_dataset {
  det::Dataset value;
};
struct det_perturbed {
  std::shared_ptr<const det::TypeVocabulary> vocabulary;
  std::vector<det::PerturbedInstance> value;
};
struct det_noise_model {
  det::NoiseModel value;
};
struct det_typing_model {
  det::TypingModel value;
};
struct det_metrics {
  det::MetricsReport value;
};

namespace {

thread_local std::string last_error;

det_status status_of(det::ErrorKind kind) {
  switch (kind) {
    case det::ErrorKind::kParse:
      return DET_ERR_PARSE;
    case det::ErrorKind::kVocabulary:
      return DET_ERR_VOCABULARY;
    case det::ErrorKind::kIo:
      return DET_ERR_IO;
    case det::ErrorKind::kConfig:
      return DET_ERR_CONFIG;
    case det::ErrorKind::kNumeric:
      return DET_ERR_NUMERIC;
    case det::ErrorKind::kShape:
      return DET_ERR_SHAPE;
    case det::ErrorKind::kState:
      return DET_ERR_STATE;
  }
  return DET_ERR_INTERNAL;
}

det_status set_error(det_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename F>
det_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return DET_OK;
  } catch (const det::Error& e) {
    return set_error(status_of(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(DET_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(DET_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(DET_ERR_INTERNAL, e.what());
  }
}

#define DET_REQUIRE(cond, what)                                                     \
  do {                                                                              \
    if (!(cond)) return set_error(DET_ERR_ARGUMENT, std::string("invalid argument: ") + (what)); \
  } while (0)

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

det::DatasetKind kind_or_gold(const char* kind) {
  return kind ? det::parse_dataset_kind(kind) : det::DatasetKind::kGold;
}

}  // namespace

extern "C" {

const char* det_last_error(void) { return last_error.c_str(); }

const char* det_status_name(det_status status) {
  switch (status) {
    case DET_OK:
      return "ok";
    case DET_ERR_PARSE:
      return "parse error";
    case DET_ERR_VOCABULARY:
      return "vocabulary error";
    case DET_ERR_IO:
      return "i/o error";
    case DET_ERR_CONFIG:
      return "config error";
    case DET_ERR_NUMERIC:
      return "numeric error";
    case DET_ERR_SHAPE:
      return "shape error";
    case DET_ERR_STATE:
      return "state error";
    case DET_ERR_ARGUMENT:
      return "invalid argument";
    case DET_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* det_version(void) { return "0.1.0"; }

void det_string_free(char* s) { std::free(s); }

det_status det_config_load(const char* path, det_config** out) {
  DET_REQUIRE(path && out, "path and out are required");
  return guarded([&] { *out = new det_config{det::load_run_config(path)}; });
}

det_status det_config_parse(const char* json_text, const char* base_dir, det_config** out) {
  DET_REQUIRE(json_text && out, "json_text and out are required");
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      det::fail(det::ErrorKind::kConfig, std::string("malformed config: ") + e.what());
    }
    *out = new det_config{det::run_config_from_json(j, base_dir ? base_dir : "")};
  });
}

det_status det_config_to_json(const det_config* config, char** out) {
  DET_REQUIRE(config && out, "config and out are required");
  return guarded([&] { *out = copy_string(det::to_json(config->value).dump(2)); });
}

det_status det_config_set_seed(det_config* config, uint64_t seed) {
  DET_REQUIRE(config, "config is required");
  config->value.synth.seed = seed;
  config->value.encoder.seed = seed;
  config->value.iteration.seed = seed;
  return DET_OK;
}

det_status det_config_set_run_dir(det_config* config, const char* run_dir) {
  DET_REQUIRE(config && run_dir, "config and run_dir are required");
  config->value.paths.run_dir = run_dir;
  return DET_OK;
}

det_status det_config_set_ablation(det_config* config, const char* mode) {
  DET_REQUIRE(config && mode, "config and mode are required");
  return guarded([&] { config->value.ablation = det::parse_ablation_mode(mode); });
}

det_status det_config_set_threshold(det_config* config, double threshold) {
  DET_REQUIRE(config, "config is required");
  DET_REQUIRE(threshold >= 0.0 && threshold <= 1.0, "threshold must lie in [0, 1]");
  config->value.eval_threshold = threshold;
  return DET_OK;
}

det_status det_config_path(const det_config* config, const char* which, char** out) {
  DET_REQUIRE(config && which && out, "config, which and out are required");
  const auto& p = config->value.paths;
  const std::string name = which;
  const std::filesystem::path* path = nullptr;
  if (name == "vocab") path = &p.vocab;
  if (name == "gold") path = &p.gold;
  if (name == "distant") path = &p.distant;
  if (name == "dev") path = &p.dev;
  if (name == "hierarchy") path = &p.hierarchy;
  if (name == "run_dir") path = &p.run_dir;
  if (!path) return set_error(DET_ERR_ARGUMENT, "unknown path '" + name + "'");
  return guarded([&] { *out = copy_string(path->string()); });
}

det_status det_config_load_vocab(const det_config* config, det_vocab** out) {
  DET_REQUIRE(config && out, "config and out are required");
  return guarded([&] {
    if (config->value.paths.vocab.empty()) {
      det::fail(det::ErrorKind::kConfig, "config is missing paths.vocab");
    }
    *out = new det_vocab{std::make_shared<const det::TypeVocabulary>(
        det::TypeVocabulary::load(config->value.paths.vocab))};
  });
}

det_status det_config_load_dataset(const det_config* config, const char* which,
                                   det_dataset** out) {
  DET_REQUIRE(config && which && out, "config, which and out are required");
  return guarded([&] {
    const std::string name = which;
    const auto& p = config->value.paths;
    std::filesystem::path path;
    det::DatasetKind kind = det::DatasetKind::kGold;
    if (name == "gold") {
      path = p.gold;
    } else if (name == "distant") {
      path = p.distant;
      kind = det::DatasetKind::kDistant;
    } else if (name == "dev") {
      path = p.dev;
    } else {
      det::fail(det::ErrorKind::kConfig, "unknown dataset '" + name + "'");
    }
    if (path.empty()) det::fail(det::ErrorKind::kConfig, "config is missing paths." + name);
    if (p.vocab.empty()) det::fail(det::ErrorKind::kConfig, "config is missing paths.vocab");
    auto vocab = std::make_shared<const det::TypeVocabulary>(det::TypeVocabulary::load(p.vocab));
    *out = new det_dataset{det::load_jsonl(path, vocab, kind)};
  });
}

det_status det_config_threshold(const det_config* config, const char* which, double* out) {
  DET_REQUIRE(config && which && out, "config, which and out are required");
  const std::string name = which;
  if (name == "denoise") {
    *out = config->value.iteration.denoise_threshold;
  } else if (name == "relabel") {
    *out = config->value.iteration.relabel_threshold;
  } else if (name == "eval") {
    *out = config->value.eval_threshold.value_or(-1.0);
  } else {
    return set_error(DET_ERR_ARGUMENT, "unknown threshold '" + name + "'");
  }
  return DET_OK;
}

int det_config_grid_size(const det_config* config) {
  return config ? config->value.iteration.grid_size : 0;
}

void det_config_free(det_config* config) { delete config; }

det_status det_vocab_load(const char* path, det_vocab** out) {
  DET_REQUIRE(path && out, "path and out are required");
  return guarded([&] {
    *out = new det_vocab{
        std::make_shared<const det::TypeVocabulary>(det::TypeVocabulary::load(path))};
  });
}

size_t det_vocab_size(const det_vocab* vocab) {
  return vocab ? static_cast<size_t>(vocab->value->size()) : 0;
}

const char* det_vocab_phrase(const det_vocab* vocab, size_t index) {
  if (!vocab || index >= static_cast<size_t>(vocab->value->size())) return nullptr;
  return vocab->value->phrase(static_cast<det::TypeId>(index)).c_str();
}

void det_vocab_free(det_vocab* vocab) { delete vocab; }

det_status det_dataset_load(const char* path, const det_vocab* vocab, const char* kind,
                            det_dataset** out) {
  DET_REQUIRE(path && vocab && out, "path, vocab and out are required");
  return guarded(
      [&] { *out = new det_dataset{det::load_jsonl(path, vocab->value, kind_or_gold(kind))}; });
}

det_status det_dataset_save(const det_dataset* dataset, const char* path) {
  DET_REQUIRE(dataset && path, "dataset and path are required");
  return guarded([&] { det::save_jsonl(dataset->value, path); });
}

size_t det_dataset_size(const det_dataset* dataset) {
  return dataset ? dataset->value.size() : 0;
}

det_status det_dataset_find(const det_dataset* dataset, const char* id, size_t* index) {
  DET_REQUIRE(dataset && id && index, "dataset, id and index are required");
  const auto& inst = dataset->value.instances;
  for (size_t i = 0; i < inst.size(); ++i) {
    if (inst[i].id == id) {
      *index = i;
      return DET_OK;
    }
  }
  return set_error(DET_ERR_ARGUMENT, std::string("no instance with id '") + id + "'");
}

det_status det_dataset_labels(const det_dataset* dataset, size_t index, uint8_t* labels) {
  DET_REQUIRE(dataset && labels, "dataset and labels are required");
  DET_REQUIRE(index < dataset->value.size(), "instance index out of range");
  const auto& l = dataset->value.instances[index].labels;
  std::copy(l.begin(), l.end(), labels);
  return DET_OK;
}

size_t det_dataset_num_types(const det_dataset* dataset) {
  return dataset ? static_cast<size_t>(dataset->value.num_types()) : 0;
}

det_status det_dataset_instance_text(const det_dataset* dataset, size_t index, char** out) {
  DET_REQUIRE(dataset && out, "dataset and out are required");
  DET_REQUIRE(index < dataset->value.size(), "instance index out of range");
  return guarded([&] {
    const auto& inst = dataset->value.instances[index];
    std::string text;
    for (size_t i = 0; i < inst.tokens.size(); ++i) {
      if (!text.empty()) text += ' ';
      if (static_cast<int>(i) == inst.mention.begin) text += '[';
      text += inst.tokens[i];
      if (static_cast<int>(i) + 1 == inst.mention.end) text += ']';
    }
    *out = copy_string(text);
  });
}

void det_dataset_free(det_dataset* dataset) { delete dataset; }

det_status det_generate(const det_config* config, const char* out_dir) {
  DET_REQUIRE(config && out_dir, "config and out_dir are required");
  return guarded([&] {
    const std::filesystem::path dir = out_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) det::fail(det::ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
    const det::SyntheticCorpus corpus = det::generate_synthetic(config->value.synth);
    corpus.vocabulary->save(dir / "vocab.txt");
    det::save_jsonl(corpus.gold, dir / "gold.jsonl");
    det::save_jsonl(corpus.distant, dir / "distant.jsonl");
    det::save_jsonl(corpus.dev, dir / "dev.jsonl");
    det::save_hierarchy(corpus.hierarchy, *corpus.vocabulary, dir / "hierarchy.tsv");
  });
}

det_status det_perturb(const det_config* config, det_perturbed** out) {
  DET_REQUIRE(config && out, "config and out are required");
  return guarded([&] {
    const det::RunData data = det::load_run_data(config->value);
    *out = new det_perturbed{data.gold.vocabulary,
                             det::build_dp(data.gold, data.distant,
                                           config->value.iteration.drop_rate,
                                           config->value.iteration.seed)};
  });
}

det_status det_perturbed_load(const char* path, const det_vocab* vocab, det_perturbed** out) {
  DET_REQUIRE(path && vocab && out, "path, vocab and out are required");
  return guarded([&] {
    *out = new det_perturbed{vocab->value, det::load_perturbed_jsonl(path, *vocab->value)};
  });
}

det_status det_perturbed_save(const det_perturbed* perturbed, const char* path) {
  DET_REQUIRE(perturbed && path, "perturbed and path are required");
  return guarded([&] { det::save_perturbed_jsonl(perturbed->value, *perturbed->vocabulary, path); });
}

size_t det_perturbed_size(const det_perturbed* perturbed) {
  return perturbed ? perturbed->value.size() : 0;
}

void det_perturbed_free(det_perturbed* perturbed) { delete perturbed; }

det_status det_train_noise(const det_config* config, const det_perturbed* perturbed,
                           double alpha, det_noise_model** out) {
  DET_REQUIRE(config && out, "config and out are required");
  return guarded([&] {
    const det::RunData data = det::load_run_data(config->value);
    if (perturbed && !(*perturbed->vocabulary == *data.gold.vocabulary)) {
      det::fail(det::ErrorKind::kVocabulary, "perturbed set uses a different type vocabulary");
    }
    const double a = alpha < 0.0 ? config->value.iteration.alpha_0 : alpha;
    auto result = det::noise_phase(config->value, data, det::initial_noise_model(config->value, data),
                                   data.distant, a, 1, perturbed ? &perturbed->value : nullptr);
    *out = new det_noise_model{std::move(result.model)};
  });
}

det_status det_noise_model_load(const char* path, det_noise_model** out) {
  DET_REQUIRE(path && out, "path and out are required");
  return guarded([&] {
    *out = new det_noise_model{det::NoiseModel::from_checkpoint(det::Checkpoint::load(path))};
  });
}

det_status det_noise_model_save(const det_noise_model* model, const char* path) {
  DET_REQUIRE(model && path, "model and path are required");
  return guarded([&] { model->value.to_checkpoint().save(path); });
}

size_t det_noise_model_num_types(const det_noise_model* model) {
  return model ? static_cast<size_t>(model->value.num_types()) : 0;
}

det_status det_noise_model_zero(det_noise_model* model) {
  DET_REQUIRE(model, "model is required");
  model->value.zero_head();
  return DET_OK;
}

det_status det_noise_estimate(const det_noise_model* model, const det_dataset* dataset,
                              size_t index, double* noise) {
  DET_REQUIRE(model && dataset && noise, "model, dataset and noise are required");
  DET_REQUIRE(index < dataset->value.size(), "instance index out of range");
  return guarded([&] {
    if (dataset->value.num_types() != model->value.num_types()) {
      det::fail(det::ErrorKind::kShape, "dataset type count does not match the noise model");
    }
    const auto& inst = dataset->value.instances[index];
    const auto e = det::estimate_noise(model->value, inst.tokens, inst.mention,
                                       det::positive_types(inst.labels));
    std::copy(e.begin(), e.end(), noise);
  });
}

det_status det_noise_recover(const det_noise_model* model, const det_dataset* dataset,
                             size_t index, double* recovered) {
  DET_REQUIRE(model && dataset && recovered, "model, dataset and recovered are required");
  DET_REQUIRE(index < dataset->value.size(), "instance index out of range");
  return guarded([&] {
    if (dataset->value.num_types() != model->value.num_types()) {
      det::fail(det::ErrorKind::kShape, "dataset type count does not match the noise model");
    }
    const auto& inst = dataset->value.instances[index];
    const auto e = det::estimate_noise(model->value, inst.tokens, inst.mention,
                                       det::positive_types(inst.labels));
    const auto y = det::recover(inst.labels, e);
    std::copy(y.begin(), y.end(), recovered);
  });
}

det_status det_denoise(const det_noise_model* model, const det_dataset* dataset,
                       double threshold, det_dataset** out) {
  DET_REQUIRE(model && dataset && out, "model, dataset and out are required");
  DET_REQUIRE(threshold >= 0.0 && threshold <= 1.0, "threshold must lie in [0, 1]");
  return guarded([&] {
    if (dataset->value.num_types() != model->value.num_types()) {
      det::fail(det::ErrorKind::kShape, "dataset type count does not match the noise model");
    }
    *out = new det_dataset{det::denoise_dataset(model->value, dataset->value, threshold)};
  });
}

void det_noise_model_free(det_noise_model* model) { delete model; }

det_status det_train_typing(const det_config* config, const det_dataset* denoised,
                            det_typing_model** out) {
  DET_REQUIRE(config && out, "config and out are required");
  return guarded([&] {
    const det::RunData data = det::load_run_data(config->value);
    det::Dataset extra;
    extra.vocabulary = data.gold.vocabulary;
    extra.kind = det::DatasetKind::kDenoised;
    if (denoised) {
      if (!(*denoised->value.vocabulary == *data.gold.vocabulary)) {
        det::fail(det::ErrorKind::kVocabulary, "denoised set uses a different type vocabulary");
      }
      extra = denoised->value;
    }
    auto model = det::initial_typing_model(config->value, data.gold, extra);
    auto result = det::typing_phase(config->value, data.gold, std::move(model), extra, 1);
    *out = new det_typing_model{std::move(result.model)};
  });
}

det_status det_typing_model_load(const char* path, det_typing_model** out) {
  DET_REQUIRE(path && out, "path and out are required");
  return guarded([&] {
    *out = new det_typing_model{det::TypingModel::from_checkpoint(det::Checkpoint::load(path))};
  });
}

det_status det_typing_model_save(const det_typing_model* model, const char* path) {
  DET_REQUIRE(model && path, "model and path are required");
  return guarded([&] { model->value.to_checkpoint().save(path); });
}

size_t det_typing_model_num_types(const det_typing_model* model) {
  return model ? static_cast<size_t>(model->value.num_types()) : 0;
}

det_status det_typing_score(const det_typing_model* model, const det_dataset* dataset,
                            size_t index, double* scores) {
  DET_REQUIRE(model && dataset && scores, "model, dataset and scores are required");
  DET_REQUIRE(index < dataset->value.size(), "instance index out of range");
  return guarded([&] {
    if (dataset->value.num_types() != model->value.num_types()) {
      det::fail(det::ErrorKind::kShape, "dataset type count does not match the typing model");
    }
    const auto& inst = dataset->value.instances[index];
    const auto s = det::score(model->value, inst.tokens, inst.mention);
    std::copy(s.begin(), s.end(), scores);
  });
}

void det_typing_model_free(det_typing_model* model) { delete model; }

det_status det_iterate(const det_config* config, int force, det_metrics** out) {
  DET_REQUIRE(config, "config is required");
  return guarded([&] {
    const auto& dir = config->value.paths.run_dir;
    if (dir.empty()) det::fail(det::ErrorKind::kConfig, "config has no paths.run_dir");
    if (std::filesystem::exists(dir) && !std::filesystem::is_empty(dir)) {
      if (!force) {
        det::fail(det::ErrorKind::kConfig,
                  "run directory " + dir.string() + " is not empty (use --force to overwrite)");
      }
      for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("iter-", 0) == 0 || name == "run.json") {
          std::filesystem::remove_all(entry.path());
        }
      }
    }
    const det::RunData data = det::load_run_data(config->value);
    auto result = det::ablation_run(config->value, data);
    if (out) *out = new det_metrics{result.final_metrics()};
  });
}

det_status det_evaluate(const det_typing_model* model, const det_dataset* dataset,
                        const char* hierarchy_path, int grid_size, double threshold,
                        det_metrics** out) {
  DET_REQUIRE(model && dataset && out, "model, dataset and out are required");
  DET_REQUIRE(grid_size >= 2, "grid_size must be at least 2");
  DET_REQUIRE(threshold <= 1.0, "threshold must not exceed 1");
  return guarded([&] {
    if (dataset->value.num_types() != model->value.num_types()) {
      det::fail(det::ErrorKind::kShape, "dataset type count does not match the typing model");
    }
    det::HierarchyPairs pairs;
    if (hierarchy_path) pairs = det::load_hierarchy(hierarchy_path, *dataset->value.vocabulary);
    std::optional<double> fixed;
    if (threshold >= 0.0) fixed = threshold;
    *out = new det_metrics{det::evaluate_scores(det::score_dataset(model->value, dataset->value),
                                                det::labels_of(dataset->value), pairs, grid_size,
                                                fixed)};
  });
}

det_status det_write_predictions(const det_typing_model* model, const det_dataset* dataset,
                                 const char* path) {
  DET_REQUIRE(model && dataset && path, "model, dataset and path are required");
  return guarded([&] {
    if (dataset->value.num_types() != model->value.num_types()) {
      det::fail(det::ErrorKind::kShape, "dataset type count does not match the typing model");
    }
    det::write_predictions_jsonl(dataset->value, det::score_dataset(model->value, dataset->value),
                                 path);
  });
}

double det_metrics_macro_f1(const det_metrics* m) { return m ? m->value.macro_f1 : 0.0; }
double det_metrics_macro_p(const det_metrics* m) { return m ? m->value.macro_p : 0.0; }
double det_metrics_macro_r(const det_metrics* m) { return m ? m->value.macro_r : 0.0; }
double det_metrics_mrr(const det_metrics* m) { return m ? m->value.mrr : 0.0; }
double det_metrics_threshold(const det_metrics* m) { return m ? m->value.threshold_used : 0.0; }

det_status det_metrics_to_json(const det_metrics* metrics, char** out) {
  DET_REQUIRE(metrics && out, "metrics and out are required");
  return guarded([&] { *out = copy_string(det::to_json(metrics->value).dump(2)); });
}

det_status det_metrics_save(const det_metrics* metrics, const char* json_path,
                            const char* pr_curve_csv_path) {
  DET_REQUIRE(metrics, "metrics is required");
  return guarded([&] {
    if (json_path) {
      std::ofstream f(json_path);
      if (!f) det::fail(det::ErrorKind::kIo, std::string("cannot write ") + json_path);
      f << det::to_json(metrics->value).dump(2) << "\n";
      if (!f) det::fail(det::ErrorKind::kIo, std::string("write failed for ") + json_path);
    }
    if (pr_curve_csv_path) det::write_pr_curve_csv(metrics->value.pr_curve, pr_curve_csv_path);
  });
}

void det_metrics_free(det_metrics* metrics) { delete metrics; }

}  // extern "C"
