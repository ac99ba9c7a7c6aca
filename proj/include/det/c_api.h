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

#ifndef DET_C_API_H_
#define DET_C_API_H_

#include <stddef.h>
#include <stdint.h>

#if defined(DET_BUILDING_LIBRARY)
#define DET_API __attribute__((visibility("default")))
#else
#define DET_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum det_status {
  DET_OK = 0,
  DET_ERR_PARSE = 1,
  DET_ERR_VOCABULARY = 2,
  DET_ERR_IO = 3,
  DET_ERR_CONFIG = 4,
  DET_ERR_NUMERIC = 5,
  DET_ERR_SHAPE = 6,
  DET_ERR_STATE = 7,
  DET_ERR_ARGUMENT = 8,
  DET_ERR_INTERNAL = 9
} det_status;

typedef struct det_config det_config;
typedef struct det_vocab det_vocab;
typedef struct det_dataset det_dataset;
typedef struct det_perturbed det_perturbed;
typedef struct det_noise_model det_noise_model;
typedef struct det_typing_model det_typing_model;
typedef struct det_metrics det_metrics;

/* Message of the last failed call on this thread, "" if none. */
DET_API const char* det_last_error(void);
DET_API const char* det_status_name(det_status status);
DET_API const char* det_version(void);
/* Frees strings returned through char** out-parameters. */
DET_API void det_string_free(char* s);

/* Run configuration. Relative paths resolve against the file's directory. */
DET_API det_status det_config_load(const char* path, det_config** out);
DET_API det_status det_config_parse(const char* json_text, const char* base_dir,
                                    det_config** out);
DET_API det_status det_config_to_json(const det_config* config, char** out);
/* Overrides the synth, encoder and iteration seeds. */
DET_API det_status det_config_set_seed(det_config* config, uint64_t seed);
DET_API det_status det_config_set_run_dir(det_config* config, const char* run_dir);
DET_API det_status det_config_set_ablation(det_config* config, const char* mode);
DET_API det_status det_config_set_threshold(det_config* config, double threshold);
/* which: "vocab", "gold", "distant", "dev", "hierarchy" or "run_dir"; "" when unset. */
DET_API det_status det_config_path(const det_config* config, const char* which, char** out);
/* Loads the type vocabulary named by paths.vocab. */
DET_API det_status det_config_load_vocab(const det_config* config, det_vocab** out);
/* which: "gold", "distant" or "dev". */
DET_API det_status det_config_load_dataset(const det_config* config, const char* which,
                                           det_dataset** out);
/* Thresholds from the config: "denoise", "relabel" or "eval" (-1 when the
   eval threshold is tuned). */
DET_API det_status det_config_threshold(const det_config* config, const char* which,
                                        double* out);
DET_API int det_config_grid_size(const det_config* config);
DET_API void det_config_free(det_config* config);

DET_API det_status det_vocab_load(const char* path, det_vocab** out);
DET_API size_t det_vocab_size(const det_vocab* vocab);
/* Borrowed pointer, valid while the vocabulary lives. */
DET_API const char* det_vocab_phrase(const det_vocab* vocab, size_t index);
DET_API void det_vocab_free(det_vocab* vocab);

/* kind: "gold", "distant", "perturbed" or "denoised". */
DET_API det_status det_dataset_load(const char* path, const det_vocab* vocab, const char* kind,
                                    det_dataset** out);
DET_API det_status det_dataset_save(const det_dataset* dataset, const char* path);
DET_API size_t det_dataset_size(const det_dataset* dataset);
/* Position of the instance with the given id. */
DET_API det_status det_dataset_find(const det_dataset* dataset, const char* id, size_t* index);
/* Observed labels of one instance, num_types bytes of 0 or 1. */
DET_API det_status det_dataset_labels(const det_dataset* dataset, size_t index, uint8_t* labels);
DET_API size_t det_dataset_num_types(const det_dataset* dataset);
/* Context text with the mention in brackets. */
DET_API det_status det_dataset_instance_text(const det_dataset* dataset, size_t index,
                                             char** out);
DET_API void det_dataset_free(det_dataset* dataset);

/* Writes vocab.txt, gold.jsonl, distant.jsonl, dev.jsonl and hierarchy.tsv
   into out_dir (created when missing) from the config's synth section. */
DET_API det_status det_generate(const det_config* config, const char* out_dir);

/* D_P built from the config's gold and distant data with the iteration
   drop rate and seed. */
DET_API det_status det_perturb(const det_config* config, det_perturbed** out);
DET_API det_status det_perturbed_load(const char* path, const det_vocab* vocab,
                                      det_perturbed** out);
DET_API det_status det_perturbed_save(const det_perturbed* perturbed, const char* path);
DET_API size_t det_perturbed_size(const det_perturbed* perturbed);
DET_API void det_perturbed_free(det_perturbed* perturbed);

/* One noise-model phase on the config's data. With perturbed == NULL a fresh
   D_P is drawn every epoch. alpha < 0 selects the config's alpha_0. */
DET_API det_status det_train_noise(const det_config* config, const det_perturbed* perturbed,
                                   double alpha, det_noise_model** out);
DET_API det_status det_noise_model_load(const char* path, det_noise_model** out);
DET_API det_status det_noise_model_save(const det_noise_model* model, const char* path);
DET_API size_t det_noise_model_num_types(const det_noise_model* model);
/* Sets the head to zero so every noise estimate is 0. */
DET_API det_status det_noise_model_zero(det_noise_model* model);
/* Noise estimate e for one instance's observed labels; `noise` has room for
   num_types values. */
DET_API det_status det_noise_estimate(const det_noise_model* model, const det_dataset* dataset,
                                      size_t index, double* noise);
/* Recovered labels [min(y - e, 1)]_+ for one instance. */
DET_API det_status det_noise_recover(const det_noise_model* model, const det_dataset* dataset,
                                     size_t index, double* recovered);
DET_API det_status det_denoise(const det_noise_model* model, const det_dataset* dataset,
                               double threshold, det_dataset** out);
DET_API void det_noise_model_free(det_noise_model* model);

/* One typing-model phase on the config's gold data plus `denoised`
   (may be NULL). */
DET_API det_status det_train_typing(const det_config* config, const det_dataset* denoised,
                                    det_typing_model** out);
DET_API det_status det_typing_model_load(const char* path, det_typing_model** out);
DET_API det_status det_typing_model_save(const det_typing_model* model, const char* path);
DET_API size_t det_typing_model_num_types(const det_typing_model* model);
/* Sigmoid scores for one instance; `scores` has room for num_types values. */
DET_API det_status det_typing_score(const det_typing_model* model, const det_dataset* dataset,
                                    size_t index, double* scores);
DET_API void det_typing_model_free(det_typing_model* model);

/* Runs the config's ablation mode and fills its run directory. With
   force == 0 a non-empty run directory is refused. `out` may be NULL. */
DET_API det_status det_iterate(const det_config* config, int force, det_metrics** out);

/* hierarchy_path may be NULL; threshold < 0 means tune on the data. */
DET_API det_status det_evaluate(const det_typing_model* model, const det_dataset* dataset,
                                const char* hierarchy_path, int grid_size, double threshold,
                                det_metrics** out);
/* Writes {"id", "scores"} JSONL for every instance of `dataset`. */
DET_API det_status det_write_predictions(const det_typing_model* model, const det_dataset* dataset,
                                         const char* path);
DET_API double det_metrics_macro_f1(const det_metrics* metrics);
DET_API double det_metrics_macro_p(const det_metrics* metrics);
DET_API double det_metrics_macro_r(const det_metrics* metrics);
DET_API double det_metrics_mrr(const det_metrics* metrics);
DET_API double det_metrics_threshold(const det_metrics* metrics);
DET_API det_status det_metrics_to_json(const det_metrics* metrics, char** out);
DET_API det_status det_metrics_save(const det_metrics* metrics, const char* json_path,
                                    const char* pr_curve_csv_path);
DET_API void det_metrics_free(det_metrics* metrics);

#ifdef __cplusplus
}
#endif

#endif /* DET_C_API_H_ */
