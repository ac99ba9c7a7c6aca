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

#ifndef DET_TYPING_MODEL_HPP_
#define DET_TYPING_MODEL_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "det/checkpoint.hpp"
#include "det/corpus.hpp"
#include "det/encoder.hpp"
#include "det/optimizer.hpp"

namespace det {

// s_t in (0, 1) for every type t.
using ScoreVector = std::vector<double>;

// Two independent towers: one encodes the entity-marked context, the other
// encodes a single type phrase. Scores are sigmoid inner products.
struct TypingModel {
  std::shared_ptr<const TypeVocabulary> types;
  TokenVocabulary tokens;
  EncoderParams context_tower;
  EncoderParams candidate_tower;

  static TypingModel initialize(std::shared_ptr<const TypeVocabulary> types,
                                TokenVocabulary tokens, const EncoderConfig& config);

  int num_types() const { return types->size(); }

  Checkpoint to_checkpoint() const;
  static TypingModel from_checkpoint(const Checkpoint& checkpoint);
};

struct TypingGradients {
  EncoderParams context_tower;
  EncoderParams candidate_tower;

  static TypingGradients zeros_for(const TypingModel& model);
  void set_zero();
};

RowVector embed_context(const TypingModel& model, const std::vector<std::string>& words,
                        MentionSpan mention);

// T x d, row t is the candidate-tower encoding of type phrase t (eval mode).
Matrix embed_all_types(const TypingModel& model);
// Number of embed_all_types evaluations since process start.
int64_t type_matrix_computations();

double sigmoid(double x);

// Scores against a precomputed type matrix.
ScoreVector score_with(const TypingModel& model, const Matrix& type_matrix,
                       const std::vector<std::string>& words, MentionSpan mention);
// Computes the type matrix, then scores.
ScoreVector score(const TypingModel& model, const std::vector<std::string>& words,
                  MentionSpan mention);

// Scores every instance with one shared type matrix.
std::vector<ScoreVector> score_dataset(const TypingModel& model, const Dataset& dataset);

// Summed per-type BCE over `batch`, each instance weighted by `weight`. The
// type matrix is computed once for the batch. Gradients are accumulated when
// `grads` is non-null; `dropout_seed` set means train mode.
double typing_batch_loss(const TypingModel& model, std::span<const Instance* const> batch,
                         TypingGradients* grads, const uint64_t* dropout_seed = nullptr,
                         double weight = 1.0);

// One-instance J_typing in eval mode.
double loss_typing(const TypingModel& model, const Instance& instance,
                   TypingGradients* grads = nullptr);

struct TypingLossRecord {
  int epoch = 0;
  double loss = 0.0;
};

struct TypingTrainResult {
  TypingModel model;
  std::vector<TypingLossRecord> trace;
};

// Mini-batch Adam over gold followed by denoised, reshuffled every epoch.
TypingTrainResult train_typing(TypingModel model, const Dataset& gold, const Dataset& denoised,
                               const OptimizerConfig& optimizer);

// Labels replaced by 1{score >= threshold}; the result is a distant dataset.
Dataset relabel_dataset(const TypingModel& model, const Dataset& dataset, double threshold);

}  // namespace det

#endif  // DET_TYPING_MODEL_HPP_
