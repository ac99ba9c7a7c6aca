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

#ifndef DET_NOISE_MODEL_HPP_
#define DET_NOISE_MODEL_HPP_

#include <memory>
#include <string>
#include <vector>

#include "det/checkpoint.hpp"
#include "det/corpus.hpp"
#include "det/encoder.hpp"
#include "det/optimizer.hpp"
#include "det/perturb.hpp"

namespace det {

// Lower clamp applied to recovered labels before taking logs.
inline constexpr double kLogClamp = 1e-6;

// Per-type noise estimate, every entry in (-1, 1).
using NoiseVector = std::vector<double>;
// Labels after removing noise, every entry in [0, 1].
using RecoveredLabels = std::vector<double>;

// How the (context, mention, type set) triple is pooled into one vector.
enum class NoiseEncoding {
  // One sequence, context and type tokens attend to each other.
  kJoint,
  // Context and each type phrase encoded separately and summed.
  kSeparateSum,
};

struct NoiseModel {
  std::shared_ptr<const TypeVocabulary> types;
  TokenVocabulary tokens;
  EncoderParams encoder;
  Matrix head_weight;  // d x T
  Matrix head_bias;    // 1 x T
  NoiseEncoding encoding = NoiseEncoding::kJoint;

  // Encoder and head weights ~ N(0, 0.02^2), head bias 0.
  static NoiseModel initialize(std::shared_ptr<const TypeVocabulary> types,
                               TokenVocabulary tokens, const EncoderConfig& config,
                               NoiseEncoding encoding = NoiseEncoding::kJoint);

  int num_types() const { return types->size(); }
  // W = 0 and b = 0, so every estimate is exactly 0.
  void zero_head();

  Checkpoint to_checkpoint() const;
  static NoiseModel from_checkpoint(const Checkpoint& checkpoint);
};

struct NoiseGradients {
  EncoderParams encoder;
  Matrix head_weight;
  Matrix head_bias;

  static NoiseGradients zeros_for(const NoiseModel& model);
  void set_zero();
};

// tanh(W Embed(x, m, tau) + b). `observed` lists tau as type ids; they are
// fed to the encoder in ascending id order. A null rng means eval mode.
NoiseVector estimate_noise(const NoiseModel& model, const std::vector<std::string>& words,
                           MentionSpan mention, const std::vector<TypeId>& observed,
                           Rng* dropout = nullptr);
// Same, with tau given as phrases; unknown phrases raise a vocabulary error.
NoiseVector estimate_noise(const NoiseModel& model, const std::vector<std::string>& words,
                           MentionSpan mention, const std::vector<std::string>& observed);

// [min(y - e, 1)]_+ elementwise.
RecoveredLabels recover(const std::vector<double>& labels, const NoiseVector& noise);
RecoveredLabels recover(const LabelVector& labels, const NoiseVector& noise);

// Per-type BCE of the recovered labels against `target`, with the recovered
// labels clamped to [kLogClamp, 1 - kLogClamp]. If `dnoise` is non-null it
// receives d(loss)/d(e); the clamp's kinks take the flat-side derivative.
double dp_loss_from_noise(const LabelVector& perturbed, const LabelVector& target,
                          const NoiseVector& noise, std::vector<double>* dnoise = nullptr);
// sum_t |recovered_t - observed_t| with subgradient 0 at the kink.
double dn_loss_from_noise(const LabelVector& observed, const NoiseVector& noise,
                          std::vector<double>* dnoise = nullptr);

// Losses of one instance; gradients are accumulated into `grads` when given,
// scaled by `weight`.
double loss_dp(const NoiseModel& model, const PerturbedInstance& item,
               NoiseGradients* grads = nullptr, Rng* dropout = nullptr, double weight = 1.0);
double loss_dn(const NoiseModel& model, const Instance& instance,
               NoiseGradients* grads = nullptr, Rng* dropout = nullptr, double weight = 1.0);

struct NoiseLossRecord {
  int epoch = 0;
  double j_dp = 0.0;
  double j_dn = 0.0;
  double j_total = 0.0;
};

struct NoiseTrainResult {
  NoiseModel model;
  std::vector<NoiseLossRecord> trace;
};

// Source of the perturbed set for each epoch.
using PerturbedSource = std::function<std::vector<PerturbedInstance>(int epoch)>;

// Mini-batch Adam on mean J_DP + alpha * mean J_DN. Each step pairs one
// batch from the perturbed set with the next batch of `d_prime` (cycled and
// reshuffled on wrap). An epoch is one pass over the perturbed set. A
// non-finite loss aborts with the epoch and step.
NoiseTrainResult train_noise_model(NoiseModel model, const PerturbedSource& perturbed,
                                   const Dataset& d_prime, double alpha,
                                   const OptimizerConfig& optimizer);
NoiseTrainResult train_noise_model(NoiseModel model,
                                   const std::vector<PerturbedInstance>& perturbed,
                                   const Dataset& d_prime, double alpha,
                                   const OptimizerConfig& optimizer);

// Labels replaced by 1{recovered >= threshold}; provenance fields untouched.
Dataset denoise_dataset(const NoiseModel& model, const Dataset& dataset, double threshold);

}  // namespace det

#endif  // DET_NOISE_MODEL_HPP_
