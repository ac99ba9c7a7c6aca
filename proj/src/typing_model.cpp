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

#include "det/typing_model.hpp"

#include <atomic>
#include <cmath>

#include "det/error.hpp"

namespace det {

namespace {

std::atomic<int64_t> g_type_matrix_computations{0};

enum : uint64_t { kStreamTypes = 21, kStreamContext = 22, kStreamOrder = 23, kStreamStep = 24 };

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

JointInput type_input(const TypingModel& model, TypeId t) {
  return joint_encode_phrase(model.tokens, model.types->phrase_tokens(t),
                             model.candidate_tower.config.max_positions);
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

TypingModel TypingModel::initialize(std::shared_ptr<const TypeVocabulary> types,
                                    TokenVocabulary tokens, const EncoderConfig& config) {
  if (!types) fail(ErrorKind::kVocabulary, "typing model needs a type vocabulary");
  EncoderConfig ctx = config;
  ctx.vocab_size = tokens.size();
  EncoderConfig cand = ctx;
  cand.seed = derive_seed(config.seed, {0x43414e44});
  TypingModel m;
  m.types = std::move(types);
  m.tokens = std::move(tokens);
  m.context_tower = EncoderParams::initialize(ctx);
  m.candidate_tower = EncoderParams::initialize(cand);
  return m;
}

Checkpoint TypingModel::to_checkpoint() const {
  Checkpoint ck;
  ck.put_encoder("ctx.", context_tower);
  ck.put_encoder("cand.", candidate_tower);
  ck.metadata["model"] = "typing";
  ck.metadata["types"] = types->phrases();
  ck.metadata["tokens"] = tokens.words();
  return ck;
}

TypingModel TypingModel::from_checkpoint(const Checkpoint& ck) {
  if (ck.metadata.value("model", "") != "typing") {
    fail(ErrorKind::kParse, "checkpoint does not hold a typing model");
  }
  TypingModel m;
  m.types = std::make_shared<const TypeVocabulary>(
      ck.metadata.at("types").get<std::vector<std::string>>());
  m.tokens = TokenVocabulary(ck.metadata.at("tokens").get<std::vector<std::string>>());
  m.context_tower = ck.get_encoder("ctx.", encoder_config_from_json(ck.metadata.at("ctx.config")));
  m.candidate_tower =
      ck.get_encoder("cand.", encoder_config_from_json(ck.metadata.at("cand.config")));
  if (m.context_tower.config.embed_dim != m.candidate_tower.config.embed_dim) {
    fail(ErrorKind::kShape, "context and candidate towers disagree on embed_dim");
  }
  return m;
}

TypingGradients TypingGradients::zeros_for(const TypingModel& model) {
  return {model.context_tower.zeros_like(), model.candidate_tower.zeros_like()};
}

void TypingGradients::set_zero() {
  context_tower.set_zero();
  candidate_tower.set_zero();
}

RowVector embed_context(const TypingModel& model, const std::vector<std::string>& words,
                        MentionSpan mention) {
  const JointInput in = joint_encode_context(model.tokens, words, mention,
                                             model.context_tower.config.max_positions);
  return encode(model.context_tower, in);
}

Matrix embed_all_types(const TypingModel& model) {
  g_type_matrix_computations.fetch_add(1, std::memory_order_relaxed);
  Matrix out(model.num_types(), model.candidate_tower.config.embed_dim);
  for (TypeId t = 0; t < model.num_types(); ++t) {
    out.row(t) = encode(model.candidate_tower, type_input(model, t));
  }
  return out;
}

int64_t type_matrix_computations() {
  return g_type_matrix_computations.load(std::memory_order_relaxed);
}

ScoreVector score_with(const TypingModel& model, const Matrix& type_matrix,
                       const std::vector<std::string>& words, MentionSpan mention) {
  const RowVector c = embed_context(model, words, mention);
  ScoreVector s(type_matrix.rows());
  for (int t = 0; t < type_matrix.rows(); ++t) s[t] = sigmoid(type_matrix.row(t).dot(c));
  return s;
}

ScoreVector score(const TypingModel& model, const std::vector<std::string>& words,
                  MentionSpan mention) {
  return score_with(model, embed_all_types(model), words, mention);
}

std::vector<ScoreVector> score_dataset(const TypingModel& model, const Dataset& dataset) {
  const Matrix types = embed_all_types(model);
  std::vector<ScoreVector> out;
  out.reserve(dataset.size());
  for (const auto& inst : dataset.instances) {
    out.push_back(score_with(model, types, inst.tokens, inst.mention));
  }
  return out;
}

double typing_batch_loss(const TypingModel& model, std::span<const Instance* const> batch,
                         TypingGradients* grads, const uint64_t* dropout_seed, double weight) {
  const int num_types = model.num_types();
  const int d = model.context_tower.config.embed_dim;
  const bool train = dropout_seed != nullptr;

  std::vector<EncoderCache> type_caches(grads ? num_types : 0);
  Matrix type_matrix(num_types, d);
  {
    std::unique_ptr<Rng> drop;
    if (train) drop = std::make_unique<Rng>(derive_seed(*dropout_seed, {kStreamTypes}));
    for (TypeId t = 0; t < num_types; ++t) {
      type_matrix.row(t) = encode(model.candidate_tower, type_input(model, t), drop.get(),
                                  grads ? &type_caches[t] : nullptr);
    }
  }

  Matrix dtypes = Matrix::Zero(grads ? num_types : 0, d);
  double total = 0.0;
  EncoderCache ctx_cache;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Instance& inst = *batch[i];
    if (static_cast<int>(inst.labels.size()) != num_types) {
      fail(ErrorKind::kShape, "instance '" + inst.id + "' has the wrong label width");
    }
    std::unique_ptr<Rng> drop;
    if (train) drop = std::make_unique<Rng>(derive_seed(*dropout_seed, {kStreamContext, i}));
    const JointInput in = joint_encode_context(model.tokens, inst.tokens, inst.mention,
                                               model.context_tower.config.max_positions);
    const RowVector c = encode(model.context_tower, in, drop.get(), grads ? &ctx_cache : nullptr);
    const Eigen::VectorXd logits = type_matrix * c.transpose();
    double loss = 0.0;
    Eigen::VectorXd dlogits(num_types);
    for (int t = 0; t < num_types; ++t) {
      const double y = inst.labels[t];
      loss += softplus(logits(t)) - y * logits(t);
      dlogits(t) = weight * (sigmoid(logits(t)) - y);
    }
    if (!std::isfinite(loss)) fail(ErrorKind::kNumeric, "J_typing is not finite for '" + inst.id + "'");
    total += weight * loss;
    if (grads) {
      const RowVector dc = dlogits.transpose() * type_matrix;
      dtypes.noalias() += dlogits * c;
      encode_backward(model.context_tower, ctx_cache, dc, grads->context_tower);
    }
  }
  if (grads) {
    for (TypeId t = 0; t < num_types; ++t) {
      encode_backward(model.candidate_tower, type_caches[t], dtypes.row(t), grads->candidate_tower);
    }
  }
  return total;
}

double loss_typing(const TypingModel& model, const Instance& instance, TypingGradients* grads) {
  const Instance* one[] = {&instance};
  return typing_batch_loss(model, one, grads);
}

TypingTrainResult train_typing(TypingModel model, const Dataset& gold, const Dataset& denoised,
                               const OptimizerConfig& optimizer) {
  optimizer.validate();
  for (const Dataset* ds : {&gold, &denoised}) {
    if (!ds->empty() && ds->num_types() != model.num_types()) {
      fail(ErrorKind::kShape, "training data type count does not match the typing model");
    }
  }
  std::vector<const Instance*> pool;
  pool.reserve(gold.size() + denoised.size());
  for (const auto& i : gold.instances) pool.push_back(&i);
  for (const auto& i : denoised.instances) pool.push_back(&i);
  if (pool.empty()) fail(ErrorKind::kConfig, "typing model has no training data");

  Adam adam(optimizer);
  TypingGradients grads = TypingGradients::zeros_for(model);
  std::vector<Matrix*> params;
  std::vector<const Matrix*> gradients;
  model.context_tower.for_each([&](const std::string&, Matrix& m) { params.push_back(&m); });
  model.candidate_tower.for_each([&](const std::string&, Matrix& m) { params.push_back(&m); });
  grads.context_tower.for_each([&](const std::string&, Matrix& m) { gradients.push_back(&m); });
  grads.candidate_tower.for_each([&](const std::string&, Matrix& m) { gradients.push_back(&m); });

  TypingTrainResult result;
  const size_t batch = static_cast<size_t>(optimizer.batch_size);
  for (int epoch = 0; epoch < optimizer.epochs; ++epoch) {
    Rng(derive_seed(optimizer.seed, {kStreamOrder, static_cast<uint64_t>(epoch)})).shuffle(pool);
    double sum = 0.0;
    uint64_t step = 0;
    for (size_t start = 0; start < pool.size(); start += batch, ++step) {
      const size_t end = std::min(pool.size(), start + batch);
      grads.set_zero();
      const uint64_t seed =
          derive_seed(optimizer.seed, {kStreamStep, static_cast<uint64_t>(epoch), step});
      const std::span<const Instance* const> slice(pool.data() + start, end - start);
      sum += typing_batch_loss(model, slice, &grads, &seed,
                               1.0 / static_cast<double>(end - start)) *
             static_cast<double>(end - start);
      bool finite = true;
      for (const Matrix* g : gradients) finite = finite && g->allFinite();
      if (!finite) {
        fail(ErrorKind::kNumeric, "typing model gradient diverged at epoch " +
                                      std::to_string(epoch) + ", step " + std::to_string(step));
      }
      adam.step(params, gradients);
    }
    result.trace.push_back({epoch, sum / static_cast<double>(pool.size())});
  }
  result.model = std::move(model);
  return result;
}

Dataset relabel_dataset(const TypingModel& model, const Dataset& dataset, double threshold) {
  const auto scores = score_dataset(model, dataset);
  Dataset out;
  out.vocabulary = dataset.vocabulary;
  out.kind = DatasetKind::kDistant;
  out.instances = dataset.instances;
  for (size_t i = 0; i < scores.size(); ++i) {
    auto& labels = out.instances[i].labels;
    for (size_t t = 0; t < labels.size(); ++t) labels[t] = scores[i][t] >= threshold ? 1 : 0;
  }
  return out;
}

}  // namespace det
