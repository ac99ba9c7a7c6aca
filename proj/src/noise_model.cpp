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

#include "det/noise_model.hpp"

#include <algorithm>
#include <cmath>

#include "det/error.hpp"

namespace det {

using nlohmann::json;

namespace {

struct NoiseForward {
  RowVector pooled;
  std::vector<EncoderCache> caches;
  NoiseVector noise;
};

std::vector<std::vector<std::string>> phrases_of(const TypeVocabulary& types,
                                                 std::vector<TypeId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<std::vector<std::string>> out;
  out.reserve(ids.size());
  for (TypeId t : ids) {
    if (t < 0 || t >= types.size()) {
      fail(ErrorKind::kVocabulary, "type id " + std::to_string(t) + " is not in the vocabulary");
    }
    out.push_back(types.phrase_tokens(t));
  }
  return out;
}

NoiseForward forward(const NoiseModel& model, const std::vector<std::string>& words,
                     MentionSpan mention, const std::vector<TypeId>& observed, Rng* dropout,
                     bool keep_cache) {
  const int max_pos = model.encoder.config.max_positions;
  const auto phrases = phrases_of(*model.types, observed);
  NoiseForward f;
  if (model.encoding == NoiseEncoding::kJoint) {
    const JointInput in =
        joint_encode_context_types(model.tokens, words, mention, phrases, max_pos);
    f.caches.resize(1);
    f.pooled = encode(model.encoder, in, dropout, keep_cache ? &f.caches[0] : nullptr);
  } else {
    f.caches.resize(1 + phrases.size());
    const JointInput ctx = joint_encode_context(model.tokens, words, mention, max_pos);
    f.pooled = encode(model.encoder, ctx, dropout, keep_cache ? &f.caches[0] : nullptr);
    for (size_t i = 0; i < phrases.size(); ++i) {
      const JointInput in = joint_encode_phrase(model.tokens, phrases[i], max_pos);
      f.pooled += encode(model.encoder, in, dropout, keep_cache ? &f.caches[i + 1] : nullptr);
    }
  }
  RowVector z = f.pooled * model.head_weight + model.head_bias;
  f.noise.resize(z.size());
  for (int t = 0; t < z.size(); ++t) f.noise[t] = std::tanh(z(t));
  return f;
}

void backward(const NoiseModel& model, const NoiseForward& f, const std::vector<double>& dnoise,
              double weight, NoiseGradients& grads) {
  const int num_types = model.num_types();
  RowVector dz(num_types);
  for (int t = 0; t < num_types; ++t) {
    dz(t) = weight * dnoise[t] * (1.0 - f.noise[t] * f.noise[t]);
  }
  grads.head_weight.noalias() += f.pooled.transpose() * dz;
  grads.head_bias.row(0) += dz;
  const RowVector dpooled = dz * model.head_weight.transpose();
  for (const auto& cache : f.caches) encode_backward(model.encoder, cache, dpooled, grads.encoder);
}

// d[min(u, 1)]_+/du with the flat side taken at both kinks.
double recover_slope(double u) { return (u > 0.0 && u < 1.0) ? 1.0 : 0.0; }

double recover_one(double y, double e) { return std::max(std::min(y - e, 1.0), 0.0); }

void check_width(size_t width, int num_types, const char* what) {
  if (static_cast<int>(width) != num_types) {
    fail(ErrorKind::kShape, std::string(what) + " has length " + std::to_string(width) +
                                ", expected " + std::to_string(num_types));
  }
}

}  // namespace

NoiseModel NoiseModel::initialize(std::shared_ptr<const TypeVocabulary> types,
                                  TokenVocabulary tokens, const EncoderConfig& config,
                                  NoiseEncoding encoding) {
  if (!types) fail(ErrorKind::kVocabulary, "noise model needs a type vocabulary");
  EncoderConfig cfg = config;
  cfg.vocab_size = tokens.size();
  NoiseModel m;
  m.types = std::move(types);
  m.tokens = std::move(tokens);
  m.encoder = EncoderParams::initialize(cfg);
  m.encoding = encoding;
  Rng rng(derive_seed(cfg.seed, {0x48454144}));
  m.head_weight.resize(cfg.embed_dim, m.types->size());
  for (int j = 0; j < m.head_weight.cols(); ++j) {
    for (int i = 0; i < m.head_weight.rows(); ++i) m.head_weight(i, j) = 0.02 * rng.normal();
  }
  m.head_bias = Matrix::Zero(1, m.types->size());
  return m;
}

void NoiseModel::zero_head() {
  head_weight.setZero();
  head_bias.setZero();
}

Checkpoint NoiseModel::to_checkpoint() const {
  Checkpoint ck;
  ck.put_encoder("enc.", encoder);
  ck.tensors["noise.W"] = head_weight;
  ck.tensors["noise.b"] = head_bias;
  ck.metadata["model"] = "noise";
  ck.metadata["types"] = types->phrases();
  ck.metadata["tokens"] = tokens.words();
  ck.metadata["encoding"] = encoding == NoiseEncoding::kJoint ? "joint" : "separate_sum";
  return ck;
}

NoiseModel NoiseModel::from_checkpoint(const Checkpoint& ck) {
  if (ck.metadata.value("model", "") != "noise") {
    fail(ErrorKind::kParse, "checkpoint does not hold a noise model");
  }
  NoiseModel m;
  m.types = std::make_shared<const TypeVocabulary>(
      ck.metadata.at("types").get<std::vector<std::string>>());
  const auto words = ck.metadata.at("tokens").get<std::vector<std::string>>();
  m.tokens = TokenVocabulary(words);
  m.encoder = ck.get_encoder("enc.", encoder_config_from_json(ck.metadata.at("enc.config")));
  m.head_weight = ck.at("noise.W");
  m.head_bias = ck.at("noise.b");
  m.encoding = ck.metadata.value("encoding", "joint") == "joint" ? NoiseEncoding::kJoint
                                                               : NoiseEncoding::kSeparateSum;
  if (m.head_weight.rows() != m.encoder.config.embed_dim ||
      m.head_weight.cols() != m.types->size() || m.head_bias.rows() != 1 ||
      m.head_bias.cols() != m.types->size()) {
    fail(ErrorKind::kShape, "noise head shape does not match encoder and vocabulary");
  }
  return m;
}

NoiseGradients NoiseGradients::zeros_for(const NoiseModel& model) {
  NoiseGradients g;
  g.encoder = model.encoder.zeros_like();
  g.head_weight = Matrix::Zero(model.head_weight.rows(), model.head_weight.cols());
  g.head_bias = Matrix::Zero(1, model.head_bias.cols());
  return g;
}

void NoiseGradients::set_zero() {
  encoder.set_zero();
  head_weight.setZero();
  head_bias.setZero();
}

NoiseVector estimate_noise(const NoiseModel& model, const std::vector<std::string>& words,
                           MentionSpan mention, const std::vector<TypeId>& observed,
                           Rng* dropout) {
  return forward(model, words, mention, observed, dropout, false).noise;
}

NoiseVector estimate_noise(const NoiseModel& model, const std::vector<std::string>& words,
                           MentionSpan mention, const std::vector<std::string>& observed) {
  std::vector<TypeId> ids;
  ids.reserve(observed.size());
  for (const auto& p : observed) ids.push_back(model.types->id_of(p));
  return estimate_noise(model, words, mention, ids);
}

RecoveredLabels recover(const std::vector<double>& labels, const NoiseVector& noise) {
  if (labels.size() != noise.size()) {
    fail(ErrorKind::kShape, "recover: labels have length " + std::to_string(labels.size()) +
                                " but noise has length " + std::to_string(noise.size()));
  }
  RecoveredLabels out(labels.size());
  for (size_t t = 0; t < labels.size(); ++t) out[t] = recover_one(labels[t], noise[t]);
  return out;
}

RecoveredLabels recover(const LabelVector& labels, const NoiseVector& noise) {
  return recover(std::vector<double>(labels.begin(), labels.end()), noise);
}

double dp_loss_from_noise(const LabelVector& perturbed, const LabelVector& target,
                          const NoiseVector& noise, std::vector<double>* dnoise) {
  const size_t n = noise.size();
  if (perturbed.size() != n || target.size() != n) {
    fail(ErrorKind::kShape, "dp loss: label and noise lengths differ");
  }
  if (dnoise) dnoise->assign(n, 0.0);
  double loss = 0.0;
  for (size_t t = 0; t < n; ++t) {
    const double u = perturbed[t] - noise[t];
    const double y = recover_one(perturbed[t], noise[t]);
    const double p = std::clamp(y, kLogClamp, 1.0 - kLogClamp);
    const double g = target[t];
    loss -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
    if (dnoise) {
      const bool inside = y > kLogClamp && y < 1.0 - kLogClamp;
      const double dp = -g / p + (1.0 - g) / (1.0 - p);
      (*dnoise)[t] = inside ? -dp * recover_slope(u) : 0.0;
    }
  }
  return loss;
}

double dn_loss_from_noise(const LabelVector& observed, const NoiseVector& noise,
                          std::vector<double>* dnoise) {
  const size_t n = noise.size();
  if (observed.size() != n) fail(ErrorKind::kShape, "dn loss: label and noise lengths differ");
  if (dnoise) dnoise->assign(n, 0.0);
  double loss = 0.0;
  for (size_t t = 0; t < n; ++t) {
    const double u = observed[t] - noise[t];
    const double diff = recover_one(observed[t], noise[t]) - observed[t];
    loss += std::abs(diff);
    if (dnoise) {
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      (*dnoise)[t] = -sign * recover_slope(u);
    }
  }
  return loss;
}

double loss_dp(const NoiseModel& model, const PerturbedInstance& item, NoiseGradients* grads,
               Rng* dropout, double weight) {
  check_width(item.perturbed.size(), model.num_types(), "perturbed labels");
  check_width(item.target.size(), model.num_types(), "target labels");
  const auto f = forward(model, item.base.tokens, item.base.mention,
                         positive_types(item.perturbed), dropout, grads != nullptr);
  std::vector<double> dnoise;
  const double loss =
      dp_loss_from_noise(item.perturbed, item.target, f.noise, grads ? &dnoise : nullptr);
  if (!std::isfinite(loss)) fail(ErrorKind::kNumeric, "J_DP is not finite for '" + item.base.id + "'");
  if (grads) backward(model, f, dnoise, weight, *grads);
  return loss;
}

double loss_dn(const NoiseModel& model, const Instance& instance, NoiseGradients* grads,
               Rng* dropout, double weight) {
  check_width(instance.labels.size(), model.num_types(), "labels");
  const auto f = forward(model, instance.tokens, instance.mention,
                         positive_types(instance.labels), dropout, grads != nullptr);
  std::vector<double> dnoise;
  const double loss = dn_loss_from_noise(instance.labels, f.noise, grads ? &dnoise : nullptr);
  if (!std::isfinite(loss)) fail(ErrorKind::kNumeric, "J_DN is not finite for '" + instance.id + "'");
  if (grads) backward(model, f, dnoise, weight, *grads);
  return loss;
}

namespace {

void collect(NoiseModel& model, NoiseGradients& grads, std::vector<Matrix*>& params,
             std::vector<const Matrix*>& gradients) {
  model.encoder.for_each([&](const std::string&, Matrix& m) { params.push_back(&m); });
  grads.encoder.for_each([&](const std::string&, Matrix& m) { gradients.push_back(&m); });
  params.push_back(&model.head_weight);
  params.push_back(&model.head_bias);
  gradients.push_back(&grads.head_weight);
  gradients.push_back(&grads.head_bias);
}

enum : uint64_t { kStreamDpOrder = 11, kStreamDnOrder = 12, kStreamDpDrop = 13, kStreamDnDrop = 14 };

}  // namespace

NoiseTrainResult train_noise_model(NoiseModel model, const PerturbedSource& perturbed,
                                   const Dataset& d_prime, double alpha,
                                   const OptimizerConfig& optimizer) {
  optimizer.validate();
  if (!(alpha >= 0.0)) fail(ErrorKind::kConfig, "alpha must be non-negative");
  if (!d_prime.empty() && d_prime.num_types() != model.num_types()) {
    fail(ErrorKind::kShape, "D' type count does not match the noise model");
  }
  Adam adam(optimizer);
  NoiseGradients grads = NoiseGradients::zeros_for(model);
  std::vector<Matrix*> params;
  std::vector<const Matrix*> gradients;
  collect(model, grads, params, gradients);

  const bool use_dn = alpha > 0.0 && !d_prime.empty();
  std::vector<size_t> dn_order(d_prime.size());
  for (size_t i = 0; i < dn_order.size(); ++i) dn_order[i] = i;
  size_t dn_cursor = 0;
  uint64_t dn_wraps = 0;
  if (use_dn) {
    Rng r(derive_seed(optimizer.seed, {kStreamDnOrder, dn_wraps}));
    r.shuffle(dn_order);
  }

  NoiseTrainResult result;
  const size_t batch = static_cast<size_t>(optimizer.batch_size);
  for (int epoch = 0; epoch < optimizer.epochs; ++epoch) {
    const auto items = perturbed(epoch);
    if (items.empty()) fail(ErrorKind::kConfig, "perturbed training set is empty");
    std::vector<size_t> order(items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng(derive_seed(optimizer.seed, {kStreamDpOrder, static_cast<uint64_t>(epoch)})).shuffle(order);

    double sum_dp = 0.0, sum_dn = 0.0;
    size_t count_dp = 0, count_dn = 0;
    uint64_t step = 0;
    for (size_t start = 0; start < order.size(); start += batch, ++step) {
      grads.set_zero();
      const size_t end = std::min(order.size(), start + batch);
      const double w_dp = 1.0 / static_cast<double>(end - start);
      for (size_t i = start; i < end; ++i) {
        Rng drop(derive_seed(optimizer.seed, {kStreamDpDrop, static_cast<uint64_t>(epoch), step, i}));
        sum_dp += loss_dp(model, items[order[i]], &grads, &drop, w_dp);
        ++count_dp;
      }
      if (use_dn) {
        const size_t n_dn = std::min(batch, d_prime.size());
        const double w_dn = alpha / static_cast<double>(n_dn);
        for (size_t k = 0; k < n_dn; ++k) {
          if (dn_cursor == dn_order.size()) {
            dn_cursor = 0;
            ++dn_wraps;
            Rng(derive_seed(optimizer.seed, {kStreamDnOrder, dn_wraps})).shuffle(dn_order);
          }
          const size_t idx = dn_order[dn_cursor++];
          Rng drop(derive_seed(optimizer.seed, {kStreamDnDrop, static_cast<uint64_t>(epoch), step, k}));
          sum_dn += loss_dn(model, d_prime.instances[idx], &grads, &drop, w_dn);
          ++count_dn;
        }
      }
      bool finite = true;
      for (const Matrix* g : gradients) finite = finite && g->allFinite();
      if (!finite) {
        fail(ErrorKind::kNumeric, "noise model gradient diverged at epoch " +
                                      std::to_string(epoch) + ", step " + std::to_string(step));
      }
      adam.step(params, gradients);
    }
    NoiseLossRecord rec;
    rec.epoch = epoch;
    rec.j_dp = sum_dp / static_cast<double>(count_dp);
    rec.j_dn = count_dn ? sum_dn / static_cast<double>(count_dn) : 0.0;
    rec.j_total = rec.j_dp + alpha * rec.j_dn;
    result.trace.push_back(rec);
  }
  result.model = std::move(model);
  return result;
}

NoiseTrainResult train_noise_model(NoiseModel model,
                                   const std::vector<PerturbedInstance>& perturbed,
                                   const Dataset& d_prime, double alpha,
                                   const OptimizerConfig& optimizer) {
  return train_noise_model(
      std::move(model), [&](int) { return perturbed; }, d_prime, alpha, optimizer);
}

Dataset denoise_dataset(const NoiseModel& model, const Dataset& dataset, double threshold) {
  Dataset out;
  out.vocabulary = dataset.vocabulary;
  out.kind = DatasetKind::kDenoised;
  out.instances.reserve(dataset.size());
  for (const auto& inst : dataset.instances) {
    check_width(inst.labels.size(), model.num_types(), "labels");
    const auto noise = estimate_noise(model, inst.tokens, inst.mention, positive_types(inst.labels));
    const auto recovered = recover(inst.labels, noise);
    Instance copy = inst;
    for (size_t t = 0; t < recovered.size(); ++t) copy.labels[t] = recovered[t] >= threshold ? 1 : 0;
    out.instances.push_back(std::move(copy));
  }
  return out;
}

}  // namespace det
