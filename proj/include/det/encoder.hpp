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

#ifndef DET_ENCODER_HPP_
#define DET_ENCODER_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "det/corpus.hpp"
#include "det/random.hpp"
#include "det/vocabulary.hpp"

namespace det {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct EncoderConfig {
  int vocab_size = 0;
  int embed_dim = 32;
  int num_blocks = 1;
  int num_heads = 1;
  int max_positions = 64;
  double dropout_rate = 0.1;
  uint64_t seed = 0;

  int mlp_dim() const { return 4 * embed_dim; }
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

// Pre-norm transformer block. Weight matrices are (in x out) and act on row
// vectors; biases and norm parameters are 1 x n.
struct BlockParams {
  Matrix ln1_gain, ln1_bias;
  Matrix query, query_bias, key, key_bias, value, value_bias, output, output_bias;
  Matrix ln2_gain, ln2_bias;
  Matrix mlp_in, mlp_in_bias, mlp_out, mlp_out_bias;
};

struct EncoderParams {
  EncoderConfig config;
  Matrix token_embedding;     // vocab_size x d
  Matrix position_embedding;  // max_positions x d
  std::vector<BlockParams> blocks;
  Matrix final_gain, final_bias;

  // N(0, 0.02^2) weights and embeddings, unit norm gains, zero biases.
  static EncoderParams initialize(const EncoderConfig& config);
  // Same shapes, all zero; used as a gradient accumulator.
  EncoderParams zeros_like() const;
  void set_zero();

  // Visits every tensor with its stable name, in a fixed order.
  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  size_t num_parameters() const;
  bool all_finite() const;
};

// Token ids with their position ids; position ids of type-phrase tokens may
// repeat.
struct JointInput {
  std::vector<TokenId> tokens;
  std::vector<int> positions;

  size_t size() const { return tokens.size(); }
  bool operator==(const JointInput&) const = default;
};

// [CLS] w.. [E0] w_p..w_q [/E0] .. w_n [SEP] t_i .. t_j [SEP]. Context tokens
// take positions 0..L-1; every type token and the closing [SEP] take L.
JointInput joint_encode_context_types(
    const TokenVocabulary& tokens, const std::vector<std::string>& words,
    MentionSpan mention, const std::vector<std::vector<std::string>>& type_phrases,
    int max_positions);

// [CLS] w.. [E0] .. [/E0] .. w_n [SEP], sequential positions.
JointInput joint_encode_context(const TokenVocabulary& tokens,
                                const std::vector<std::string>& words,
                                MentionSpan mention, int max_positions);

// [CLS] w_1 .. w_n [SEP], sequential positions.
JointInput joint_encode_phrase(const TokenVocabulary& tokens,
                               const std::vector<std::string>& words,
                               int max_positions);

struct LayerNormCache {
  Matrix normalized;
  Eigen::VectorXd inv_std;
};

struct BlockCache {
  bool cls_only = false;
  Matrix input;
  LayerNormCache ln1;
  Matrix ln1_out;
  Matrix q, k, v;
  std::vector<Matrix> probs;
  Matrix attended;
  Matrix attn_mask;
  Matrix residual;
  LayerNormCache ln2;
  Matrix ln2_out;
  Matrix pre_activation, activation;
  Matrix mlp_mask;
};

// Activations kept by forward for backward.
struct EncoderCache {
  JointInput input;
  Matrix embedding_mask;
  std::vector<BlockCache> blocks;
  LayerNormCache final_ln;
};

// Pooled [CLS] representation (1 x d). With `dropout` null the pass runs in
// eval mode and is a pure function of (params, input). The last block only
// computes the [CLS] row, which is all the pooled output depends on.
RowVector encode(const EncoderParams& params, const JointInput& input,
                 Rng* dropout = nullptr, EncoderCache* cache = nullptr);

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(pooled) and
// returns the gradient with respect to the summed input embeddings (L x d).
Matrix encode_backward(const EncoderParams& params, const EncoderCache& cache,
                       const RowVector& pooled_grad, EncoderParams& grads);

// Collects every token of the given datasets and type phrases, in first-seen
// order after the special tokens.
TokenVocabulary build_token_vocabulary(const TypeVocabulary& types,
                                       const std::vector<const Dataset*>& datasets);

}  // namespace det

#endif  // DET_ENCODER_HPP_
