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

#include "det/encoder.hpp"

#include <cctype>
#include <cmath>

#include "det/error.hpp"

namespace det {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

std::string lowercase(const std::string& word) {
  std::string out = word;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Matrix gaussian(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = kInitStd * rng.normal();
  }
  return m;
}

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                  LayerNormCache& cache) {
  const auto d = static_cast<double>(x.cols());
  const Eigen::VectorXd mean = x.rowwise().sum() / d;
  Matrix centered = x.colwise() - mean;
  const Eigen::VectorXd var = centered.array().square().rowwise().sum() / d;
  cache.inv_std = (var.array() + kLayerNormEps).rsqrt();
  cache.normalized = centered.array().colwise() * cache.inv_std.array();
  Matrix y = cache.normalized.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& gain,
                           const LayerNormCache& cache, Matrix& dgain, Matrix& dbias) {
  const auto d = static_cast<double>(dy.cols());
  dgain.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const Eigen::VectorXd mean_dxhat = dxhat.rowwise().sum() / d;
  const Eigen::VectorXd mean_dxhat_xhat =
      (dxhat.array() * cache.normalized.array()).rowwise().sum() / d;
  Matrix dx = dxhat;
  dx.colwise() -= mean_dxhat;
  dx.array() -= cache.normalized.array().colwise() * mean_dxhat_xhat.array();
  dx.array().colwise() *= cache.inv_std.array();
  return dx;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

// Inverted dropout mask, entries 0 or 1/(1-p).
Matrix dropout_mask(int rows, int cols, double rate, Rng& rng) {
  Matrix m(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = rng.bernoulli(rate) ? 0.0 : keep_scale;
  }
  return m;
}

void add_bias(Matrix& x, const Matrix& bias) { x.rowwise() += bias.row(0); }

Matrix block_forward(const BlockParams& p, const EncoderConfig& cfg, const Matrix& x,
                     bool cls_only, Rng* dropout, BlockCache& c) {
  const int rows = cls_only ? 1 : static_cast<int>(x.rows());
  const int heads = cfg.num_heads;
  const int dh = cfg.embed_dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool drop = dropout != nullptr && cfg.dropout_rate > 0.0;

  c.cls_only = cls_only;
  c.ln1_out = layer_norm(x, p.ln1_gain, p.ln1_bias, c.ln1);
  c.q = c.ln1_out.topRows(rows) * p.query;
  add_bias(c.q, p.query_bias);
  c.k = c.ln1_out * p.key;
  add_bias(c.k, p.key_bias);
  c.v = c.ln1_out * p.value;
  add_bias(c.v, p.value_bias);

  c.probs.resize(heads);
  c.attended.resize(rows, cfg.embed_dim);
  for (int h = 0; h < heads; ++h) {
    Matrix scores = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose();
    scores *= scale;
    const Eigen::VectorXd row_max = scores.rowwise().maxCoeff();
    scores.colwise() -= row_max;
    scores = scores.array().exp();
    const Eigen::VectorXd row_sum = scores.rowwise().sum();
    scores.array().colwise() /= row_sum.array();
    c.attended.middleCols(h * dh, dh) = scores * c.v.middleCols(h * dh, dh);
    c.probs[h] = std::move(scores);
  }

  Matrix z = c.attended * p.output;
  add_bias(z, p.output_bias);
  if (drop) {
    c.attn_mask = dropout_mask(rows, cfg.embed_dim, cfg.dropout_rate, *dropout);
    z.array() *= c.attn_mask.array();
  } else {
    c.attn_mask.resize(0, 0);
  }
  c.residual = x.topRows(rows) + z;

  c.ln2_out = layer_norm(c.residual, p.ln2_gain, p.ln2_bias, c.ln2);
  c.pre_activation = c.ln2_out * p.mlp_in;
  add_bias(c.pre_activation, p.mlp_in_bias);
  c.activation = c.pre_activation.unaryExpr(&gelu);
  Matrix m = c.activation * p.mlp_out;
  add_bias(m, p.mlp_out_bias);
  if (drop) {
    c.mlp_mask = dropout_mask(rows, cfg.embed_dim, cfg.dropout_rate, *dropout);
    m.array() *= c.mlp_mask.array();
  } else {
    c.mlp_mask.resize(0, 0);
  }
  return c.residual + m;
}

Matrix block_backward(const BlockParams& p, const EncoderConfig& cfg, const BlockCache& c,
                      const Matrix& dout, BlockParams& g) {
  const int rows = static_cast<int>(c.q.rows());
  const int len = static_cast<int>(c.k.rows());
  const int heads = cfg.num_heads;
  const int dh = cfg.embed_dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dresidual = dout;
  Matrix dm = dout;
  if (c.mlp_mask.size() > 0) dm.array() *= c.mlp_mask.array();
  g.mlp_out.noalias() += c.activation.transpose() * dm;
  g.mlp_out_bias.row(0) += dm.colwise().sum();
  Matrix dpre = dm * p.mlp_out.transpose();
  dpre.array() *= c.pre_activation.unaryExpr(&gelu_grad).array();
  g.mlp_in.noalias() += c.ln2_out.transpose() * dpre;
  g.mlp_in_bias.row(0) += dpre.colwise().sum();
  const Matrix dln2 = dpre * p.mlp_in.transpose();
  dresidual += layer_norm_backward(dln2, p.ln2_gain, c.ln2, g.ln2_gain, g.ln2_bias);

  Matrix dz = dresidual;
  if (c.attn_mask.size() > 0) dz.array() *= c.attn_mask.array();
  g.output.noalias() += c.attended.transpose() * dz;
  g.output_bias.row(0) += dz.colwise().sum();
  const Matrix dattended = dz * p.output.transpose();

  Matrix dq(rows, cfg.embed_dim), dk(len, cfg.embed_dim), dv(len, cfg.embed_dim);
  for (int h = 0; h < heads; ++h) {
    const Matrix& probs = c.probs[h];
    const auto da_h = dattended.middleCols(h * dh, dh);
    Matrix dprobs = da_h * c.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh) = probs.transpose() * da_h;
    const Eigen::VectorXd dot = (dprobs.array() * probs.array()).rowwise().sum();
    dprobs.colwise() -= dot;
    Matrix dscores = (probs.array() * dprobs.array()).matrix() * scale;
    dq.middleCols(h * dh, dh) = dscores * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh) = dscores.transpose() * c.q.middleCols(h * dh, dh);
  }

  const auto a_rows = c.ln1_out.topRows(rows);
  g.query.noalias() += a_rows.transpose() * dq;
  g.query_bias.row(0) += dq.colwise().sum();
  g.key.noalias() += c.ln1_out.transpose() * dk;
  g.key_bias.row(0) += dk.colwise().sum();
  g.value.noalias() += c.ln1_out.transpose() * dv;
  g.value_bias.row(0) += dv.colwise().sum();

  Matrix dln1 = dk * p.key.transpose();
  dln1.noalias() += dv * p.value.transpose();
  dln1.topRows(rows).noalias() += dq * p.query.transpose();
  Matrix dx = layer_norm_backward(dln1, p.ln1_gain, c.ln1, g.ln1_gain, g.ln1_bias);
  dx.topRows(rows) += dresidual;
  return dx;
}

JointInput start_context(const TokenVocabulary& tokens, const std::vector<std::string>& words,
                         MentionSpan mention) {
  const int n = static_cast<int>(words.size());
  if (!(0 <= mention.begin && mention.begin < mention.end && mention.end <= n)) {
    fail(ErrorKind::kShape, "mention span [" + std::to_string(mention.begin) + ", " +
                                std::to_string(mention.end) + ") is invalid for " +
                                std::to_string(n) + " tokens");
  }
  JointInput in;
  in.tokens.reserve(words.size() + 4);
  in.tokens.push_back(TokenVocabulary::kClsId);
  for (int i = 0; i < n; ++i) {
    if (i == mention.begin) in.tokens.push_back(TokenVocabulary::kMentionOpenId);
    in.tokens.push_back(tokens.id_of(lowercase(words[i])));
    if (i + 1 == mention.end) in.tokens.push_back(TokenVocabulary::kMentionCloseId);
  }
  in.tokens.push_back(TokenVocabulary::kSepId);
  in.positions.resize(in.tokens.size());
  for (size_t i = 0; i < in.positions.size(); ++i) in.positions[i] = static_cast<int>(i);
  return in;
}

void check_positions(const JointInput& in, int max_positions) {
  for (int p : in.positions) {
    if (p >= max_positions) {
      fail(ErrorKind::kShape, "joint sequence needs position " + std::to_string(p) +
                                  " but max_positions is " +
                                  std::to_string(max_positions));
    }
  }
}

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size <= 6) fail(ErrorKind::kConfig, "encoder vocab_size must exceed the special tokens");
  if (embed_dim <= 0 || num_blocks <= 0 || num_heads <= 0 || max_positions <= 0) {
    fail(ErrorKind::kConfig, "encoder dimensions must be positive");
  }
  if (embed_dim % num_heads != 0) {
    fail(ErrorKind::kConfig, "embed_dim must be divisible by num_heads");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    fail(ErrorKind::kConfig, "dropout_rate must lie in [0, 1)");
  }
}

EncoderParams EncoderParams::initialize(const EncoderConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, {0x454e43}));
  const int d = config.embed_dim;
  const int f = config.mlp_dim();
  EncoderParams p;
  p.config = config;
  p.token_embedding = gaussian(config.vocab_size, d, rng);
  p.position_embedding = gaussian(config.max_positions, d, rng);
  p.blocks.resize(config.num_blocks);
  for (auto& b : p.blocks) {
    b.ln1_gain = Matrix::Ones(1, d);
    b.ln1_bias = Matrix::Zero(1, d);
    b.query = gaussian(d, d, rng);
    b.query_bias = Matrix::Zero(1, d);
    b.key = gaussian(d, d, rng);
    b.key_bias = Matrix::Zero(1, d);
    b.value = gaussian(d, d, rng);
    b.value_bias = Matrix::Zero(1, d);
    b.output = gaussian(d, d, rng);
    b.output_bias = Matrix::Zero(1, d);
    b.ln2_gain = Matrix::Ones(1, d);
    b.ln2_bias = Matrix::Zero(1, d);
    b.mlp_in = gaussian(d, f, rng);
    b.mlp_in_bias = Matrix::Zero(1, f);
    b.mlp_out = gaussian(f, d, rng);
    b.mlp_out_bias = Matrix::Zero(1, d);
  }
  p.final_gain = Matrix::Ones(1, d);
  p.final_bias = Matrix::Zero(1, d);
  return p;
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z = *this;
  z.set_zero();
  return z;
}

void EncoderParams::set_zero() {
  for_each([](const std::string&, Matrix& m) { m.setZero(); });
}

void EncoderParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
  fn("token_embedding", token_embedding);
  fn("position_embedding", position_embedding);
  for (size_t i = 0; i < blocks.size(); ++i) {
    const std::string pre = "block" + std::to_string(i) + ".";
    auto& b = blocks[i];
    fn(pre + "ln1.gain", b.ln1_gain);
    fn(pre + "ln1.bias", b.ln1_bias);
    fn(pre + "attn.query", b.query);
    fn(pre + "attn.query_bias", b.query_bias);
    fn(pre + "attn.key", b.key);
    fn(pre + "attn.key_bias", b.key_bias);
    fn(pre + "attn.value", b.value);
    fn(pre + "attn.value_bias", b.value_bias);
    fn(pre + "attn.output", b.output);
    fn(pre + "attn.output_bias", b.output_bias);
    fn(pre + "ln2.gain", b.ln2_gain);
    fn(pre + "ln2.bias", b.ln2_bias);
    fn(pre + "mlp.in", b.mlp_in);
    fn(pre + "mlp.in_bias", b.mlp_in_bias);
    fn(pre + "mlp.out", b.mlp_out);
    fn(pre + "mlp.out_bias", b.mlp_out_bias);
  }
  fn("final_ln.gain", final_gain);
  fn("final_ln.bias", final_bias);
}

void EncoderParams::for_each(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
  const_cast<EncoderParams*>(this)->for_each(
      [&](const std::string& name, Matrix& m) { fn(name, m); });
}

size_t EncoderParams::num_parameters() const {
  size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += static_cast<size_t>(m.size()); });
  return n;
}

bool EncoderParams::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

JointInput joint_encode_context_types(
    const TokenVocabulary& tokens, const std::vector<std::string>& words,
    MentionSpan mention, const std::vector<std::vector<std::string>>& type_phrases,
    int max_positions) {
  JointInput in = start_context(tokens, words, mention);
  const int type_position = static_cast<int>(in.tokens.size());
  for (const auto& phrase : type_phrases) {
    for (const auto& w : phrase) {
      in.tokens.push_back(tokens.id_of(lowercase(w)));
      in.positions.push_back(type_position);
    }
  }
  in.tokens.push_back(TokenVocabulary::kSepId);
  in.positions.push_back(type_position);
  check_positions(in, max_positions);
  return in;
}

JointInput joint_encode_context(const TokenVocabulary& tokens,
                                const std::vector<std::string>& words,
                                MentionSpan mention, int max_positions) {
  JointInput in = start_context(tokens, words, mention);
  check_positions(in, max_positions);
  return in;
}

JointInput joint_encode_phrase(const TokenVocabulary& tokens,
                               const std::vector<std::string>& words,
                               int max_positions) {
  JointInput in;
  in.tokens.push_back(TokenVocabulary::kClsId);
  for (const auto& w : words) in.tokens.push_back(tokens.id_of(lowercase(w)));
  in.tokens.push_back(TokenVocabulary::kSepId);
  in.positions.resize(in.tokens.size());
  for (size_t i = 0; i < in.positions.size(); ++i) in.positions[i] = static_cast<int>(i);
  check_positions(in, max_positions);
  return in;
}

RowVector encode(const EncoderParams& params, const JointInput& input, Rng* dropout,
                 EncoderCache* cache) {
  const auto& cfg = params.config;
  const int len = static_cast<int>(input.size());
  if (len == 0 || input.positions.size() != input.tokens.size()) {
    fail(ErrorKind::kShape, "joint input must be non-empty with one position per token");
  }
  if (input.tokens[0] != TokenVocabulary::kClsId) {
    fail(ErrorKind::kShape, "joint input must begin with [CLS]");
  }
  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  c.input = input;

  Matrix x(len, cfg.embed_dim);
  for (int i = 0; i < len; ++i) {
    const TokenId tok = input.tokens[i];
    const int pos = input.positions[i];
    if (tok < 0 || tok >= cfg.vocab_size) fail(ErrorKind::kShape, "token id out of range");
    if (pos < 0 || pos >= cfg.max_positions) {
      fail(ErrorKind::kShape, "position id " + std::to_string(pos) + " out of range");
    }
    x.row(i) = params.token_embedding.row(tok) + params.position_embedding.row(pos);
  }
  if (dropout != nullptr && cfg.dropout_rate > 0.0) {
    c.embedding_mask = dropout_mask(len, cfg.embed_dim, cfg.dropout_rate, *dropout);
    x.array() *= c.embedding_mask.array();
  } else {
    c.embedding_mask.resize(0, 0);
  }

  c.blocks.resize(params.blocks.size());
  for (size_t b = 0; b < params.blocks.size(); ++b) {
    const bool last = b + 1 == params.blocks.size();
    x = block_forward(params.blocks[b], cfg, x, last, dropout, c.blocks[b]);
  }
  Matrix y = layer_norm(x, params.final_gain, params.final_bias, c.final_ln);
  RowVector pooled = y.row(0);
  if (!pooled.allFinite()) fail(ErrorKind::kNumeric, "encoder produced a non-finite value");
  return pooled;
}

Matrix encode_backward(const EncoderParams& params, const EncoderCache& cache,
                       const RowVector& pooled_grad, EncoderParams& grads) {
  const auto& cfg = params.config;
  if (pooled_grad.size() != cfg.embed_dim || cache.blocks.size() != params.blocks.size()) {
    fail(ErrorKind::kShape, "encoder backward called with mismatched shapes");
  }
  Matrix dy = pooled_grad;
  Matrix dx = layer_norm_backward(dy, params.final_gain, cache.final_ln, grads.final_gain,
                                  grads.final_bias);
  for (size_t b = params.blocks.size(); b-- > 0;) {
    dx = block_backward(params.blocks[b], cfg, cache.blocks[b], dx, grads.blocks[b]);
  }
  if (cache.embedding_mask.size() > 0) dx.array() *= cache.embedding_mask.array();
  for (int i = 0; i < dx.rows(); ++i) {
    grads.token_embedding.row(cache.input.tokens[i]) += dx.row(i);
    grads.position_embedding.row(cache.input.positions[i]) += dx.row(i);
  }
  return dx;
}

TokenVocabulary build_token_vocabulary(const TypeVocabulary& types,
                                       const std::vector<const Dataset*>& datasets) {
  TokenVocabulary vocab;
  for (TypeId t = 0; t < types.size(); ++t) {
    for (const auto& w : types.phrase_tokens(t)) vocab.add(lowercase(w));
  }
  for (const Dataset* ds : datasets) {
    if (ds == nullptr) continue;
    for (const auto& inst : ds->instances) {
      for (const auto& w : inst.tokens) vocab.add(lowercase(w));
    }
  }
  return vocab;
}

}  // namespace det
