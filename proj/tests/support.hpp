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

// Helpers shared by the unit, property and acceptance tests: fixtures,
// brute-force metric oracles and a finite-difference gradient checker.

#ifndef DET_TESTS_SUPPORT_HPP_
#define DET_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "det/corpus.hpp"
#include "det/encoder.hpp"
#include "det/eval.hpp"
#include "det/noise_model.hpp"
#include "det/random.hpp"
#include "det/typing_model.hpp"

namespace det::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("det-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::shared_ptr<const TypeVocabulary> make_vocab(std::vector<std::string> phrases) {
  return std::make_shared<const TypeVocabulary>(std::move(phrases));
}

inline Instance make_instance(const std::string& id, std::vector<std::string> tokens,
                              MentionSpan mention, LabelVector labels) {
  Instance inst;
  inst.id = id;
  inst.tokens = std::move(tokens);
  inst.mention = mention;
  inst.labels = std::move(labels);
  return inst;
}

inline SynthConfig small_synth(uint64_t seed = 1) {
  SynthConfig c;
  c.num_types = 12;
  c.num_gold = 40;
  c.num_distant = 80;
  c.num_dev = 30;
  c.mean_gold_types = 3.0;
  c.mean_ds_types = 1.5;
  c.seed = seed;
  return c;
}

// ---- random fixtures --------------------------------------------------------

inline LabelVector random_labels(std::mt19937_64& g, int t, double p) {
  std::bernoulli_distribution b(p);
  LabelVector v(t);
  for (auto& x : v) x = b(g) ? 1 : 0;
  return v;
}

// Scores on a coarse grid so that ties and exact threshold hits occur.
inline std::vector<double> random_scores(std::mt19937_64& g, int t) {
  std::uniform_int_distribution<int> d(0, 20);
  std::vector<double> s(t);
  for (auto& x : s) x = d(g) / 20.0;
  return s;
}

// Small random score/label/prediction sets (T <= 10, n <= 20).
struct RandomFixture {
  std::vector<std::vector<double>> scores;
  std::vector<LabelVector> gold;
  std::vector<LabelVector> pred;
  HierarchyPairs pairs;
};

inline RandomFixture random_fixture(std::mt19937_64& g) {
  std::uniform_int_distribution<int> tdist(2, 10), ndist(1, 20);
  const int t = tdist(g), n = ndist(g);
  RandomFixture f;
  for (int i = 0; i < n; ++i) {
    f.scores.push_back(random_scores(g, t));
    f.gold.push_back(random_labels(g, t, 0.3));
    f.pred.push_back(random_labels(g, t, 0.4));
  }
  std::set<std::pair<int, int>> seen;
  std::uniform_int_distribution<int> type(0, t - 1);
  for (int k = 0; k < 4; ++k) {
    const int a = type(g), b = type(g);
    if (a != b && seen.insert({a, b}).second) f.pairs.emplace_back(a, b);
  }
  return f;
}

// ---- brute-force oracles ----------------------------------------------------

inline std::set<int> positives(const LabelVector& v) {
  std::set<int> s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (v[i]) s.insert(static_cast<int>(i));
  }
  return s;
}

inline PrfScore oracle_prf(const std::vector<LabelVector>& pred,
                           const std::vector<LabelVector>& gold) {
  double ps = 0, rs = 0;
  long pn = 0, rn = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const auto p = positives(pred[i]);
    const auto g = positives(gold[i]);
    std::vector<int> both;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(both));
    if (!p.empty()) {
      ps += static_cast<double>(both.size()) / static_cast<double>(p.size());
      ++pn;
    }
    if (!g.empty()) {
      rs += static_cast<double>(both.size()) / static_cast<double>(g.size());
      ++rn;
    }
  }
  PrfScore out;
  out.precision = pn ? ps / static_cast<double>(pn) : 0.0;
  out.recall = rn ? rs / static_cast<double>(rn) : 0.0;
  out.f1 = out.precision + out.recall > 0
               ? 2 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

// Rank of t = 1 + number of types that sort ahead of it.
inline double oracle_mrr(const std::vector<std::vector<double>>& scores,
                         const std::vector<LabelVector>& gold) {
  double total = 0;
  long n = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    std::vector<long> ranks;
    for (size_t t = 0; t < s.size(); ++t) {
      if (!gold[i][t]) continue;
      long ahead = 0;
      for (size_t u = 0; u < s.size(); ++u) {
        if (s[u] > s[t] || (s[u] == s[t] && u < t)) ++ahead;
      }
      ranks.push_back(ahead + 1);
    }
    if (ranks.empty()) continue;
    std::sort(ranks.begin(), ranks.end());
    double sum = 0;
    for (long r : ranks) sum += 1.0 / static_cast<double>(r);
    total += sum / static_cast<double>(ranks.size());
    ++n;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

inline ConsistencyScore oracle_consistency(const std::vector<LabelVector>& pred,
                                           const HierarchyPairs& pairs) {
  ConsistencyScore c;
  for (const auto& p : pred) {
    for (const auto& [super, sub] : pairs) {
      if (p[sub]) {
        ++c.sub_count;
        if (p[super]) ++c.pair_count;
      }
    }
  }
  c.accuracy = c.sub_count ? static_cast<double>(c.pair_count) / static_cast<double>(c.sub_count)
                           : 0.0;
  return c;
}

inline ThresholdChoice oracle_tune(const std::vector<std::vector<double>>& scores,
                                   const std::vector<LabelVector>& gold, int grid) {
  ThresholdChoice best{0.0, -1.0};
  for (int k = 1; k < grid; ++k) {
    const double th = static_cast<double>(k) / static_cast<double>(grid);
    std::vector<LabelVector> pred;
    for (const auto& s : scores) {
      LabelVector v(s.size());
      for (size_t t = 0; t < s.size(); ++t) v[t] = s[t] >= th;
      pred.push_back(v);
    }
    const double f1 = oracle_prf(pred, gold).f1;
    if (f1 > best.f1) best = {th, f1};
  }
  return best;
}

// ---- finite differences -----------------------------------------------------

struct GradCheckResult {
  int checked = 0;
  double max_rel_error = 0.0;
  std::string worst;
};

struct ParamRef {
  std::string name;
  Matrix* value;
  const Matrix* grad;
};

// Compares analytic gradients with central differences at `count` random
// coordinates whose analytic gradient is non-negligible, plus up to `count`/5
// coordinates whose analytic gradient is zero (checked in absolute terms).
inline GradCheckResult check_gradients(const std::vector<ParamRef>& params,
                                       const std::function<double()>& loss, int count,
                                       uint64_t seed, double step = 1e-4) {
  struct Coord {
    size_t param;
    Eigen::Index index;
  };
  std::vector<Coord> live, flat;
  for (size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index i = 0; i < params[p].grad->size(); ++i) {
      (std::abs(params[p].grad->data()[i]) > 1e-7 ? live : flat).push_back({p, i});
    }
  }
  std::mt19937_64 g(seed);
  std::shuffle(live.begin(), live.end(), g);
  std::shuffle(flat.begin(), flat.end(), g);
  GradCheckResult out;
  auto probe = [&](const Coord& c) {
    double& x = params[c.param].value->data()[c.index];
    const double saved = x;
    x = saved + step;
    const double up = loss();
    x = saved - step;
    const double down = loss();
    x = saved;
    return (up - down) / (2 * step);
  };
  for (size_t k = 0; k < live.size() && static_cast<int>(k) < count; ++k) {
    const double analytic = params[live[k].param].grad->data()[live[k].index];
    const double numeric = probe(live[k]);
    const double rel =
        std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
    ++out.checked;
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      std::ostringstream s;
      s << params[live[k].param].name << "[" << live[k].index << "] analytic " << analytic
        << " numeric " << numeric;
      out.worst = s.str();
    }
  }
  for (size_t k = 0; k < flat.size() && static_cast<int>(k) < count / 5; ++k) {
    const double numeric = probe(flat[k]);
    if (std::abs(numeric) > 1e-8) {
      out.max_rel_error = std::max(out.max_rel_error, 1.0);
      out.worst = params[flat[k].param].name + " has zero analytic gradient but numeric " +
                  std::to_string(numeric);
    }
  }
  return out;
}

inline void collect_refs(const std::string& prefix, EncoderParams& params,
                         const EncoderParams& grads, std::vector<ParamRef>& out) {
  std::vector<const Matrix*> g;
  grads.for_each([&](const std::string&, const Matrix& m) { g.push_back(&m); });
  size_t i = 0;
  params.for_each(
      [&](const std::string& name, Matrix& m) { out.push_back({prefix + name, &m, g[i++]}); });
}

// Adds N(0, scale^2) to every tensor, leaving the tiny-init regime.
inline void jiggle(EncoderParams& params, uint64_t seed, double scale = 0.3) {
  Rng r(seed);
  params.for_each([&](const std::string&, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += scale * r.normal();
  });
}

// Pushes the noise head away from e = 0 so no (y - e) sits near a kink.
inline void move_off_kinks(NoiseModel& model, uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> mag(0.3, 0.8);
  for (Eigen::Index t = 0; t < model.head_bias.size(); ++t) {
    model.head_bias(0, t) = (g() & 1 ? 1.0 : -1.0) * mag(g);
  }
}

// Smallest distance of any y - e_t to the kinks at 0 and 1 over `items`.
inline double kink_margin(const NoiseModel& model, const std::vector<PerturbedInstance>& items) {
  double margin = 1.0;
  for (const auto& p : items) {
    const auto e = estimate_noise(model, p.base.tokens, p.base.mention, p.perturbed_types());
    for (size_t t = 0; t < e.size(); ++t) {
      const double z = p.perturbed[t] - e[t];
      margin = std::min({margin, std::abs(z), std::abs(z - 1.0)});
    }
  }
  return margin;
}

inline std::vector<ParamRef> noise_refs(NoiseModel& model, NoiseGradients& grads) {
  std::vector<ParamRef> refs;
  collect_refs("enc.", model.encoder, grads.encoder, refs);
  refs.push_back({"noise.W", &model.head_weight, &grads.head_weight});
  refs.push_back({"noise.b", &model.head_bias, &grads.head_bias});
  return refs;
}

inline std::vector<ParamRef> typing_refs(TypingModel& model, TypingGradients& grads) {
  std::vector<ParamRef> refs;
  collect_refs("ctx.", model.context_tower, grads.context_tower, refs);
  collect_refs("cand.", model.candidate_tower, grads.candidate_tower, refs);
  return refs;
}

inline EncoderConfig tiny_encoder(int vocab_size, uint64_t seed = 1) {
  EncoderConfig c;
  c.vocab_size = vocab_size;
  c.embed_dim = 8;
  c.num_blocks = 1;
  c.num_heads = 2;
  c.max_positions = 64;
  c.seed = seed;
  return c;
}

}  // namespace det::testing

#endif  // DET_TESTS_SUPPORT_HPP_
