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

#include "det/error.hpp"
#include "det/eval.hpp"
#include "det/perturb.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace det;
using namespace det::testing;

TEST_SUITE("eval") {
  TEST_CASE("macro PRF examples") {
    const std::vector<LabelVector> pred{{1, 1}, {1, 0}};
    const std::vector<LabelVector> gold{{1, 0}, {1, 1}};
    const auto s = macro_prf(pred, gold);
    CHECK(s.precision == doctest::Approx(0.75));
    CHECK(s.recall == doctest::Approx(0.75));
    CHECK(s.f1 == doctest::Approx(0.75));

    const auto perfect = macro_prf(gold, gold);
    CHECK(perfect.f1 == 1.0);
    const auto none = macro_prf({{0, 0}, {0, 0}}, gold);
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
    CHECK_THROWS_AS(macro_prf({{1, 0}}, gold), Error);
    CHECK_THROWS_AS(macro_prf({{1, 0}, {1}}, gold), Error);
  }

  TEST_CASE("MRR examples") {
    CHECK(mrr({{0.9, 0.1, 0.2}}, {{1, 0, 0}}) == 1.0);
    CHECK(mrr({{0.9, 0.8, 0.7, 0.6}}, {{1, 0, 0, 1}}) == doctest::Approx(0.625));
    CHECK(mrr({{0.5, 0.5, 0.5}}, {{0, 0, 1}}) == doctest::Approx(1.0 / 3.0));
    CHECK(mrr({{0.5, 0.5}, {0.1, 0.9}}, {{0, 0}, {0, 1}}) == 1.0);
  }

  TEST_CASE("threshold tuner examples") {
    std::vector<std::vector<double>> scores;
    std::vector<LabelVector> gold;
    std::mt19937_64 g(2);
    for (int i = 0; i < 10; ++i) {
      auto y = random_labels(g, 6, 0.4);
      y[i % 6] = 1;
      std::vector<double> s(6);
      for (int t = 0; t < 6; ++t) s[t] = y[t] ? 0.9 : 0.1;
      scores.push_back(s);
      gold.push_back(y);
    }
    const auto best = tune_threshold(scores, gold, 50);
    CHECK(best.f1 == 1.0);
    CHECK(best.threshold == doctest::Approx(6.0 / 50.0));
    CHECK(tune_threshold(scores, gold, 2).threshold == 0.5);
    CHECK_THROWS_AS(tune_threshold(scores, gold, 1), Error);
    CHECK(macro_prf(binarize(scores, best.threshold), gold).f1 == best.f1);
  }

  TEST_CASE("PR curve shape") {
    std::mt19937_64 g(4);
    const auto f = random_fixture(g);
    const auto curve = pr_curve(f.scores, f.gold, 50);
    CHECK(curve.size() == 50);
    CHECK(curve.back().threshold == 1.0);
    for (size_t k = 1; k < curve.size(); ++k) CHECK(curve[k].recall <= curve[k - 1].recall);
    const auto best = tune_threshold(f.scores, f.gold, 50);
    for (const auto& p : curve) {
      if (p.threshold != best.threshold) continue;
      const double f1 = p.precision + p.recall > 0
                            ? 2 * p.precision * p.recall / (p.precision + p.recall)
                            : 0.0;
      CHECK(f1 == doctest::Approx(best.f1).epsilon(1e-12));
    }
  }

  TEST_CASE("consistency examples") {
    const HierarchyPairs pairs{{0, 1}};
    const std::vector<LabelVector> pred{{1, 1}, {0, 1}, {1, 1}, {1, 0}};
    const auto c = consistency(pred, pairs);
    CHECK(c.sub_count == 3);
    CHECK(c.pair_count == 2);
    CHECK(c.accuracy == doctest::Approx(2.0 / 3.0));
    const auto none = consistency({{1, 0}}, pairs);
    CHECK(none.sub_count == 0);
    CHECK(none.accuracy == 0.0);
    CHECK(consistency({{1, 1}}, pairs).accuracy == 1.0);
  }

  TEST_CASE("property: metrics equal brute-force oracles") {
    std::mt19937_64 g(11);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto f = random_fixture(g);
      const auto got = macro_prf(f.pred, f.gold);
      const auto want = oracle_prf(f.pred, f.gold);
      CHECK(got.precision == want.precision);
      CHECK(got.recall == want.recall);
      CHECK(got.f1 == want.f1);
      CHECK(mrr(f.scores, f.gold) == oracle_mrr(f.scores, f.gold));
      const auto c = consistency(f.pred, f.pairs);
      const auto w = oracle_consistency(f.pred, f.pairs);
      CHECK(c.pair_count == w.pair_count);
      CHECK(c.sub_count == w.sub_count);
      CHECK(c.accuracy == w.accuracy);
    }
  }

  TEST_CASE("property: tuner equals an exhaustive scan") {
    std::mt19937_64 g(12);
    for (int trial = 0; trial < 100; ++trial) {
      const auto f = random_fixture(g);
      const auto got = tune_threshold(f.scores, f.gold, 50);
      const auto want = oracle_tune(f.scores, f.gold, 50);
      CHECK(got.threshold == want.threshold);
      CHECK(got.f1 == want.f1);
    }
  }

  TEST_CASE("property: MRR depends only on ranks") {
    std::mt19937_64 g(13);
    for (int trial = 0; trial < 200; ++trial) {
      const auto f = random_fixture(g);
      auto warped = f.scores;
      for (auto& s : warped) {
        for (auto& x : s) x = std::exp(3.0 * x) - 7.0;
      }
      CHECK(mrr(warped, f.gold) == doctest::Approx(mrr(f.scores, f.gold)).epsilon(1e-15));
    }
  }

  TEST_CASE("property: a prediction scored against itself is perfect") {
    std::mt19937_64 g(14);
    for (int trial = 0; trial < 200; ++trial) {
      auto f = random_fixture(g);
      f.pred[0][0] = 1;
      CHECK(macro_prf(f.pred, f.pred).f1 == 1.0);
    }
  }

  TEST_CASE("report invariants and JSON round trip") {
    std::mt19937_64 g(15);
    const auto f = random_fixture(g);
    const auto r = evaluate_scores(f.scores, f.gold, f.pairs, 20);
    CHECK(r.pr_curve.size() == 20);
    for (double v : {r.mrr, r.macro_p, r.macro_r, r.macro_f1, r.consistency.accuracy}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (r.macro_p + r.macro_r > 0) {
      CHECK(r.macro_f1 ==
            doctest::Approx(2 * r.macro_p * r.macro_r / (r.macro_p + r.macro_r)).epsilon(1e-12));
    }
    const auto back = metrics_from_json(to_json(r));
    CHECK(back.macro_f1 == r.macro_f1);
    CHECK(back.mrr == r.mrr);
    CHECK(back.threshold_used == r.threshold_used);
    CHECK(back.pr_curve.size() == r.pr_curve.size());
    CHECK(back.consistency.pair_count == r.consistency.pair_count);

    const auto fixed = evaluate_scores(f.scores, f.gold, f.pairs, 20, 0.35);
    CHECK(fixed.threshold_used == 0.35);
    CHECK(fixed.macro_f1 == macro_prf(binarize(f.scores, 0.35), f.gold).f1);
  }

  TEST_CASE("CSV and predictions files") {
    TempDir dir("eval");
    write_pr_curve_csv({{0.5, 0.25, 0.75}}, dir / "pr.csv");
    CHECK(read_file(dir / "pr.csv").rfind("threshold,precision,recall\n", 0) == 0);
    Dataset ds;
    ds.vocabulary = make_vocab({"a", "b"});
    ds.instances.push_back(make_instance("x1", {"w"}, {0, 1}, {1, 0}));
    write_predictions_jsonl(ds, {{0.25, 0.75}}, dir / "p.jsonl");
    const auto line = nlohmann::json::parse(read_file(dir / "p.jsonl"));
    CHECK(line["id"] == "x1");
    CHECK(line["scores"][1] == 0.75);
  }

  TEST_CASE("noise recovery with the zero model") {
    const auto corpus = generate_synthetic(small_synth(3));
    const auto tokens =
        build_token_vocabulary(*corpus.vocabulary, {&corpus.gold, &corpus.distant});
    auto model = NoiseModel::initialize(corpus.vocabulary, tokens, tiny_encoder(0));
    model.zero_head();
    const auto low_recall = perturb_recall(corpus.dev, 0.7, 5);
    const auto low_precision = perturb_precision(corpus.dev, corpus.distant, 6);
    const auto r = noise_recovery_f1(model, corpus.dev, low_recall, low_precision);
    CHECK(r.gold.f1 == 1.0);
    std::vector<LabelVector> corrupted, targets;
    for (const auto& p : low_recall) {
      corrupted.push_back(p.perturbed);
      targets.push_back(p.target);
    }
    CHECK(r.low_recall.f1 == macro_prf(corrupted, targets).f1);
  }
}
