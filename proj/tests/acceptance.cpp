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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
//
//   det_acceptance <fixtures/acceptance.json> <path to det executable>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "det/config.hpp"
#include "det/error.hpp"
#include "det/noise_model.hpp"
#include "det/perturb.hpp"
#include "det/train_loop.hpp"
#include "det/typing_model.hpp"
#include "support.hpp"

using namespace det;
using namespace det::testing;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report(int id, const char* name, const Verdict& v, double seconds) {
  std::printf("%s criterion %d: %s (%s) [%.1fs]\n", v.pass ? "PASS" : "FAIL", id, name,
              v.detail.c_str(), seconds);
  std::fflush(stdout);
  if (!v.pass) ++g_failures;
}

template <typename F>
void criterion(int id, const char* name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  report(id, name, v,
         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

RunConfig seeded(RunConfig c, uint64_t seed) {
  c.synth.seed = seed;
  c.encoder.seed = seed;
  c.iteration.seed = seed;
  return c;
}

RunData fixture_data(const RunConfig& c) {
  auto corpus = generate_synthetic(c.synth);
  return {corpus.gold, corpus.distant, corpus.dev, corpus.hierarchy};
}

// ---- 1 ----------------------------------------------------------------------

Verdict recover_grid() {
  int checked = 0, wrong = 0;
  for (int y : {0, 1}) {
    for (double e : {-0.99, -0.5, 0.0, 0.5, 0.99}) {
      const double got = recover(LabelVector{static_cast<uint8_t>(y)}, NoiseVector{e})[0];
      const double want = std::max(std::min(static_cast<double>(y) - e, 1.0), 0.0);
      ++checked;
      if (got != want) ++wrong;
    }
  }
  return {wrong == 0, fmt("%d/%d grid points exact", checked - wrong, checked)};
}

// ---- 2 ----------------------------------------------------------------------

Verdict gradients() {
  const auto corpus = generate_synthetic(small_synth(21));
  const auto tokens =
      build_token_vocabulary(*corpus.vocabulary, {&corpus.gold, &corpus.distant});
  EncoderConfig enc = tiny_encoder(tokens.size(), 21);
  enc.embed_dim = 16;
  enc.num_heads = 2;

  auto noise = NoiseModel::initialize(corpus.vocabulary, tokens, enc);
  jiggle(noise.encoder, 22);
  move_off_kinks(noise, 23);
  const auto dp = build_dp(corpus.gold, corpus.distant, 0.7, 24);
  const std::vector<PerturbedInstance> batch(dp.begin(), dp.begin() + 6);
  std::vector<PerturbedInstance> as_dn;
  for (int i = 0; i < 6; ++i) as_dn.push_back({corpus.distant.instances[i], corpus.distant.instances[i].labels, {}, {}});
  const double margin = std::min(kink_margin(noise, batch), kink_margin(noise, as_dn));
  if (margin < 1e-3) return {false, fmt("fixture too close to a kink (margin %.2e)", margin)};

  auto ngrads = NoiseGradients::zeros_for(noise);
  for (const auto& p : batch) loss_dp(noise, p, &ngrads);
  const auto dp_check = check_gradients(noise_refs(noise, ngrads), [&] {
    double s = 0;
    for (const auto& p : batch) s += loss_dp(noise, p);
    return s;
  }, 150, 1);

  ngrads.set_zero();
  for (int i = 0; i < 6; ++i) loss_dn(noise, corpus.distant.instances[i], &ngrads);
  const auto dn_check = check_gradients(noise_refs(noise, ngrads), [&] {
    double s = 0;
    for (int i = 0; i < 6; ++i) s += loss_dn(noise, corpus.distant.instances[i]);
    return s;
  }, 150, 2);

  auto typing = TypingModel::initialize(corpus.vocabulary, tokens, enc);
  jiggle(typing.context_tower, 25);
  jiggle(typing.candidate_tower, 26);
  std::vector<const Instance*> tb;
  for (int i = 0; i < 4; ++i) tb.push_back(&corpus.gold.instances[i]);
  auto tgrads = TypingGradients::zeros_for(typing);
  typing_batch_loss(typing, tb, &tgrads);
  const auto ty_check = check_gradients(
      typing_refs(typing, tgrads), [&] { return typing_batch_loss(typing, tb, nullptr); }, 150, 3);

  bool pass = true;
  std::string detail;
  for (const auto& [name, r] : {std::pair{"J_DP", dp_check}, std::pair{"J_DN", dn_check},
                                std::pair{"J_typing", ty_check}}) {
    const bool ok = r.checked >= 100 && r.max_rel_error < 1e-4;
    pass = pass && ok;
    detail += fmt("%s %d coords max rel %.2e; ", name, r.checked, r.max_rel_error);
    if (!ok) detail += "worst " + r.worst + "; ";
  }
  detail += fmt("kink margin %.3f", margin);
  return {pass, detail};
}

// ---- 3 ----------------------------------------------------------------------

Verdict perturbation(const RunConfig& base) {
  SynthConfig s = base.synth;
  s.num_gold = 2000;
  s.num_distant = 500;
  s.num_dev = 0;
  s.seed = 31;
  const auto corpus = generate_synthetic(s);
  long slots = 0, kept = 0;
  for (const auto& p : perturb_recall(corpus.gold, 0.7, 32)) {
    for (size_t t = 0; t < p.target.size(); ++t) {
      slots += p.target[t];
      kept += p.perturbed[t];
    }
  }
  const double drop = 1.0 - static_cast<double>(kept) / static_cast<double>(slots);
  const auto dp = build_dp(corpus.gold, corpus.distant, 0.7, 33);
  const bool size_ok = dp.size() == 2 * corpus.gold.size();
  return {slots >= 10000 && drop >= 0.68 && drop <= 0.72 && size_ok,
          fmt("%ld positive slots, empirical drop %.4f, |D_P| = %zu for |D_G| = %zu", slots, drop,
              dp.size(), corpus.gold.size())};
}

// ---- 4 ----------------------------------------------------------------------

Verdict identity_at_zero(const RunConfig& fixture) {
  const auto data = fixture_data(seeded(fixture, 1));
  auto model = initial_noise_model(fixture, data);
  model.zero_head();
  long changed = 0, nonzero_dn = 0;
  for (double th : {0.5, 1.0}) {
    const auto out = denoise_dataset(model, data.distant, th);
    for (size_t i = 0; i < out.size(); ++i) {
      if (out.instances[i].labels != data.distant.instances[i].labels) ++changed;
    }
  }
  for (const auto& inst : data.distant.instances) {
    if (loss_dn(model, inst) != 0.0) ++nonzero_dn;
  }
  return {changed == 0 && nonzero_dn == 0,
          fmt("%zu instances at thresholds 0.5 and 1: %ld relabeled, %ld with J_DN != 0",
              data.distant.size(), changed, nonzero_dn)};
}

// ---- 5 ----------------------------------------------------------------------

Verdict efficacy(const RunConfig& fixture) {
  const RunConfig c = seeded(fixture, 1);
  const auto data = fixture_data(c);
  const auto& it = c.iteration;
  auto trained =
      noise_phase(c, data, initial_noise_model(c, data), data.distant, it.alpha_0, 1).model;

  const double raw = macro_prf(labels_of(data.distant), gold_labels_of(data.distant)).f1;
  const auto denoised = denoise_dataset(trained, data.distant, it.denoise_threshold);
  const double rec = macro_prf(labels_of(denoised), gold_labels_of(data.distant)).f1;

  const auto low_recall = perturb_recall(data.dev, it.drop_rate, 501);
  const auto low_precision = perturb_precision(data.dev, data.distant, 502);
  auto identity = trained;
  identity.zero_head();
  const auto t = noise_recovery_f1(trained, data.dev, low_recall, low_precision);
  const auto z = noise_recovery_f1(identity, data.dev, low_recall, low_precision);

  const bool pass = rec - raw >= 0.10 && t.low_recall.f1 > z.low_recall.f1 &&
                    t.low_precision.f1 > z.low_precision.f1;
  return {pass, fmt("DS F1 raw %.4f -> recovered %.4f (gain %.2f points); dev low-recall "
                    "%.4f vs identity %.4f; low-precision %.4f vs identity %.4f; gold %.4f",
                    raw, rec, 100 * (rec - raw), t.low_recall.f1, z.low_recall.f1,
                    t.low_precision.f1, z.low_precision.f1, t.gold.f1)};
}

// ---- 6, 7 -------------------------------------------------------------------

struct SeedRuns {
  uint64_t seed;
  std::vector<double> full_f1;
  std::vector<double> alphas;
  double no_denoise_f1;
};

std::vector<SeedRuns> run_seeds(const RunConfig& fixture, const std::vector<uint64_t>& seeds) {
  std::vector<SeedRuns> out;
  for (uint64_t s : seeds) {
    RunConfig c = seeded(fixture, s);
    const auto data = fixture_data(c);
    SeedRuns r{s, {}, {}, 0.0};
    const auto full = run_iterations(c, data);
    for (const auto& rec : full.iterations) {
      r.full_f1.push_back(rec.metrics.macro_f1);
      r.alphas.push_back(rec.alpha);
    }
    c.ablation = AblationMode::kNoDenoise;
    r.no_denoise_f1 = ablation_run(c, data).final_metrics().macro_f1;
    std::fprintf(stderr, "seed %llu: full F1 by iteration %.4f %.4f %.4f, no_denoise %.4f\n",
                 static_cast<unsigned long long>(s), r.full_f1.front(),
                 r.full_f1.size() > 1 ? r.full_f1[1] : 0.0, r.full_f1.back(), r.no_denoise_f1);
    out.push_back(std::move(r));
  }
  return out;
}

Verdict trend(const std::vector<SeedRuns>& runs) {
  bool pass = true;
  double first = 0, last = 0;
  std::string detail;
  for (const auto& r : runs) {
    if (r.full_f1.size() != 3 || r.alphas != std::vector<double>{0.25, 0.5, 1.0}) pass = false;
    const double d = r.full_f1.back() - r.full_f1.front();
    if (d < -0.005) pass = false;
    first += r.full_f1.front();
    last += r.full_f1.back();
    detail += fmt("seed %llu: %.4f -> %.4f; ", static_cast<unsigned long long>(r.seed),
                  r.full_f1.front(), r.full_f1.back());
  }
  first /= static_cast<double>(runs.size());
  last /= static_cast<double>(runs.size());
  if (!(last > first)) pass = false;
  detail += fmt("mean %.4f -> %.4f; alpha trace 0.25, 0.5, 1.0", first, last);
  return {pass, detail};
}

Verdict ablation(const std::vector<SeedRuns>& runs) {
  bool pass = true;
  double gap = 0;
  std::string detail;
  for (const auto& r : runs) {
    const double g = r.full_f1.back() - r.no_denoise_f1;
    if (!(g > 0)) pass = false;
    gap += g;
    detail += fmt("seed %llu: full %.4f vs no_denoise %.4f; ",
                  static_cast<unsigned long long>(r.seed), r.full_f1.back(), r.no_denoise_f1);
  }
  gap /= static_cast<double>(runs.size());
  if (!(gap > 0.02)) pass = false;
  detail += fmt("mean gap %.2f points", 100 * gap);
  return {pass, detail};
}

// ---- 8, 9 -------------------------------------------------------------------

Verdict tuner_oracle() {
  std::mt19937_64 g(808);
  int same = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_fixture(g);
    const auto got = tune_threshold(f.scores, f.gold, 50);
    const auto want = oracle_tune(f.scores, f.gold, 50);
    if (got.threshold == want.threshold && got.f1 == want.f1) ++same;
  }
  return {same == 100, fmt("%d/100 fixtures identical", same)};
}

Verdict metric_oracles() {
  std::mt19937_64 g(909);
  int prf = 0, rank = 0, cons = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto f = random_fixture(g);
    const auto a = macro_prf(f.pred, f.gold);
    const auto b = oracle_prf(f.pred, f.gold);
    prf += a.precision == b.precision && a.recall == b.recall && a.f1 == b.f1;
    rank += mrr(f.scores, f.gold) == oracle_mrr(f.scores, f.gold);
    const auto c = consistency(f.pred, f.pairs);
    const auto d = oracle_consistency(f.pred, f.pairs);
    cons += c.pair_count == d.pair_count && c.sub_count == d.sub_count && c.accuracy == d.accuracy;
  }
  return {prf == 1000 && rank == 1000 && cons == 1000,
          fmt("exact matches: macro_prf %d/1000, mrr %d/1000, consistency %d/1000", prf, rank,
              cons)};
}

// ---- 10 ---------------------------------------------------------------------

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism(const json& config, const std::string& cli) {
  TempDir dir("acceptance-determinism");
  json c = config;
  c["paths"] = {{"vocab", "data/vocab.txt"}, {"gold", "data/gold.jsonl"},
                {"distant", "data/distant.jsonl"}, {"dev", "data/dev.jsonl"},
                {"hierarchy", "data/hierarchy.tsv"}};
  write_file(dir / "run.json", c.dump(2));
  const std::string cfg = (dir / "run.json").string();
  if (shell(cli + " gen -c " + cfg + " -o " + (dir / "data").string()) != 0) {
    return {false, "det gen failed"};
  }
  for (const char* run : {"a", "b"}) {
    if (shell(cli + " iterate -c " + cfg + " --run-dir " + (dir / run).string()) != 0) {
      return {false, std::string("det iterate failed for run ") + run};
    }
  }
  int compared = 0, differ = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir / "a");
    if (rel == "run.json") continue;
    ++compared;
    if (read_file(entry.path()) != read_file(dir / "b" / rel.string())) ++differ;
  }
  const int iterations = c["iteration"].value("num_iterations", 3);
  const bool complete = compared >= iterations * 8;
  return {differ == 0 && complete,
          fmt("%d artifacts compared (checkpoints, weights, metrics.json, losses, data), %d "
              "differ",
              compared, differ)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s <acceptance.json> <det executable>\n", argv[0]);
    return 2;
  }
  const json suite = json::parse(read_file(argv[1]));
  const RunConfig fixture = run_config_from_json(suite.at("fixture"));
  const auto seeds = suite.at("seeds").get<std::vector<uint64_t>>();

  criterion(1, "recover matches [min(y - e, 1)]_+ on the exhaustive grid", recover_grid);
  criterion(2, "analytic gradients match central differences", gradients);
  criterion(3, "perturbation statistics", [&] { return perturbation(fixture); });
  criterion(4, "zero noise model is the identity", [&] { return identity_at_zero(fixture); });
  criterion(5, "synthetic denoising efficacy", [&] { return efficacy(fixture); });

  std::vector<SeedRuns> runs;
  Verdict failed_runs;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    runs = run_seeds(fixture, seeds);
  } catch (const std::exception& e) {
    failed_runs = {false, std::string("exception: ") + e.what()};
  }
  const double shared =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(6, "iterative trend over seeds",
         runs.empty() ? failed_runs : trend(runs), shared);
  report(7, "full model beats no_denoise", runs.empty() ? failed_runs : ablation(runs), 0.0);

  criterion(8, "threshold tuner equals exhaustive scan", tuner_oracle);
  criterion(9, "metrics equal brute-force references", metric_oracles);
  criterion(10, "iterate is bit-reproducible",
            [&] { return determinism(suite.at("determinism"), argv[2]); });

  std::printf("%d of 10 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
