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

#include "det/config.hpp"
#include "det/error.hpp"
#include "det/train_loop.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace det;
using namespace det::testing;
using nlohmann::json;

namespace {

RunConfig tiny_run(int iterations = 2) {
  RunConfig c;
  c.synth = small_synth(5);
  c.encoder.embed_dim = 8;
  c.encoder.num_heads = 2;
  c.encoder.seed = 5;
  c.iteration.num_iterations = iterations;
  c.iteration.noise_optimizer.epochs = 2;
  c.iteration.noise_optimizer.learning_rate = 1e-3;
  c.iteration.typing_optimizer.epochs = 2;
  c.iteration.typing_optimizer.learning_rate = 1e-3;
  c.iteration.seed = 5;
  return c;
}

RunData tiny_data(const RunConfig& c) {
  auto corpus = generate_synthetic(c.synth);
  return {corpus.gold, corpus.distant, corpus.dev, corpus.hierarchy};
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults validate and the alpha schedule doubles up to the cap") {
    RunConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.iteration.alpha_schedule() == std::vector<double>{0.25, 0.5, 1.0});
    c.iteration.num_iterations = 5;
    CHECK(c.iteration.alpha_schedule() == std::vector<double>{0.25, 0.5, 1.0, 1.0, 1.0});
  }

  TEST_CASE("bad values are config errors") {
    auto expect_config_error = [](RunConfig c) {
      try {
        c.validate();
        FAIL("expected an error");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kConfig);
      }
    };
    RunConfig c;
    c.iteration.num_iterations = 0;
    expect_config_error(c);
    c = RunConfig{};
    c.iteration.alpha_0 = -0.1;
    expect_config_error(c);
    c = RunConfig{};
    c.iteration.drop_rate = 1.5;
    expect_config_error(c);
    c = RunConfig{};
    c.iteration.grid_size = 1;
    expect_config_error(c);
    c = RunConfig{};
    c.eval_threshold = 2.0;
    expect_config_error(c);
  }

  TEST_CASE("JSON round trip") {
    RunConfig c = tiny_run(3);
    c.paths.run_dir = "/tmp/x";
    c.eval_threshold = 0.4;
    c.ablation = AblationMode::kNoDenoise;
    const auto back = run_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.iteration.noise_optimizer.epochs == 2);
    CHECK(back.eval_threshold == 0.4);
    CHECK(back.ablation == AblationMode::kNoDenoise);
  }

  TEST_CASE("unknown keys are rejected") {
    for (const char* text : {R"({"bogus": 1})", R"({"iteration": {"alpha": 1}})",
                             R"({"paths": {"gold": "g", "train": "t"}})"}) {
      CHECK_THROWS_AS(run_config_from_json(json::parse(text)), Error);
    }
  }

  TEST_CASE("relative paths resolve against the config directory") {
    TempDir dir("config");
    write_file(dir / "run.json",
               R"({"paths": {"vocab": "data/vocab.txt", "gold": "/abs/gold.jsonl"},
                   "iteration": {"num_iterations": 2}})");
    const auto c = load_run_config(dir / "run.json");
    CHECK(c.paths.vocab == dir.path() / "data/vocab.txt");
    CHECK(c.paths.gold == "/abs/gold.jsonl");
    CHECK(c.iteration.num_iterations == 2);
    CHECK_THROWS_AS(load_run_config(dir / "missing.json"), Error);
    write_file(dir / "broken.json", "{");
    CHECK_THROWS(load_run_config(dir / "broken.json"));
  }

  TEST_CASE("ablation mode names") {
    for (auto m : {AblationMode::kFull, AblationMode::kNoDenoise,
                   AblationMode::kNoDenoiseNoDistant, AblationMode::kNoCrossAttention}) {
      CHECK(parse_ablation_mode(ablation_mode_name(m)) == m);
    }
    try {
      parse_ablation_mode("no_typing");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kConfig);
      CHECK(std::string(e.what()).find("no_denoise") != std::string::npos);
    }
  }
}

TEST_SUITE("train_loop") {
  TEST_CASE("iterations record the alpha trace and metrics") {
    const auto c = tiny_run(3);
    const auto r = run_iterations(c, tiny_data(c));
    REQUIRE(r.iterations.size() == 3);
    CHECK(r.noise.has_value());
    const double alphas[] = {0.25, 0.5, 1.0};
    for (int k = 0; k < 3; ++k) {
      const auto& rec = r.iterations[k];
      CHECK(rec.iteration == k + 1);
      CHECK(rec.alpha == alphas[k]);
      CHECK(rec.noise_trace.size() == 2);
      CHECK(rec.typing_trace.size() == 2);
      CHECK(rec.d_prime_quality.has_value());
      CHECK(rec.denoised_quality.has_value());
      CHECK(rec.metrics.pr_curve.size() == 50);
      CHECK(rec.metrics.macro_f1 >= 0.0);
      CHECK(rec.metrics.macro_f1 <= 1.0);
    }
  }

  TEST_CASE("a single iteration writes the full artifact set") {
    TempDir dir("loop");
    auto c = tiny_run(1);
    c.paths.run_dir = dir.path();
    const auto r = run_iterations(c, tiny_data(c));
    CHECK(r.iterations.size() == 1);
    CHECK(r.iterations[0].alpha == 0.25);
    for (const char* f : {"run.json", "iter-1/d_prime.jsonl", "iter-1/noise.ckpt",
                          "iter-1/noise.ckpt.bin", "iter-1/typing.ckpt", "iter-1/typing.ckpt.bin",
                          "iter-1/d_denoised.jsonl", "iter-1/metrics.json", "iter-1/losses.csv",
                          "iter-1/typing_losses.csv"}) {
      INFO(f);
      CHECK(std::filesystem::exists(dir / f));
    }
    CHECK(!std::filesystem::exists(dir / "iter-2"));
    const auto m = json::parse(read_file(dir / "iter-1/metrics.json"));
    CHECK(m["iteration"] == 1);
    CHECK(m["alpha"] == 0.25);
    CHECK(m["macro_f1"] == r.iterations[0].metrics.macro_f1);
    CHECK(read_file(dir / "iter-1/losses.csv").rfind("epoch,J_DP,J_DN,J_total\n", 0) == 0);
    const auto back = load_run_config(dir / "run.json");
    CHECK(to_json(back) == to_json(c));
  }

  TEST_CASE("runs are deterministic") {
    const auto c = tiny_run(2);
    const auto data = tiny_data(c);
    const auto a = run_iterations(c, data);
    const auto b = run_iterations(c, data);
    CHECK(a.typing.context_tower.token_embedding == b.typing.context_tower.token_embedding);
    CHECK(a.noise->head_weight == b.noise->head_weight);
    CHECK(a.final_metrics().macro_f1 == b.final_metrics().macro_f1);
  }

  TEST_CASE("typing-only ablations keep the iteration count") {
    auto c = tiny_run(2);
    const auto data = tiny_data(c);
    for (auto mode : {AblationMode::kNoDenoise, AblationMode::kNoDenoiseNoDistant}) {
      c.ablation = mode;
      const auto r = ablation_run(c, data);
      CHECK(r.iterations.size() == 2);
      CHECK(!r.noise.has_value());
      for (const auto& rec : r.iterations) {
        CHECK(rec.alpha == 0.0);
        CHECK(rec.noise_trace.empty());
        CHECK(rec.typing_trace.size() == 2);
      }
    }
  }

  TEST_CASE("no_denoise_no_distant ignores the distant data entirely") {
    auto c = tiny_run(1);
    c.ablation = AblationMode::kNoDenoiseNoDistant;
    TempDir a("nodn-a"), b("nodn-b");
    auto data = tiny_data(c);
    c.paths.run_dir = a.path();
    ablation_run(c, data);
    data.distant.instances.clear();
    c.paths.run_dir = b.path();
    ablation_run(c, data);
    for (const char* f : {"iter-1/typing.ckpt", "iter-1/typing.ckpt.bin", "iter-1/metrics.json"}) {
      INFO(f);
      CHECK(read_file(a / f) == read_file(b / f));
    }
  }

  TEST_CASE("no_cross_attention uses the separate encoding") {
    auto c = tiny_run(1);
    c.ablation = AblationMode::kNoCrossAttention;
    const auto r = ablation_run(c, tiny_data(c));
    REQUIRE(r.noise.has_value());
    CHECK(r.noise->encoding == NoiseEncoding::kSeparateSum);
  }

  TEST_CASE("phase failures name the iteration and phase") {
    auto c = tiny_run(1);
    auto data = tiny_data(c);
    auto& inst = data.distant.instances[0];
    inst.tokens.assign(200, "filler");
    inst.mention = {0, 1};
    try {
      run_iterations(c, data);
      FAIL("expected an error");
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("iteration 1") != std::string::npos);
      CHECK(msg.find("noise-model training") != std::string::npos);
    }
  }

  TEST_CASE("datasets with different vocabularies are rejected") {
    auto c = tiny_run(1);
    auto data = tiny_data(c);
    data.dev.vocabulary = make_vocab({"x"});
    CHECK_THROWS_AS(run_iterations(c, data), Error);
  }

  TEST_CASE("load_run_data reads generated files") {
    TempDir dir("data");
    auto c = tiny_run(1);
    const auto corpus = generate_synthetic(c.synth);
    corpus.vocabulary->save(dir / "vocab.txt");
    save_jsonl(corpus.gold, dir / "gold.jsonl");
    save_jsonl(corpus.distant, dir / "distant.jsonl");
    c.paths.vocab = dir / "vocab.txt";
    c.paths.gold = dir / "gold.jsonl";
    c.paths.distant = dir / "distant.jsonl";
    const auto data = load_run_data(c);
    CHECK(data.gold.size() == corpus.gold.size());
    CHECK(data.distant.size() == corpus.distant.size());
    CHECK(data.dev.empty());
    CHECK(data.pairs.empty());
    RunConfig missing;
    CHECK_THROWS_AS(load_run_data(missing), Error);
  }
}
