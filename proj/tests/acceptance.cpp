// Copyright 2026  sasv-backend authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sasv/cli.hpp"
#include "sasv/evaluator.hpp"
#include "sasv/gradcheck.hpp"
#include "sasv/sampler.hpp"
#include "sasv/scoring.hpp"
#include "sasv/synth.hpp"
#include "sasv/trainer.hpp"
#include "test_util.hpp"

namespace sasv {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Training recipe shared by criteria 5 and 6.
TrainConfig acceptance_recipe(Pooling pooling) {
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 40;
  cfg.seed = 0;
  cfg.pooling = pooling;
  return cfg;
}

struct Corpus {
  SyntheticData data;
  SpeakerPool pool;
};

const Corpus& default_corpus() {
  static const Corpus corpus = [] {
    Corpus c;
    c.data = generate_synthetic(SynthConfig{});
    c.pool = build_pool(c.data.manifest, c.data.asv, c.data.cm);
    return c;
  }();
  return corpus;
}

EerReport eval_report(const BackendParams& params, Scorer scorer, Pooling pooling) {
  const Corpus& c = default_corpus();
  return evaluate(score_trials(params, c.data.eval_trials, c.data.asv, c.data.cm,
                               scorer, pooling));
}

double pct(const std::optional<EerPoint>& p) { return 100.0 * p->eer; }

Outcome gradient_correctness() {
  const auto start = Clock::now();
  GradcheckConfig cfg;
  cfg.n_seeds = 5;
  const GradcheckReport r = run_gradcheck(cfg);
  const double secs = seconds_since(start);
  return {r.passed && secs < 30.0 && r.groups.size() == 13,
          fmt("13 groups, 5 seeds, worst %s rel err %.2e (< 1e-4), %.2fs (< 30s)",
              r.worst_group.c_str(), r.worst_error, secs)};
}

// Pool of `speakers` speakers with exactly K/2 utterances of each class.
SpeakerPool exact_pool(int speakers, int half) {
  std::vector<UtteranceRecord> records;
  for (int s = 0; s < speakers; ++s) {
    const std::string spk = "S" + std::to_string(s);
    for (int u = 0; u < 2 * half; ++u) {
      records.push_back({spk, spk + "_" + std::to_string(u), u < half,
                         Vector::Ones(2), Vector::Ones(2)});
    }
  }
  return make_pool(std::move(records));
}

bool enumerate_pairs(Index m, Index k, std::size_t* pairs_out,
                     std::size_t* positives_out) {
  const SpeakerPool pool = exact_pool(static_cast<int>(m), static_cast<int>(k / 2));
  Rng rng(0);
  const MiniBatch batch = draw_batch(pool, m, k, rng);
  const auto pairs = expand_pairs(batch, pool);
  // Independent enumeration over (l, m, n) with the label rule.
  bool consistent = pairs.size() == static_cast<std::size_t>(m * k * m);
  std::size_t positives = 0, emitted_positives = 0, idx = 0;
  for (Index l = 0; l < m && consistent; ++l) {
    for (Index t = 0; t < k; ++t) {
      const UtteranceRecord& test = pool.utterances[batch.at(l, t)];
      for (Index n = 0; n < m; ++n) {
        const std::string& enrolled = pool.utterances[batch.at(n, 0)].speaker_id;
        const bool positive = test.bonafide && enrolled == test.speaker_id;
        positives += positive;
        const TrainingPair& pr = pairs[idx++];
        emitted_positives += pr.label == PairLabel::kPositive;
        consistent = consistent && pr.test_slot == l && pr.test_index == t &&
                     pr.enroll_slot == n &&
                     (pr.label == PairLabel::kPositive) == positive;
      }
    }
  }
  *pairs_out = pairs.size();
  *positives_out = emitted_positives;
  return consistent && positives == emitted_positives;
}

Outcome sampler_oracle() {
  std::size_t small_pairs = 0, small_pos = 0, big_pairs = 0, big_pos = 0;
  const bool small_ok = enumerate_pairs(3, 4, &small_pairs, &small_pos);
  const bool big_ok = enumerate_pairs(16, 10, &big_pairs, &big_pos);
  const bool pass = small_ok && big_ok && small_pairs == 36 && small_pos == 6 &&
                    big_pairs == 2560 && big_pos == 80;
  return {pass, fmt("M=3,K=4: %zu pairs / %zu positive (36/6); M=16,K=10: %zu / "
                    "%zu (2560/80); enumeration %s",
                    small_pairs, small_pos, big_pairs, big_pos,
                    small_ok && big_ok ? "agrees" : "disagrees")};
}

Outcome masking_invariance() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(2, 10);
  std::bernoulli_distribution spoofed(0.4);
  int changed = 0, masked_total = 0;
  const ModelDims dims{16, 12, 8};
  for (int t = 0; t < 100; ++t) {
    const BackendParams params = random_params(dims, static_cast<std::uint64_t>(t));
    EnrollmentSet e;
    e.speaker_id = "spk";
    const Index k = size(rng);
    e.embeddings.resize(k, dims.asv);
    e.bonafide.resize(k);
    for (Index r = 0; r < k; ++r) {
      e.embeddings.row(r) = testing::random_vector(dims.asv, rng).transpose();
      e.bonafide(r) = !spoofed(rng);
    }
    e.bonafide(0) = true;
    e.bonafide(k - 1) = false;
    EnrollmentSet altered = e;
    for (Index r = 0; r < k; ++r) {
      if (!e.bonafide(r)) {
        altered.embeddings.row(r) =
            testing::random_vector(dims.asv, rng, 10.0).transpose();
        ++masked_total;
      }
    }
    const Vector q_asv = testing::random_vector(dims.asv, rng);
    const Vector q_cm = testing::random_vector(dims.cm, rng);
    const PairLabel label = t % 2 ? PairLabel::kPositive : PairLabel::kNegative;
    const Vector h0 = pool_enrollments(params, e);
    const Vector h1 = pool_enrollments(params, altered);
    const TrialGradient g0 =
        trial_gradient(params, q_asv, q_cm, e, label, Pooling::kAttention);
    const TrialGradient g1 =
        trial_gradient(params, q_asv, q_cm, altered, label, Pooling::kAttention);
    const bool same = h0 == h1 && g0.prob == g1.prob &&
                      forward(params, q_asv, q_cm, e, Pooling::kAttention).prob ==
                          forward(params, q_asv, q_cm, altered, Pooling::kAttention).prob &&
                      bitwise_equal(g0.grads, g1.grads);
    changed += !same;
  }
  return {changed == 0,
          fmt("100 enrollment sets, %d masked vectors replaced, %d sets changed "
              "h/P/gradients (bitwise comparison)",
              masked_total, changed)};
}

Outcome eer_oracle() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> total(2, 1000);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> shift(-3, 3);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = total(rng);
    const int n_pos = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const double mu = shift(rng);
    const bool ties = t % 4 == 0;
    std::vector<double> pos(static_cast<std::size_t>(n_pos)),
        neg(static_cast<std::size_t>(n - n_pos));
    for (double& s : pos) s = normal(rng) + mu;
    for (double& s : neg) s = normal(rng);
    if (ties) {
      for (double& s : pos) s = std::round(4 * s) / 4;
      for (double& s : neg) s = std::round(4 * s) / 4;
    }
    worst = std::max(worst, std::abs(eer(pos, neg).eer - testing::brute_force_eer(pos, neg)));
  }
  const double perfect = eer(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}).eer;
  const double inverted = eer(std::vector<double>{0.1, 0.2}, std::vector<double>{0.8, 0.9}).eer;
  return {worst < 1e-9 && perfect == 0.0 && inverted == 1.0,
          fmt("200 random sets, max |eer - oracle| = %.1e (< 1e-9); perfect %g, "
              "inverted %g",
              worst, perfect, inverted)};
}

struct TrendRun {
  EerReport asv_only, score_sum, fused;
  double seconds = 0;
};

TrendRun attention_run() {
  const auto start = Clock::now();
  const Corpus& c = default_corpus();
  const TrainResult trained = train(c.pool, acceptance_recipe(Pooling::kAttention));
  TrendRun r;
  r.asv_only = eval_report(trained.params, Scorer::kAsvOnly, Pooling::kAttention);
  r.score_sum = eval_report(trained.params, Scorer::kScoreSum, Pooling::kAttention);
  r.fused = eval_report(trained.params, Scorer::kFused, Pooling::kAttention);
  r.seconds = seconds_since(start);
  return r;
}

Outcome scorer_ordering(const TrendRun& r) {
  const double a_sv = pct(r.asv_only.sv), a_sasv = pct(r.asv_only.sasv);
  const double f_sv = pct(r.fused.sv), f_sasv = pct(r.fused.sasv);
  const double s_sasv = pct(r.score_sum.sasv);
  const bool a_ok = a_sv < 5.0 && a_sasv > 20.0;
  const bool b_ok = f_sasv < 2.0 && std::abs(f_sv - a_sv) <= 1.5;
  const bool c_ok = s_sasv < a_sasv && s_sasv > f_sasv;
  return {a_ok && b_ok && c_ok && r.seconds < 120.0,
          fmt("asv_only SV %.2f%% SASV %.2f%% (%s); fused SV %.2f%% SASV %.2f%% "
              "(%s); score_sum SASV %.2f%% (%s); %.1fs (< 120s)",
              a_sv, a_sasv, a_ok ? "ok" : "fails", f_sv, f_sasv,
              b_ok ? "ok" : "fails", s_sasv, c_ok ? "between" : "not between",
              r.seconds)};
}

Outcome pooling_ablation(const TrendRun& attention) {
  const auto start = Clock::now();
  const TrainResult trained =
      train(default_corpus().pool, acceptance_recipe(Pooling::kAverage));
  const EerReport avg = eval_report(trained.params, Scorer::kFused, Pooling::kAverage);
  const double avg_sasv = pct(avg.sasv), att_sasv = pct(attention.fused.sasv);
  return {avg_sasv < 5.0 && att_sasv <= avg_sasv,
          fmt("average pooling SASV %.2f%% (< 5%%); attention SASV %.2f%% %s "
              "average; %.1fs",
              avg_sasv, att_sasv, att_sasv <= avg_sasv ? "<=" : ">",
              seconds_since(start))};
}

Outcome determinism() {
  testing::TempDir dir;
  const std::string data = (dir / "data").string();
  auto run = [](std::vector<std::string> args) {
    args.insert(args.begin(), "sasv");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  };
  if (run({"synth", "--out", data}) != 0) return {false, "synth failed"};
  for (const char* name : {"run_a", "run_b"}) {
    const int code = run({"train", "--data", data, "--dev-trials",
                          data + "/" + kDevTrialsFile, "--epochs", "3",
                          "--learning-rate", "0.05", "--seed", "17", "--out",
                          (dir / name).string()});
    if (code != 0) return {false, std::string("train exited with ") + std::to_string(code)};
  }
  int files = 0, differing = 0;
  for (const char* f : {"epoch_001.ckpt", "epoch_002.ckpt", "epoch_003.ckpt",
                        "final.ckpt", "train.log"}) {
    ++files;
    const std::string a = testing::slurp(dir / "run_a" / f);
    differing += a.empty() || a != testing::slurp(dir / "run_b" / f);
  }
  return {differing == 0,
          fmt("two 3-epoch train runs, seed 17: %d of %d checkpoint/log files "
              "differ byte-wise",
              differing, files)};
}

Outcome hard_selection() {
  const SpeakerPool pool = random_pool(16, 12, 18, 5, 7);
  Rng rng(7);
  const MiniBatch batch = draw_batch(pool, 16, 10, rng);
  const auto pairs = expand_pairs(batch, pool);
  const BackendParams params = random_params({16, 12, 8}, 7);
  TrainConfig cfg;
  cfg.hidden = 8;
  std::size_t positives = 0;
  for (const auto& p : pairs) positives += p.label == PairLabel::kPositive;

  const BatchResult mined = evaluate_batch(params, pool, batch, pairs, cfg);
  const auto contributing =
      std::count_if(mined.loss_weights.begin(), mined.loss_weights.end(),
                    [](double w) { return w != 0.0; });

  std::vector<std::size_t> all(pairs.size());
  std::iota(all.begin(), all.end(), 0u);
  BatchOptions full_batch;
  full_batch.fixed_selection = &all;
  cfg.hard_negative_top_n = 2480;
  const BatchResult wide = evaluate_batch(params, pool, batch, pairs, cfg);
  const BatchResult full = evaluate_batch(params, pool, batch, pairs, cfg, full_batch);
  const bool same_grads = wide.selected == all && bitwise_equal(wide.grads, full.grads);

  // Short training runs: N = 2480 versus a bound that can never bind.
  const SpeakerPool train_pool = random_pool(16, 12, 18, 5, 8);
  TrainConfig a;
  a.hidden = 8;
  a.epochs = 2;
  a.learning_rate = 0.01;
  a.hard_negative_top_n = 2480;
  TrainConfig b = a;
  b.hard_negative_top_n = 1000000;
  const bool same_training =
      bitwise_equal(train(train_pool, a).params, train(train_pool, b).params);

  return {pairs.size() == 2560 && positives == 80 && contributing == 180 &&
              mined.selected.size() == 180 && same_grads && same_training,
          fmt("%zu pairs (%zu positive), N=100: %ld contribute; N=2480 gradients %s "
              "full batch, training %s",
              pairs.size(), positives, static_cast<long>(contributing),
              same_grads ? "equal" : "differ from",
              same_training ? "identical" : "differs")};
}

int run() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name
              << "): " << o.detail << std::endl;
    failures += !o.pass;
  };
  report(1, "gradient correctness", gradient_correctness());
  report(2, "sampler oracle", sampler_oracle());
  report(3, "masking invariance", masking_invariance());
  report(4, "EER oracle", eer_oracle());
  const TrendRun trend = attention_run();
  report(5, "scorer ordering", scorer_ordering(trend));
  report(6, "pooling ablation", pooling_ablation(trend));
  report(7, "determinism", determinism());
  report(8, "hard selection", hard_selection());
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail")
            << std::endl;
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace sasv

int main() {
  try {
    return sasv::run();
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << "\n";
    return 2;
  }
}
