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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "sasv/model.hpp"
#include "sasv/trainer.hpp"
#include "test_util.hpp"

namespace sasv {
namespace {

constexpr double kSigmoidOne = 0.7310585786;

BackendParams small_params(std::uint64_t seed, Index asv = 6, Index cm = 5,
                           Index hidden = 4) {
  BackendParams p = BackendParams::initialize({asv, cm, hidden}, seed);
  std::mt19937_64 rng(seed + 1000);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (Index i = 0; i < p.bf.size(); ++i) p.bf(i) = u(rng);
  p.b_cm(0, 0) = u(rng);
  return p;
}

EnrollmentSet random_enrollment(Index k, Index d, std::mt19937_64& rng,
                                double spoof_rate = 0.0) {
  EnrollmentSet e;
  e.speaker_id = "spk";
  e.embeddings.resize(k, d);
  e.bonafide.resize(k);
  std::bernoulli_distribution coin(spoof_rate);
  for (Index r = 0; r < k; ++r) {
    e.embeddings.row(r) = testing::random_vector(d, rng).transpose();
    e.bonafide(r) = !coin(rng);
  }
  e.bonafide(static_cast<Index>(rng() % static_cast<std::uint64_t>(k))) = true;
  return e;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

TEST(Initialize, NeutralScalarsAndBoundedProjections) {
  const ModelDims dims{12, 7, 5};
  const BackendParams p = BackendParams::initialize(dims, 3);
  EXPECT_EQ(p.a(0, 0), 1.0);
  EXPECT_EQ(p.b(0, 0), 0.0);
  EXPECT_EQ(p.w1(0, 0), 1.0);
  EXPECT_EQ(p.w2(0, 0), 1.0);
  EXPECT_EQ(p.v(0, 0), -1.0);
  EXPECT_EQ(p.b_cm(0, 0), 0.0);
  EXPECT_TRUE((p.bf.array() == 0).all());
  const double bound_asv = 1.0 / std::sqrt(12.0);
  for (const Matrix* m : {&p.wq, &p.wk, &p.wv, &p.wf}) {
    EXPECT_LE(m->cwiseAbs().maxCoeff(), bound_asv);
    EXPECT_GT(m->cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_LE(p.w_cm.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(7.0));
  EXPECT_LE(p.vf.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(5.0));
  EXPECT_NO_THROW(p.check_shapes());
  EXPECT_EQ(fuse(p, 0.5, 0.5).prob, 0.5);
  EXPECT_TRUE(bitwise_equal(p, BackendParams::initialize(dims, 3)));
  EXPECT_FALSE(bitwise_equal(p, BackendParams::initialize(dims, 4)));
}

TEST(PoolEnrollments, SingleEntryWithZeroWeightsReturnsTheEntry) {
  BackendParams p = BackendParams::zeros({3, 2, 2});
  EnrollmentSet e{"s", Matrix(vec({0.25, -1.5, 4.0}).transpose()), Mask::Constant(1, true)};
  EXPECT_EQ(pool_enrollments(p, e), vec({0.25, -1.5, 4.0}));
}

TEST(PoolEnrollments, IdenticalEntriesPoolLikeOne) {
  std::mt19937_64 rng(8);
  const BackendParams p = small_params(2);
  const Vector x = testing::random_vector(6, rng);
  EnrollmentSet one{"s", Matrix(x.transpose()), Mask::Constant(1, true)};
  EnrollmentSet three{"s", Matrix(x.transpose().replicate(3, 1)), Mask::Constant(3, true)};
  const Vector h1 = pool_enrollments(p, one);
  const Vector h3 = pool_enrollments(p, three);
  for (Index i = 0; i < 6; ++i) EXPECT_NEAR(h1(i), h3(i), 1e-12);
}

TEST(PoolEnrollments, Errors) {
  const BackendParams p = small_params(1);
  EnrollmentSet empty{"s", Matrix(0, 6), Mask(0)};
  EXPECT_THROW(pool_enrollments(p, empty), EmptyEnrollmentError);
  EnrollmentSet spoofed{"s", Matrix::Ones(2, 6), Mask::Constant(2, false)};
  EXPECT_THROW(pool_enrollments(p, spoofed), DegenerateEnrollmentError);
  EXPECT_THROW(average_pool(spoofed), DegenerateEnrollmentError);
  EnrollmentSet ragged{"s", Matrix::Ones(2, 6), Mask::Constant(3, true)};
  EXPECT_THROW(pool_enrollments(p, ragged), ShapeError);
}

TEST(AveragePool, Examples) {
  EnrollmentSet one{"s", Matrix(vec({3, -1}).transpose()), Mask::Constant(1, true)};
  EXPECT_EQ(average_pool(one), vec({3, -1}));

  Matrix two(2, 2);
  two << 1, 0, 0, 1;
  EXPECT_EQ(average_pool({"s", two, Mask::Constant(2, true)}), vec({0.5, 0.5}));

  Matrix four(4, 2);
  four << 2, 4, 99, 99, 4, 8, 6, 0;
  Mask keep(4);
  keep << true, false, true, true;
  EXPECT_EQ(average_pool({"s", four, keep}), vec({4, 4}));
}

TEST(AsvProbability, Examples) {
  BackendParams p = BackendParams::initialize({2, 2, 2}, 0);
  const Vector h = vec({0.6, 0.8});
  AsvResult same = asv_probability(p, h, h);
  EXPECT_NEAR(same.cos, 1.0, 1e-15);
  EXPECT_NEAR(same.prob, kSigmoidOne, 1e-10);

  AsvResult ortho = asv_probability(p, vec({-0.8, 0.6}), h);
  EXPECT_EQ(ortho.cos, 0.0);
  EXPECT_EQ(ortho.prob, 0.5);

  p.a(0, 0) = 2;
  p.b(0, 0) = 1;
  AsvResult opposite = asv_probability(p, -h, h);
  EXPECT_NEAR(opposite.score, -1.0, 1e-15);
  EXPECT_NEAR(opposite.prob, 0.2689414214, 1e-10);

  EXPECT_THROW(asv_probability(p, Vector::Zero(2), h), NormError);
}

TEST(CmProbability, Examples) {
  BackendParams p = BackendParams::zeros({2, 2, 2});
  EXPECT_EQ(cm_probability(p, vec({123, -4})).prob, 0.5);

  p.w_cm << 1, 0;
  const ProbResult r = cm_probability(p, vec({2, 7}));
  EXPECT_EQ(r.score, 2.0);
  EXPECT_NEAR(r.prob, 0.8807970780, 1e-10);

  p.b_cm(0, 0) = 0.3;
  const double before = cm_probability(p, vec({2, 7})).prob;
  p.w_cm = -p.w_cm;
  p.b_cm = -p.b_cm;
  EXPECT_NEAR(cm_probability(p, vec({2, 7})).prob, 1.0 - before, 1e-15);

  EXPECT_THROW(cm_probability(p, vec({1, 2, 3})), ShapeError);
}

TEST(Fuse, Examples) {
  BackendParams p = BackendParams::zeros({2, 2, 2});
  p.w1(0, 0) = 1;
  p.w2(0, 0) = 1;
  ProbResult r = fuse(p, 0.5, 0.5);
  EXPECT_EQ(r.score, 1.0);
  EXPECT_NEAR(r.prob, kSigmoidOne, 1e-10);

  p.w1(0, 0) = 0;
  p.w2(0, 0) = 0;
  EXPECT_EQ(fuse(p, 0.9, 0.1).prob, 0.5);
  EXPECT_EQ(fuse(p, 0.01, 0.99).prob, 0.5);

  p.w1(0, 0) = 4;
  p.v(0, 0) = -2;
  r = fuse(p, 0.5, 0.77);
  EXPECT_EQ(r.score, 0.0);
  EXPECT_EQ(r.prob, 0.5);
}

TEST(Forward, EqualsComposedComponentsBitwise) {
  std::mt19937_64 rng(4);
  const BackendParams p = small_params(5);
  for (Pooling pooling : {Pooling::kAttention, Pooling::kAverage}) {
    const EnrollmentSet e = random_enrollment(5, 6, rng, 0.3);
    const Vector q = testing::random_vector(6, rng);
    const Vector c = testing::random_vector(5, rng);
    const ForwardResult f = forward(p, q, c, e, pooling);
    const Vector h = pool(p, e, pooling);
    const AsvResult asv = asv_probability(p, q, h);
    const ProbResult cm = cm_probability(p, c);
    const ProbResult fused = fuse(p, cm.prob, asv.prob);
    EXPECT_EQ(f.cos, asv.cos);
    EXPECT_EQ(f.score_asv, asv.score);
    EXPECT_EQ(f.prob_asv, asv.prob);
    EXPECT_EQ(f.score_cm, cm.score);
    EXPECT_EQ(f.prob_cm, cm.prob);
    EXPECT_EQ(f.score, fused.score);
    EXPECT_EQ(f.prob, fused.prob);
  }
}

TEST(Forward, TapeAndValuePathsAgree) {
  std::mt19937_64 rng(12);
  const BackendParams p = small_params(6);
  for (Pooling pooling : {Pooling::kAttention, Pooling::kAverage}) {
    const EnrollmentSet e = random_enrollment(6, 6, rng, 0.4);
    const Vector q = testing::random_vector(6, rng);
    const Vector c = testing::random_vector(5, rng);
    const double prob = forward(p, q, c, e, pooling).prob;
    const TrialGradient g = trial_gradient(p, q, c, e, PairLabel::kPositive, pooling);
    EXPECT_NEAR(g.prob, prob, 1e-14);
    EXPECT_NEAR(g.loss, -std::log(prob), 1e-13);
  }
}

TEST(Forward, RangesHold) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 50; ++t) {
    const BackendParams p = small_params(static_cast<std::uint64_t>(t));
    const EnrollmentSet e = random_enrollment(1 + t % 7, 6, rng, 0.3);
    const ForwardResult f = forward(p, testing::random_vector(6, rng),
                                    testing::random_vector(5, rng, 3.0), e,
                                    Pooling::kAttention);
    EXPECT_GE(f.cos, -1.0);
    EXPECT_LE(f.cos, 1.0);
    for (double prob : {f.prob, f.prob_asv, f.prob_cm}) {
      EXPECT_GT(prob, 0.0);
      EXPECT_LT(prob, 1.0);
    }
  }
}

TEST(MaskedContent, NeverChangesRepresentativeProbabilityOrGradients) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 40; ++t) {
    const BackendParams p = small_params(static_cast<std::uint64_t>(t) + 50);
    EnrollmentSet e = random_enrollment(2 + t % 6, 6, rng, 0.5);
    const Vector q = testing::random_vector(6, rng);
    const Vector c = testing::random_vector(5, rng);
    const PairLabel label = t % 2 ? PairLabel::kPositive : PairLabel::kNegative;
    EnrollmentSet altered = e;
    for (Index r = 0; r < e.size(); ++r) {
      if (!e.bonafide(r)) {
        altered.embeddings.row(r) = testing::random_vector(6, rng, 5.0).transpose();
      }
    }
    for (Pooling pooling : {Pooling::kAttention, Pooling::kAverage}) {
      EXPECT_EQ(pool(p, e, pooling), pool(p, altered, pooling));
      EXPECT_EQ(forward(p, q, c, e, pooling).prob,
                forward(p, q, c, altered, pooling).prob);
      const TrialGradient g0 = trial_gradient(p, q, c, e, label, pooling);
      const TrialGradient g1 = trial_gradient(p, q, c, altered, label, pooling);
      EXPECT_TRUE(bitwise_equal(g0.grads, g1.grads));
    }
  }
}

TEST(Permutation, LeavesRepresentativeUnchanged) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 30; ++t) {
    const BackendParams p = small_params(static_cast<std::uint64_t>(t));
    const EnrollmentSet e = random_enrollment(2 + t % 8, 6, rng, 0.3);
    std::vector<Index> order(static_cast<std::size_t>(e.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    EnrollmentSet permuted = e;
    for (std::size_t i = 0; i < order.size(); ++i) {
      permuted.embeddings.row(static_cast<Index>(i)) = e.embeddings.row(order[i]);
      permuted.bonafide(static_cast<Index>(i)) = e.bonafide(order[i]);
    }
    for (Pooling pooling : {Pooling::kAttention, Pooling::kAverage}) {
      const Vector h0 = pool(p, e, pooling);
      const Vector h1 = pool(p, permuted, pooling);
      for (Index i = 0; i < h0.size(); ++i) EXPECT_NEAR(h0(i), h1(i), 1e-12);
    }
  }
}

TEST(Fuse, StrictlyIncreasingInBothProbabilities) {
  BackendParams p = BackendParams::zeros({2, 2, 2});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> pos(0.1, 3.0), prob(0.01, 0.98);
  for (int t = 0; t < 200; ++t) {
    p.w1(0, 0) = pos(rng);
    p.w2(0, 0) = pos(rng);
    p.v(0, 0) = -pos(rng);
    const double cm = prob(rng), asv = prob(rng);
    const double base = fuse(p, cm, asv).prob;
    EXPECT_LT(base, fuse(p, cm + 0.01, asv).prob);
    EXPECT_LT(base, fuse(p, cm, asv + 0.01).prob);
  }
}

TEST(Checkpoint, RoundTripIsBitwise) {
  testing::TempDir dir;
  std::mt19937_64 rng(3);
  BackendParams p = small_params(9, 7, 3, 5);
  p.a(0, 0) = 0.1 + 1e-17;
  p.w2(0, 0) = 1.0 / 3.0;
  save_checkpoint(p, dir / "p.ckpt");
  const BackendParams back = load_checkpoint(dir / "p.ckpt");
  EXPECT_TRUE(bitwise_equal(p, back));
  EXPECT_EQ(back.dims, p.dims);
  const EnrollmentSet e = random_enrollment(4, 7, rng, 0.3);
  const Vector q = testing::random_vector(7, rng);
  const Vector c = testing::random_vector(3, rng);
  for (Pooling pooling : {Pooling::kAttention, Pooling::kAverage}) {
    EXPECT_EQ(forward(p, q, c, e, pooling).prob, forward(back, q, c, e, pooling).prob);
  }
}

TEST(Checkpoint, RejectsDamagedFiles) {
  testing::TempDir dir;
  const BackendParams p = small_params(1);
  save_checkpoint(p, dir / "good.ckpt");
  const std::string bytes = testing::slurp(dir / "good.ckpt");
  EXPECT_EQ(bytes.substr(0, 8), "SASVBKND");

  testing::spit(dir / "magic.ckpt", "NOTACKPT" + bytes.substr(8));
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), CheckpointError);

  testing::spit(dir / "short.ckpt", bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), CheckpointError);

  std::string version = bytes;
  version[8] = 9;
  testing::spit(dir / "version.ckpt", version);
  EXPECT_THROW(load_checkpoint(dir / "version.ckpt"), CheckpointError);

  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST(ParsePooling, KnownNamesOnly) {
  EXPECT_EQ(parse_pooling("attention"), Pooling::kAttention);
  EXPECT_EQ(parse_pooling("average"), Pooling::kAverage);
  EXPECT_THROW(parse_pooling("max"), ConfigError);
}

}  // namespace
}  // namespace sasv
