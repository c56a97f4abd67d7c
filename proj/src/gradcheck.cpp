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

#include "sasv/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "sasv/trainer.hpp"

namespace sasv {

SpeakerPool random_pool(Index asv_dim, Index cm_dim, Index speakers,
                        Index per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto draw = [&](Index d) {
    Vector v(d);
    for (Index i = 0; i < d; ++i) v(i) = normal(rng);
    return v;
  };
  std::vector<UtteranceRecord> records;
  for (Index s = 0; s < speakers; ++s) {
    const std::string spk = "g" + std::to_string(s);
    const Vector centroid = draw(asv_dim);
    for (Index u = 0; u < 2 * per_class; ++u) {
      const bool bona = u < per_class;
      records.push_back({spk, spk + "_" + std::to_string(u), bona,
                         centroid + 0.5 * draw(asv_dim), draw(cm_dim)});
    }
  }
  return make_pool(std::move(records));
}

BackendParams random_params(const ModelDims& dims, std::uint64_t seed) {
  BackendParams p = BackendParams::initialize(dims, seed);
  std::mt19937_64 rng(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  for (Index i = 0; i < p.bf.size(); ++i) p.bf(i) = jitter(rng);
  p.a(0, 0) = 1.0 + jitter(rng);
  p.b(0, 0) = jitter(rng);
  p.b_cm(0, 0) = jitter(rng);
  p.w1(0, 0) = 1.0 + jitter(rng);
  p.w2(0, 0) = 1.0 + jitter(rng);
  p.v(0, 0) = -1.0 + jitter(rng);
  return p;
}

namespace {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
Mat<Scalar> lift(const Matrix& m) {
  return m.template cast<Scalar>();
}

template <typename Scalar>
Scalar logistic(Scalar x) {
  using std::exp;
  return x >= 0 ? Scalar(1) / (Scalar(1) + exp(-x))
                : exp(x) / (Scalar(1) + exp(x));
}

// Softmax over the entries with keep(i) set; the others get weight 0.
template <typename Scalar>
Mat<Scalar> kept_softmax(const Mat<Scalar>& logits, const Mask& keep) {
  using std::exp;
  Mat<Scalar> out = Mat<Scalar>::Zero(logits.rows(), logits.cols());
  Scalar top = -std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < logits.size(); ++i) {
    if (keep(i)) top = std::max(top, logits.data()[i]);
  }
  Scalar total = 0;
  for (Index i = 0; i < logits.size(); ++i) {
    if (!keep(i)) continue;
    out.data()[i] = exp(logits.data()[i] - top);
    total += out.data()[i];
  }
  return out / total;
}

}  // namespace

template <typename Scalar>
Scalar reference_batch_loss(const BackendParams& params,
                            const SpeakerPool& pool, const MiniBatch& batch,
                            const std::vector<TrainingPair>& pairs,
                            const std::vector<std::size_t>& selected,
                            Pooling pooling) {
  using std::log;
  using std::sqrt;
  const Mat<Scalar> wq = lift<Scalar>(params.wq), wk = lift<Scalar>(params.wk),
                    wv = lift<Scalar>(params.wv), wf = lift<Scalar>(params.wf),
                    bf = lift<Scalar>(params.bf), vf = lift<Scalar>(params.vf),
                    w_cm = lift<Scalar>(params.w_cm);
  const Scalar a = params.a(0, 0), b = params.b(0, 0), b_cm = params.b_cm(0, 0),
               w1 = params.w1(0, 0), w2 = params.w2(0, 0), v = params.v(0, 0);
  const Index d = params.dims.asv;

  // Representative of slot n with position j left out.
  auto representative = [&](Index n, Index j) {
    Mat<Scalar> e(batch.k - 1, d);
    Mask keep(batch.k - 1);
    Index r = 0;
    for (Index jj = 0; jj < batch.k; ++jj) {
      if (jj == j) continue;
      const UtteranceRecord& u = pool.utterances[batch.at(n, jj)];
      keep(r) = u.bonafide;
      if (u.bonafide) {
        e.row(r) = u.asv.transpose().template cast<Scalar>();
      } else {
        e.row(r).setZero();
      }
      ++r;
    }
    Mat<Scalar> h = Mat<Scalar>::Zero(1, d);
    if (pooling == Pooling::kAverage) {
      Scalar count = 0;
      for (Index i = 0; i < e.rows(); ++i) {
        if (!keep(i)) continue;
        h += e.row(i);
        count += 1;
      }
      return Mat<Scalar>(h / count);
    }
    const Mat<Scalar> q = e * wq, k = e * wk, val = e * wv;
    const Scalar scale = Scalar(1) / sqrt(Scalar(d));
    Mat<Scalar> o(e.rows(), d);
    for (Index i = 0; i < e.rows(); ++i) {
      if (!keep(i)) {
        o.row(i).setZero();
        continue;
      }
      const Mat<Scalar> logits = scale * q.row(i) * k.transpose();
      o.row(i) = kept_softmax<Scalar>(logits, keep) * val + e.row(i);
    }
    Mat<Scalar> scores(e.rows(), 1);
    for (Index i = 0; i < e.rows(); ++i) {
      Mat<Scalar> hidden = o.row(i) * wf.transpose() + bf.transpose();
      for (Index c = 0; c < hidden.size(); ++c) {
        using std::tanh;
        hidden.data()[c] = tanh(hidden.data()[c]);
      }
      scores(i, 0) = (hidden * vf)(0, 0);
    }
    const Mat<Scalar> alpha = kept_softmax<Scalar>(scores, keep);
    return Mat<Scalar>(alpha.transpose() * o);
  };

  std::vector<Mat<Scalar>> reps;
  for (Index n = 0; n < batch.m; ++n) {
    for (Index j = 0; j < batch.k; ++j) reps.push_back(representative(n, j));
  }

  Scalar total = 0;
  for (std::size_t idx : selected) {
    const TrainingPair& pr = pairs[idx];
    const UtteranceRecord& test =
        pool.utterances[batch.at(pr.test_slot, pr.test_index)];
    const Mat<Scalar> q = test.asv.transpose().template cast<Scalar>();
    const Mat<Scalar>& h =
        reps[static_cast<std::size_t>(pr.enroll_slot * batch.k + pr.test_index)];
    const Scalar cos = (q.cwiseProduct(h)).sum() / (q.norm() * h.norm());
    const Scalar p_asv = logistic(a * cos + b);
    const Mat<Scalar> cm = test.cm.transpose().template cast<Scalar>();
    const Scalar p_cm = logistic((cm * w_cm)(0, 0) + b_cm);
    Scalar p = logistic(w1 * p_cm + w2 * p_asv + v);
    p = std::clamp(p, Scalar(1e-12), Scalar(1) - Scalar(1e-12));
    total += pr.label == PairLabel::kPositive ? -log(p) : -log(Scalar(1) - p);
  }
  return total / Scalar(selected.size());
}

template double reference_batch_loss<double>(
    const BackendParams&, const SpeakerPool&, const MiniBatch&,
    const std::vector<TrainingPair>&, const std::vector<std::size_t>&, Pooling);
template long double reference_batch_loss<long double>(
    const BackendParams&, const SpeakerPool&, const MiniBatch&,
    const std::vector<TrainingPair>&, const std::vector<std::size_t>&, Pooling);

GradcheckReport run_gradcheck(const GradcheckConfig& config) {
  const ModelDims dims{config.asv_dim, config.cm_dim, config.hidden};
  TrainConfig tc;
  tc.m = config.m;
  tc.k = config.k;
  tc.hidden = config.hidden;
  tc.pooling = config.pooling;

  GradcheckReport report;
  BackendParams::zeros(dims).for_each([&](std::string_view name, const Matrix&) {
    report.groups.push_back({std::string(name), 0.0, 0.0});
  });

  for (int s = 0; s < config.n_seeds; ++s) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(s);
    const SpeakerPool pool = random_pool(config.asv_dim, config.cm_dim,
                                         config.m + 1, config.k / 2 + 1, seed);
    Rng rng(seed);
    const MiniBatch batch = draw_batch(pool, config.m, config.k, rng);
    const std::vector<TrainingPair> pairs = expand_pairs(batch, pool);
    BackendParams params = random_params(dims, seed);
    const BatchResult base = evaluate_batch(params, pool, batch, pairs, tc);

    auto loss_at = [&]() {
      return reference_batch_loss<long double>(params, pool, batch, pairs,
                                               base.selected, config.pooling);
    };

    std::vector<const Matrix*> analytic;
    base.grads.for_each(
        [&](std::string_view, const Matrix& g) { analytic.push_back(&g); });
    std::size_t group = 0;
    params.for_each([&](std::string_view, Matrix& theta) {
      GroupError& out = report.groups[group];
      const Matrix& g = *analytic[group];
      for (Index i = 0; i < theta.size(); ++i) {
        const double saved = theta.data()[i];
        const double hi = saved + config.step;
        const double lo = saved - config.step;
        theta.data()[i] = hi;
        const long double up = loss_at();
        theta.data()[i] = lo;
        const long double down = loss_at();
        theta.data()[i] = saved;
        const double fd = static_cast<double>((up - down) / (hi - lo));
        const double err =
            std::abs(g.data()[i] - fd) / (std::abs(g.data()[i]) + 1e-8);
        out.max_relative_error = std::max(out.max_relative_error, err);
        out.max_abs_gradient =
            std::max(out.max_abs_gradient, std::abs(g.data()[i]));
      }
      ++group;
    });
  }

  for (const GroupError& g : report.groups) {
    if (g.max_relative_error >= report.worst_error) {
      report.worst_error = g.max_relative_error;
      report.worst_group = g.name;
    }
  }
  report.passed = report.worst_error < config.tolerance;
  return report;
}

std::string format_gradcheck(const GradcheckReport& report) {
  std::ostringstream out;
  char buf[96];
  for (const GroupError& g : report.groups) {
    std::snprintf(buf, sizeof(buf), "%-5s max_rel_err=%.3e max_abs_grad=%.3e\n",
                  g.name.c_str(), g.max_relative_error, g.max_abs_gradient);
    out << buf;
  }
  out << (report.passed ? "PASS" : "FAIL") << " worst=" << report.worst_group;
  std::snprintf(buf, sizeof(buf), " (%.3e)\n", report.worst_error);
  out << buf;
  return out.str();
}

}  // namespace sasv
