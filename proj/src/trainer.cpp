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

#include "sasv/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "sasv/error.hpp"
#include "sasv/text.hpp"

namespace sasv {

std::string_view to_string(HardSelection mode) {
  return mode == HardSelection::kNegativesOnly ? "negatives_only"
                                               : "all_trials";
}

HardSelection parse_hard_selection(std::string_view text) {
  if (text == "negatives_only") return HardSelection::kNegativesOnly;
  if (text == "all_trials") return HardSelection::kAllTrials;
  throw ConfigError("unknown hard selection '" + std::string(text) +
                    "' (expected negatives_only or all_trials)");
}

void TrainConfig::validate() const {
  auto positive = [](double x, const char* name) {
    if (!(x > 0) || !std::isfinite(x)) {
      throw ConfigError(std::string(name) + " must be positive");
    }
  };
  positive(learning_rate, "learning_rate");
  positive(lr_decay_per_epoch, "lr_decay_per_epoch");
  if (!(momentum >= 0 && momentum < 1)) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0) || !std::isfinite(weight_decay)) {
    throw ConfigError("weight_decay must be non-negative");
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (hard_negative_top_n < 1) {
    throw ConfigError("hard_negative_top_n must be >= 1");
  }
  if (m < 2) throw ConfigError("M must be >= 2");
  if (k < 2 || k % 2 != 0) throw ConfigError("K must be even and >= 2");
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
}

OptimizerState OptimizerState::start(const ModelDims& dims,
                                     const TrainConfig& cfg) {
  OptimizerState s;
  s.velocity = BackendParams::zeros(dims);
  s.lr = cfg.learning_rate;
  return s;
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  return cfg.learning_rate * std::pow(cfg.lr_decay_per_epoch, epoch);
}

double bce_loss(double p, PairLabel label) {
  const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return label == PairLabel::kPositive ? -std::log(q) : -std::log1p(-q);
}

std::vector<std::size_t> select_hard(std::span<const double> losses,
                                     std::span<const PairLabel> labels,
                                     std::size_t top_n, HardSelection mode) {
  if (losses.size() != labels.size()) {
    throw ShapeError("select_hard: " + std::to_string(losses.size()) +
                     " losses for " + std::to_string(labels.size()) +
                     " labels");
  }
  std::vector<std::size_t> selected;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (mode == HardSelection::kNegativesOnly &&
        labels[i] == PairLabel::kPositive) {
      selected.push_back(i);
    } else {
      candidates.push_back(i);
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&losses](std::size_t x, std::size_t y) {
                     return losses[x] > losses[y];
                   });
  if (candidates.size() > top_n) candidates.resize(top_n);
  selected.insert(selected.end(), candidates.begin(), candidates.end());
  std::sort(selected.begin(), selected.end());
  return selected;
}

namespace {

std::array<Matrix*, 13> tensors(BackendParams& p) {
  return {&p.wq, &p.wk,   &p.wv,   &p.wf, &p.bf, &p.vf, &p.a,
          &p.b,  &p.w_cm, &p.b_cm, &p.w1, &p.w2, &p.v};
}

std::array<const Matrix*, 13> tensors(const BackendParams& p) {
  return {&p.wq, &p.wk,   &p.wv,   &p.wf, &p.bf, &p.vf, &p.a,
          &p.b,  &p.w_cm, &p.b_cm, &p.w1, &p.w2, &p.v};
}

std::array<const Var*, 13> tensors(const ParamVars& p) {
  return {&p.wq, &p.wk,   &p.wv,   &p.wf, &p.bf, &p.vf, &p.a,
          &p.b,  &p.w_cm, &p.b_cm, &p.w1, &p.w2, &p.v};
}

constexpr std::array<const char*, 13> kNames = {
    "Wq", "Wk", "Wv", "Wf", "bf", "vf", "a", "b", "w_cm", "b_cm", "w1", "w2",
    "v"};

}  // namespace

BatchResult evaluate_batch(const BackendParams& params, const SpeakerPool& pool,
                           const MiniBatch& batch,
                           std::span<const TrainingPair> pairs,
                           const TrainConfig& cfg,
                           const BatchOptions& options) {
  const Index k = batch.k;
  const Index n_utt = batch.m * k;
  const Index d_asv = params.dims.asv;
  if (pool.asv_dim() != d_asv || pool.cm_dim() != params.dims.cm) {
    throw ShapeError("evaluate_batch: pool embedding dimensions (" +
                     std::to_string(pool.asv_dim()) + ", " +
                     std::to_string(pool.cm_dim()) +
                     ") do not match the model");
  }

  Matrix raw(n_utt, d_asv), zeroed(n_utt, d_asv), cm(n_utt, params.dims.cm);
  Mask bona(n_utt);
  for (Index i = 0; i < n_utt; ++i) {
    const UtteranceRecord& u = pool.utterances[batch.utterances[i]];
    raw.row(i) = u.asv.transpose();
    cm.row(i) = u.cm.transpose();
    bona(i) = u.bonafide;
    if (u.bonafide) {
      zeroed.row(i) = raw.row(i);
    } else {
      zeroed.row(i).setZero();
    }
  }

  GradTape tape;
  const ParamVars p = bind(tape, params, options.gradients);

  // Row n*k + j holds the representative of slot n without position j.
  Var reps;
  if (cfg.pooling == Pooling::kAttention) {
    const AttentionInputs projected = project(p, tape.constant(zeroed));
    std::vector<Var> parts;
    parts.reserve(static_cast<std::size_t>(n_utt));
    std::vector<Index> rows(static_cast<std::size_t>(k - 1));
    Mask keep(k - 1);
    for (Index n = 0; n < batch.m; ++n) {
      for (Index j = 0; j < k; ++j) {
        Index r = 0;
        for (Index jj = 0; jj < k; ++jj) {
          if (jj == j) continue;
          rows[static_cast<std::size_t>(r)] = n * k + jj;
          keep(r) = bona(n * k + jj);
          ++r;
        }
        parts.push_back(attend(p, projected, rows, keep));
      }
    }
    reps = stack_rows(parts);
  } else {
    Matrix avg(n_utt, d_asv);
    for (Index n = 0; n < batch.m; ++n) {
      for (Index j = 0; j < k; ++j) {
        Vector total = Vector::Zero(d_asv);
        Index count = 0;
        for (Index jj = 0; jj < k; ++jj) {
          if (jj == j || !bona(n * k + jj)) continue;
          total += zeroed.row(n * k + jj).transpose();
          ++count;
        }
        if (count == 0) {
          throw DegenerateEnrollmentError(
              "evaluate_batch: enrollment without a bona fide entry");
        }
        avg.row(n * k + j) = (total / static_cast<double>(count)).transpose();
      }
    }
    reps = tape.constant(std::move(avg));
  }

  std::vector<Index> test_rows, rep_rows;
  test_rows.reserve(pairs.size());
  rep_rows.reserve(pairs.size());
  Mask positive(static_cast<Index>(pairs.size()));
  std::vector<PairLabel> labels;
  labels.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const TrainingPair& pr = pairs[i];
    test_rows.push_back(pr.test_slot * k + pr.test_index);
    rep_rows.push_back(pr.enroll_slot * k + pr.test_index);
    positive(static_cast<Index>(i)) = pr.label == PairLabel::kPositive;
    labels.push_back(pr.label);
  }

  const HeadVars asv = asv_head(p, gather_rows(tape.constant(raw), test_rows),
                                gather_rows(reps, rep_rows));
  const HeadVars cmh = cm_head(p, tape.constant(std::move(cm)));
  const HeadVars fused = fuse_head(p, gather_rows(cmh.prob, test_rows), asv.prob);
  Var losses = binary_cross_entropy(fused.prob, positive);

  BatchResult result;
  const Matrix& lv = losses.value();
  result.pair_losses.assign(lv.data(), lv.data() + lv.size());
  const Matrix& pv = fused.prob.value();
  result.pair_probs.assign(pv.data(), pv.data() + pv.size());
  result.selected =
      options.fixed_selection
          ? *options.fixed_selection
          : select_hard(result.pair_losses, labels, cfg.hard_negative_top_n,
                        cfg.hard_selection);
  std::vector<Index> chosen(result.selected.begin(), result.selected.end());
  Var loss = mean(gather_rows(losses, chosen));
  result.loss = loss.scalar();

  if (options.gradients) {
    tape.backward(loss);
    result.grads = BackendParams::zeros(params.dims);
    const auto vars = tensors(p);
    const auto outs = tensors(result.grads);
    for (std::size_t t = 0; t < vars.size(); ++t) {
      *outs[t] = tape.grad(*vars[t]);
    }
    const Matrix w = tape.grad(losses);
    result.loss_weights.assign(w.data(), w.data() + w.size());
  }
  return result;
}

TrialGradient trial_gradient(const BackendParams& params,
                             const Eigen::Ref<const Vector>& q_asv,
                             const Eigen::Ref<const Vector>& q_cm,
                             const EnrollmentSet& enroll, PairLabel label,
                             Pooling pooling) {
  validate(enroll);
  GradTape tape;
  const ParamVars p = bind(tape, params, true);
  Var h;
  if (pooling == Pooling::kAttention) {
    Matrix zeroed = enroll.embeddings;
    for (Index r = 0; r < zeroed.rows(); ++r) {
      if (!enroll.bonafide(r)) zeroed.row(r).setZero();
    }
    std::vector<Index> rows(static_cast<std::size_t>(enroll.size()));
    std::iota(rows.begin(), rows.end(), Index{0});
    h = attend(p, project(p, tape.constant(std::move(zeroed))), rows,
               enroll.bonafide);
  } else {
    h = tape.constant(average_pool(enroll).transpose());
  }
  const HeadVars asv = asv_head(p, tape.constant(q_asv.transpose()), h);
  const HeadVars cmh = cm_head(p, tape.constant(q_cm.transpose()));
  const HeadVars fused = fuse_head(p, cmh.prob, asv.prob);
  Mask positive(1);
  positive(0) = label == PairLabel::kPositive;
  Var loss = sum(binary_cross_entropy(fused.prob, positive));
  tape.backward(loss);

  TrialGradient out;
  out.loss = loss.scalar();
  out.prob = fused.prob.scalar();
  out.grads = BackendParams::zeros(params.dims);
  const auto vars = tensors(p);
  const auto outs = tensors(out.grads);
  for (std::size_t t = 0; t < vars.size(); ++t) *outs[t] = tape.grad(*vars[t]);
  return out;
}

void sgd_step(BackendParams& params, const BackendParams& grads,
              OptimizerState& state, const TrainConfig& cfg) {
  auto theta = tensors(params);
  const auto g = tensors(grads);
  auto vel = tensors(state.velocity);
  for (std::size_t t = 0; t < theta.size(); ++t) {
    if (g[t]->rows() != theta[t]->rows() || g[t]->cols() != theta[t]->cols()) {
      throw ShapeError(std::string("sgd_step: gradient of ") + kNames[t] +
                       " has shape " + shape_string(*g[t]) + ", expected " +
                       shape_string(*theta[t]));
    }
    if (!all_finite(*g[t])) {
      throw NonFiniteError(std::string("non-finite gradient for ") +
                           kNames[t] + " at epoch " +
                           std::to_string(state.epoch + 1) + ", batch " +
                           std::to_string(state.batch + 1));
    }
  }
  for (std::size_t t = 0; t < theta.size(); ++t) {
    Matrix& v = *vel[t];
    v = cfg.momentum * v + (*g[t] + cfg.weight_decay * *theta[t]);
    *theta[t] -= state.lr * v;
  }
}

std::string format_log_line(const EpochLog& log) {
  std::string line = std::to_string(log.epoch) + '\t' + format_double(log.lr) +
                     '\t' + format_double(log.mean_loss);
  if (log.dev) {
    auto put = [&line](const std::optional<EerPoint>& p) {
      line += '\t';
      line += p ? format_double(p->eer) : "absent";
    };
    put(log.dev->sv);
    put(log.dev->spf);
    put(log.dev->sasv);
  }
  return line;
}

TrainResult train(const SpeakerPool& pool, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  const ModelDims dims{pool.asv_dim(), pool.cm_dim(), cfg.hidden};
  TrainResult result;
  result.params = BackendParams::initialize(dims, cfg.seed);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  OptimizerState state = OptimizerState::start(dims, cfg);
  const std::size_t n_batches = batches_per_epoch(pool, cfg.m, cfg.k);

  for (int e = 0; e < cfg.epochs; ++e) {
    state.epoch = e;
    state.lr = learning_rate_at(cfg, e);
    double total = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      state.batch = b;
      const MiniBatch batch = draw_batch(pool, cfg.m, cfg.k, rng);
      const std::vector<TrainingPair> pairs = expand_pairs(batch, pool);
      const BatchResult r = evaluate_batch(result.params, pool, batch, pairs, cfg);
      if (!std::isfinite(r.loss)) {
        throw NonFiniteError("non-finite loss at epoch " +
                             std::to_string(e + 1) + ", batch " +
                             std::to_string(b + 1));
      }
      sgd_step(result.params, r.grads, state, cfg);
      total += r.loss;
    }
    EpochLog log;
    log.epoch = e + 1;
    log.lr = state.lr;
    log.mean_loss = total / static_cast<double>(n_batches);
    if (hooks.dev_eval) log.dev = hooks.dev_eval(result.params);
    state.epoch = e + 1;
    state.lr = learning_rate_at(cfg, e + 1);
    result.log.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log, result.params);
  }
  return result;
}

}  // namespace sasv
