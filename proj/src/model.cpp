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

#include "sasv/model.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <vector>

namespace sasv {

void validate(const EnrollmentSet& enroll) {
  if (enroll.size() == 0) {
    throw EmptyEnrollmentError("enrollment set for speaker '" +
                               enroll.speaker_id + "' is empty");
  }
  if (enroll.bonafide.size() != enroll.size()) {
    throw ShapeError("enrollment set for speaker '" + enroll.speaker_id +
                     "': " + std::to_string(enroll.size()) +
                     " embeddings but mask of length " +
                     std::to_string(enroll.bonafide.size()));
  }
  if (!enroll.bonafide.any()) {
    throw DegenerateEnrollmentError("enrollment set for speaker '" +
                                    enroll.speaker_id +
                                    "' has no bona fide entry");
  }
}

std::string_view to_string(Pooling pooling) {
  return pooling == Pooling::kAttention ? "attention" : "average";
}

Pooling parse_pooling(std::string_view text) {
  if (text == "attention") return Pooling::kAttention;
  if (text == "average") return Pooling::kAverage;
  throw ConfigError("unknown pooling '" + std::string(text) +
              "' (expected attention or average)");
}

BackendParams BackendParams::zeros(const ModelDims& dims) {
  BackendParams p;
  p.dims = dims;
  p.wq = Matrix::Zero(dims.asv, dims.asv);
  p.wk = Matrix::Zero(dims.asv, dims.asv);
  p.wv = Matrix::Zero(dims.asv, dims.asv);
  p.wf = Matrix::Zero(dims.hidden, dims.asv);
  p.bf = Matrix::Zero(dims.hidden, 1);
  p.vf = Matrix::Zero(dims.hidden, 1);
  p.a = Matrix::Zero(1, 1);
  p.b = Matrix::Zero(1, 1);
  p.w_cm = Matrix::Zero(dims.cm, 1);
  p.b_cm = Matrix::Zero(1, 1);
  p.w1 = Matrix::Zero(1, 1);
  p.w2 = Matrix::Zero(1, 1);
  p.v = Matrix::Zero(1, 1);
  return p;
}

BackendParams BackendParams::initialize(const ModelDims& dims,
                                        std::uint64_t seed) {
  if (dims.asv <= 0 || dims.cm <= 0 || dims.hidden <= 0) {
    throw ShapeError("model dimensions must be positive");
  }
  BackendParams p = zeros(dims);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Matrix& m, Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  };
  fill(p.wq, dims.asv);
  fill(p.wk, dims.asv);
  fill(p.wv, dims.asv);
  fill(p.wf, dims.asv);
  fill(p.vf, dims.hidden);
  fill(p.w_cm, dims.cm);
  p.a(0, 0) = 1.0;
  p.b(0, 0) = 0.0;
  p.w1(0, 0) = 1.0;
  p.w2(0, 0) = 1.0;
  p.v(0, 0) = -1.0;
  return p;
}

void BackendParams::check_shapes() const {
  const BackendParams ref = zeros(dims);
  std::vector<std::pair<Index, Index>> expected;
  ref.for_each([&](std::string_view, const Matrix& m) {
    expected.emplace_back(m.rows(), m.cols());
  });
  std::size_t i = 0;
  for_each([&](std::string_view name, const Matrix& m) {
    const auto [r, c] = expected[i++];
    if (m.rows() != r || m.cols() != c) {
      throw ShapeError("parameter " + std::string(name) + " has shape " +
                       shape_string(m) + ", expected " + shape_string(r, c));
    }
  });
}

bool bitwise_equal(const BackendParams& x, const BackendParams& y) {
  if (!(x.dims == y.dims)) return false;
  std::vector<const Matrix*> xs, ys;
  x.for_each([&](std::string_view, const Matrix& m) { xs.push_back(&m); });
  y.for_each([&](std::string_view, const Matrix& m) { ys.push_back(&m); });
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Matrix& a = *xs[i];
    const Matrix& b = *ys[i];
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) != 0) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

ParamVars bind(GradTape& tape, const BackendParams& params, bool track,
               BindScope scope) {
  auto put = [&](const char* name, const Matrix& m) {
    return track ? tape.parameter(name, m) : tape.constant(m);
  };
  ParamVars p;
  if (scope == BindScope::kAll) {
    p.wq = put("Wq", params.wq);
    p.wk = put("Wk", params.wk);
    p.wv = put("Wv", params.wv);
    p.wf = put("Wf", params.wf);
    p.bf = put("bf", params.bf);
    p.vf = put("vf", params.vf);
  }
  p.a = put("a", params.a);
  p.b = put("b", params.b);
  p.w_cm = put("w_cm", params.w_cm);
  p.b_cm = put("b_cm", params.b_cm);
  p.w1 = put("w1", params.w1);
  p.w2 = put("w2", params.w2);
  p.v = put("v", params.v);
  return p;
}

AttentionInputs project(const ParamVars& p, Var inputs) {
  return {inputs, matmul(inputs, p.wq), matmul(inputs, p.wk),
          matmul(inputs, p.wv)};
}

Var attend(const ParamVars& p, const AttentionInputs& projected,
           std::span<const Index> rows, const Mask& keep) {
  if (rows.empty()) throw EmptyEnrollmentError("attend: no enrollment rows");
  if (keep.size() != static_cast<Index>(rows.size())) {
    throw ShapeError("attend: mask length does not match row count");
  }
  if (!keep.any()) {
    throw DegenerateEnrollmentError("attend: every enrollment row is masked");
  }
  const Mask excluded = !keep;
  const double scale =
      1.0 / std::sqrt(static_cast<double>(projected.queries.cols()));

  // Scaled-dot self-attention with a residual connection.
  Var q = gather_rows(projected.queries, rows);
  Var k = gather_rows(projected.keys, rows);
  Var v = gather_rows(projected.values, rows);
  Var e = gather_rows(projected.inputs, rows);
  Var weights = softmax_rows_masked(scale * matmul(q, transpose(k)), excluded);
  Var attended = mask_rows(matmul(weights, v) + e, keep);

  // Feed-forward attention: alpha_k = softmax(vf' tanh(Wf o_k + bf)).
  Var hidden = tanh(add_rowwise(matmul(attended, transpose(p.wf)), p.bf));
  Var alpha = softmax_vector_masked(matmul(hidden, p.vf), excluded);
  return matmul(transpose(alpha), attended);
}

HeadVars asv_head(const ParamVars& p, Var test_rows, Var speaker_rows) {
  Var cos = row_cosine(test_rows, speaker_rows);
  Var score = shift_by(scale_by(p.a, cos), p.b);
  return {cos, score, sigmoid(score)};
}

HeadVars cm_head(const ParamVars& p, Var cm_rows) {
  Var score = shift_by(matmul(cm_rows, p.w_cm), p.b_cm);
  return {Var(), score, sigmoid(score)};
}

HeadVars fuse_head(const ParamVars& p, Var p_cm, Var p_asv) {
  Var score = shift_by(scale_by(p.w1, p_cm) + scale_by(p.w2, p_asv), p.v);
  return {Var(), score, sigmoid(score)};
}

// ---------------------------------------------------------------------------

namespace {

Matrix as_row(const Eigen::Ref<const Vector>& v) { return v.transpose(); }

Matrix zero_spoofed_rows(const EnrollmentSet& enroll) {
  Matrix e = enroll.embeddings;
  for (Index r = 0; r < e.rows(); ++r) {
    if (!enroll.bonafide(r)) e.row(r).setZero();
  }
  return e;
}

void check_width(Index got, Index want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected dimension " +
                     std::to_string(want) + ", got " + std::to_string(got));
  }
}

}  // namespace

Vector pool_enrollments(const BackendParams& params,
                        const EnrollmentSet& enroll) {
  validate(enroll);
  check_width(enroll.embeddings.cols(), params.dims.asv, "pool_enrollments");
  GradTape tape;
  const ParamVars p = bind(tape, params, false);
  const AttentionInputs projected =
      project(p, tape.constant(zero_spoofed_rows(enroll)));
  std::vector<Index> rows(static_cast<std::size_t>(enroll.size()));
  std::iota(rows.begin(), rows.end(), Index{0});
  Var h = attend(p, projected, rows, enroll.bonafide);
  return h.value().transpose();
}

Vector average_pool(const EnrollmentSet& enroll) {
  validate(enroll);
  Vector total = Vector::Zero(enroll.embeddings.cols());
  Index count = 0;
  for (Index r = 0; r < enroll.size(); ++r) {
    if (!enroll.bonafide(r)) continue;
    total += enroll.embeddings.row(r).transpose();
    ++count;
  }
  return total / static_cast<double>(count);
}

Vector pool(const BackendParams& params, const EnrollmentSet& enroll,
            Pooling pooling) {
  return pooling == Pooling::kAttention ? pool_enrollments(params, enroll)
                                        : average_pool(enroll);
}

AsvResult asv_probability(const BackendParams& params,
                          const Eigen::Ref<const Vector>& q_asv,
                          const Eigen::Ref<const Vector>& speaker) {
  check_width(q_asv.size(), params.dims.asv, "asv_probability");
  check_width(speaker.size(), params.dims.asv, "asv_probability");
  GradTape tape;
  const ParamVars p = bind(tape, params, false, BindScope::kHeads);
  const HeadVars head =
      asv_head(p, tape.constant(as_row(q_asv)), tape.constant(as_row(speaker)));
  return {head.cos.scalar(), head.score.scalar(), head.prob.scalar()};
}

ProbResult cm_probability(const BackendParams& params,
                          const Eigen::Ref<const Vector>& q_cm) {
  check_width(q_cm.size(), params.dims.cm, "cm_probability");
  GradTape tape;
  const ParamVars p = bind(tape, params, false, BindScope::kHeads);
  const HeadVars head = cm_head(p, tape.constant(as_row(q_cm)));
  return {head.score.scalar(), head.prob.scalar()};
}

ProbResult fuse(const BackendParams& params, double p_cm, double p_asv) {
  GradTape tape;
  const ParamVars p = bind(tape, params, false, BindScope::kHeads);
  const HeadVars head = fuse_head(p, tape.constant(Matrix::Constant(1, 1, p_cm)),
                                  tape.constant(Matrix::Constant(1, 1, p_asv)));
  return {head.score.scalar(), head.prob.scalar()};
}

ForwardResult forward_pooled(const BackendParams& params,
                             const Eigen::Ref<const Vector>& q_asv,
                             const Eigen::Ref<const Vector>& q_cm,
                             const Eigen::Ref<const Vector>& speaker) {
  const AsvResult asv = asv_probability(params, q_asv, speaker);
  const ProbResult cm = cm_probability(params, q_cm);
  const ProbResult fused = fuse(params, cm.prob, asv.prob);
  ForwardResult out;
  out.prob = fused.prob;
  out.score = fused.score;
  out.prob_asv = asv.prob;
  out.score_asv = asv.score;
  out.prob_cm = cm.prob;
  out.score_cm = cm.score;
  out.cos = asv.cos;
  return out;
}

ForwardResult forward(const BackendParams& params,
                      const Eigen::Ref<const Vector>& q_asv,
                      const Eigen::Ref<const Vector>& q_cm,
                      const EnrollmentSet& enroll, Pooling pooling) {
  const Vector h = pool(params, enroll, pooling);
  return forward_pooled(params, q_asv, q_cm, h);
}

}  // namespace sasv
