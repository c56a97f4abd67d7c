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

// Spoofing-aware attention back-end: enrollment pooling (scaled-dot
// self-attention followed by feed-forward attention), the calibrated cosine
// ASV head, the linear CM head and the learnable fusion of both
// probabilities.

#ifndef SASV_MODEL_HPP_
#define SASV_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "sasv/tape.hpp"
#include "sasv/tensor.hpp"

namespace sasv {

enum class EmbeddingKind { kAsv, kCm };

struct Embedding {
  std::string utterance_id;
  EmbeddingKind kind = EmbeddingKind::kAsv;
  Vector values;
};

/// Enrollment embeddings of one speaker, one per row. bonafide(k) == false
/// marks a spoofed entry, which is zeroed and excluded from attention.
struct EnrollmentSet {
  std::string speaker_id;
  Matrix embeddings;
  Mask bonafide;

  Index size() const { return embeddings.rows(); }
};

/// Throws EmptyEnrollmentError / DegenerateEnrollmentError / ShapeError.
void validate(const EnrollmentSet& enroll);

enum class Pooling { kAttention, kAverage };

std::string_view to_string(Pooling pooling);
/// Accepts "attention" or "average".
Pooling parse_pooling(std::string_view text);

struct ModelDims {
  Index asv = 192;     // speaker embedding width
  Index cm = 160;      // CM embedding width
  Index hidden = 64;   // feed-forward attention width

  bool operator==(const ModelDims&) const = default;
};

/// Every trainable tensor of the back-end. Scalars are stored as 1x1
/// matrices and column vectors as n x 1 so all parameters share one type.
struct BackendParams {
  ModelDims dims;
  Matrix wq, wk, wv;     // asv x asv
  Matrix wf;             // hidden x asv
  Matrix bf, vf;         // hidden x 1
  Matrix a, b;           // calibration of the cosine score
  Matrix w_cm;           // cm x 1
  Matrix b_cm;
  Matrix w1, w2, v;      // fusion

  /// Uniform(+-1/sqrt(fan_in)) projections, zero biases, a = 1, b = 0,
  /// w1 = w2 = 1, v = -1.
  static BackendParams initialize(const ModelDims& dims, std::uint64_t seed);

  /// Zero tensors of the right shapes; used as a gradient container.
  static BackendParams zeros(const ModelDims& dims);

  /// Visits (name, tensor) in canonical order: Wq Wk Wv Wf bf vf a b w_cm
  /// b_cm w1 w2 v.
  template <typename F>
  void for_each(F&& f) {
    f("Wq", wq); f("Wk", wk); f("Wv", wv);
    f("Wf", wf); f("bf", bf); f("vf", vf);
    f("a", a); f("b", b);
    f("w_cm", w_cm); f("b_cm", b_cm);
    f("w1", w1); f("w2", w2); f("v", v);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<BackendParams*>(this)->for_each(
        [&f](std::string_view name, const Matrix& m) { f(name, m); });
  }

  /// Throws ShapeError when a tensor's shape disagrees with dims.
  void check_shapes() const;
};

bool bitwise_equal(const BackendParams& x, const BackendParams& y);

// ---------------------------------------------------------------------------
// Graph-level building blocks. These operate on tape variables so the same
// code serves inference (nothing tracked) and training.

struct ParamVars {
  Var wq, wk, wv, wf, bf, vf, a, b, w_cm, b_cm, w1, w2, v;
};

enum class BindScope { kAll, kHeads };

/// Places the parameters on the tape; registered as trainable when `track`.
/// kHeads skips the attention tensors, leaving those handles detached.
ParamVars bind(GradTape& tape, const BackendParams& params, bool track,
               BindScope scope = BindScope::kAll);

/// Query/key/value projections of a block of enrollment rows. Rows that are
/// spoofed must already be zero in `inputs`.
struct AttentionInputs {
  Var inputs;
  Var queries;
  Var keys;
  Var values;
};

AttentionInputs project(const ParamVars& p, Var inputs);

/// Speaker representative (1 x asv) from the rows of `projected` selected by
/// `rows`; keep(i) == false excludes row i from both attention stages and
/// forces its self-attention output to zero.
Var attend(const ParamVars& p, const AttentionInputs& projected,
           std::span<const Index> rows, const Mask& keep);

/// ASV head on row blocks: returns cosine, calibrated score and probability
/// (each n x 1).
struct HeadVars {
  Var cos;
  Var score;
  Var prob;
};
HeadVars asv_head(const ParamVars& p, Var test_rows, Var speaker_rows);

/// CM head on a block of CM embeddings (n x cm): score and probability.
HeadVars cm_head(const ParamVars& p, Var cm_rows);

/// Fusion of the two probabilities (each n x 1): score and probability.
HeadVars fuse_head(const ParamVars& p, Var p_cm, Var p_asv);

// ---------------------------------------------------------------------------
// Value-level operations.

/// Attention pooling of an enrollment set into a representative vector.
Vector pool_enrollments(const BackendParams& params,
                        const EnrollmentSet& enroll);

/// Mean of the bona fide entries.
Vector average_pool(const EnrollmentSet& enroll);

Vector pool(const BackendParams& params, const EnrollmentSet& enroll,
            Pooling pooling);

struct AsvResult {
  double cos = 0;
  double score = 0;   // s_asv
  double prob = 0;    // P_asv
};
AsvResult asv_probability(const BackendParams& params,
                          const Eigen::Ref<const Vector>& q_asv,
                          const Eigen::Ref<const Vector>& speaker);

struct ProbResult {
  double score = 0;
  double prob = 0;
};
ProbResult cm_probability(const BackendParams& params,
                          const Eigen::Ref<const Vector>& q_cm);

ProbResult fuse(const BackendParams& params, double p_cm, double p_asv);

struct ForwardResult {
  double prob = 0;       // P
  double prob_asv = 0;   // P_asv
  double prob_cm = 0;    // P_cm
  double score = 0;      // s
  double score_asv = 0;  // s_asv
  double score_cm = 0;   // s_cm
  double cos = 0;
};

/// Scores a test trial against an already pooled speaker representative.
ForwardResult forward_pooled(const BackendParams& params,
                             const Eigen::Ref<const Vector>& q_asv,
                             const Eigen::Ref<const Vector>& q_cm,
                             const Eigen::Ref<const Vector>& speaker);

ForwardResult forward(const BackendParams& params,
                      const Eigen::Ref<const Vector>& q_asv,
                      const Eigen::Ref<const Vector>& q_cm,
                      const EnrollmentSet& enroll, Pooling pooling);

// ---------------------------------------------------------------------------
// Checkpoints: "SASVBKND", u32 version, u64 d_asv, d_cm, hidden, then per
// tensor u32 name length, name bytes, u64 rows, u64 cols, f64 values in
// row-major order. All integers and floats little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const BackendParams& params,
                     const std::filesystem::path& path);
BackendParams load_checkpoint(const std::filesystem::path& path);

}  // namespace sasv

#endif  // SASV_MODEL_HPP_
