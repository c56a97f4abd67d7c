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

// Finite-difference verification of the batch-loss gradients.

#ifndef SASV_GRADCHECK_HPP_
#define SASV_GRADCHECK_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sasv/model.hpp"
#include "sasv/sampler.hpp"

namespace sasv {

struct GradcheckConfig {
  Index asv_dim = 8;
  Index cm_dim = 6;
  Index hidden = 4;
  Index k = 4;
  Index m = 2;
  std::uint64_t seed = 0;
  int n_seeds = 5;
  double step = 1e-5;
  double tolerance = 1e-4;
  Pooling pooling = Pooling::kAttention;
};

struct GroupError {
  std::string name;
  double max_relative_error = 0;
  double max_abs_gradient = 0;
};

struct GradcheckReport {
  std::vector<GroupError> groups;  // canonical parameter order
  bool passed = true;
  std::string worst_group;
  double worst_error = 0;
};

/// Random tiny pool: m + 1 speakers with k/2 + 1 bona fide and k/2 + 1
/// spoofed utterances each, gaussian embeddings.
SpeakerPool random_pool(Index asv_dim, Index cm_dim, Index speakers,
                        Index per_class, std::uint64_t seed);

/// Random parameters with every scalar and bias moved away from its
/// initial value so that all gradient paths are exercised.
BackendParams random_params(const ModelDims& dims, std::uint64_t seed);

/// Batch loss recomputed from scratch in Scalar precision, without the tape:
/// attention (or average) pooling per enrollment, the three heads, clamped
/// cross-entropy and the mean over `selected`. Instantiated for double and
/// long double.
template <typename Scalar>
Scalar reference_batch_loss(const BackendParams& params,
                            const SpeakerPool& pool, const MiniBatch& batch,
                            const std::vector<TrainingPair>& pairs,
                            const std::vector<std::size_t>& selected,
                            Pooling pooling);

/// Central differences (L(t + h) - L(t - h)) / 2h against the analytic
/// gradient for every entry of every tensor, over n_seeds seeds starting at
/// seed. The perturbed losses come from reference_batch_loss<long double>,
/// so rounding in the difference quotient stays far below the tolerance even
/// for tiny gradient entries. An entry fails when
/// |g - fd| / (|g| + 1e-8) >= tolerance.
GradcheckReport run_gradcheck(const GradcheckConfig& config);

std::string format_gradcheck(const GradcheckReport& report);

}  // namespace sasv

#endif  // SASV_GRADCHECK_HPP_
