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

#ifndef SASV_SCORING_HPP_
#define SASV_SCORING_HPP_

#include <string_view>
#include <vector>

#include "sasv/data_io.hpp"
#include "sasv/evaluator.hpp"
#include "sasv/model.hpp"

namespace sasv {

/// kFused emits P, kAsvOnly emits P_asv and kScoreSum emits cos + s_cm.
enum class Scorer { kFused, kAsvOnly, kScoreSum };

std::string_view to_string(Scorer scorer);
/// Accepts "fused", "asv_only" or "score_sum".
Scorer parse_scorer(std::string_view text);

/// One record per trial, in trial order. Enrollment lists are treated as
/// bona fide. Throws UnresolvedIdError listing the first ten missing ids.
std::vector<ScoreRecord> score_trials(const BackendParams& params,
                                      const TrialList& trials,
                                      const EmbeddingTable& asv,
                                      const EmbeddingTable& cm, Scorer scorer,
                                      Pooling pooling);

}  // namespace sasv

#endif  // SASV_SCORING_HPP_
