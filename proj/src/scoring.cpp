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

#include "sasv/scoring.hpp"

#include <map>

#include "sasv/error.hpp"

namespace sasv {

std::string_view to_string(Scorer scorer) {
  switch (scorer) {
    case Scorer::kFused: return "fused";
    case Scorer::kAsvOnly: return "asv_only";
    case Scorer::kScoreSum: return "score_sum";
  }
  return "?";
}

Scorer parse_scorer(std::string_view text) {
  if (text == "fused") return Scorer::kFused;
  if (text == "asv_only") return Scorer::kAsvOnly;
  if (text == "score_sum") return Scorer::kScoreSum;
  throw ConfigError("unknown scorer '" + std::string(text) +
                    "' (expected fused, asv_only or score_sum)");
}

std::vector<ScoreRecord> score_trials(const BackendParams& params,
                                      const TrialList& trials,
                                      const EmbeddingTable& asv,
                                      const EmbeddingTable& cm, Scorer scorer,
                                      Pooling pooling) {
  // The ASV-only path never reads CM embeddings.
  require_resolved(unresolved_ids(trials, asv,
                                  scorer == Scorer::kAsvOnly ? asv : cm),
                   "trials");

  std::map<std::vector<std::string>, Vector> speakers;
  std::vector<ScoreRecord> records;
  records.reserve(trials.size());
  for (const Trial& t : trials) {
    auto it = speakers.find(t.enrollment);
    if (it == speakers.end()) {
      EnrollmentSet set;
      set.speaker_id = t.claimed_speaker;
      set.embeddings.resize(static_cast<Index>(t.enrollment.size()),
                            params.dims.asv);
      set.bonafide = Mask::Constant(static_cast<Index>(t.enrollment.size()),
                                    true);
      for (std::size_t r = 0; r < t.enrollment.size(); ++r) {
        const Vector& e = asv.at(t.enrollment[r]);
        if (e.size() != params.dims.asv) {
          throw ShapeError("embedding '" + t.enrollment[r] + "' has dimension " +
                           std::to_string(e.size()) + ", model expects " +
                           std::to_string(params.dims.asv));
        }
        set.embeddings.row(static_cast<Index>(r)) = e.transpose();
      }
      it = speakers.emplace(t.enrollment, pool(params, set, pooling)).first;
    }
    const Vector& h = it->second;
    const Vector& q = asv.at(t.test_utterance);

    double score = 0;
    if (scorer == Scorer::kAsvOnly) {
      score = asv_probability(params, q, h).prob;
    } else {
      const ForwardResult f =
          forward_pooled(params, q, cm.at(t.test_utterance), h);
      score = scorer == Scorer::kFused ? f.prob
                                       : score_sum_baseline(f.cos, f.score_cm);
    }
    records.push_back({t.claimed_speaker, t.test_utterance, score, t.label});
  }
  return records;
}

}  // namespace sasv
