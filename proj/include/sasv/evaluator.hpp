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

#ifndef SASV_EVALUATOR_HPP_
#define SASV_EVALUATOR_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sasv {

enum class TrialLabel { kTarget, kNontarget, kSpoof };

std::string_view to_string(TrialLabel label);
/// Accepts target / nontarget / spoof; anything else is a BadLabelError.
TrialLabel parse_trial_label(std::string_view text);

struct ScoreRecord {
  std::string claimed_speaker;
  std::string test_utterance;
  double score = 0;
  TrialLabel label = TrialLabel::kTarget;
};

struct EerPoint {
  double eer = 0;
  double threshold = 0;
};

/**
   Equal error rate of a detector that accepts when score >= threshold.

   The operating points are evaluated at every distinct score (FRR = share of
   positives strictly below t, FAR = share of negatives at or above t) plus a
   final point above the largest score where everything is rejected. The EER
   is read off where FRR - FAR changes sign, interpolating linearly between
   the two bracketing operating points; the threshold is interpolated the same
   way.

   Throws EmptyClassError naming the empty side.
*/
EerPoint eer(std::span<const double> positives,
             std::span<const double> negatives);

struct EerReport {
  std::optional<EerPoint> sv;    // target vs nontarget
  std::optional<EerPoint> spf;   // target vs spoof
  std::optional<EerPoint> sasv;  // target vs nontarget + spoof
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;
  std::size_t n_spoof = 0;
};

/// Missing impostor classes leave the matching EER empty. Throws
/// EmptyClassError when there is no target trial.
EerReport evaluate(std::span<const ScoreRecord> records);

/// Baseline that adds the raw cosine and CM scores without any training.
inline double score_sum_baseline(double asv_cos, double cm_score) {
  return asv_cos + cm_score;
}

/// "0.00 0.00 0.00" style line of percentages; missing entries print "absent".
std::string format_percentages(const EerReport& report);
/// Multi-line human readable summary.
std::string format_report(const EerReport& report);
/// key=value lines (sv_eer=..., sv_threshold=..., n_target=...). EERs are
/// fractions printed round-trip exact.
std::string format_key_values(const EerReport& report);

// Score files: claimed<TAB>test<TAB>score<TAB>label per line.
std::vector<ScoreRecord> load_scores(const std::filesystem::path& path);
void save_scores(std::span<const ScoreRecord> records,
                 const std::filesystem::path& path);

}  // namespace sasv

#endif  // SASV_EVALUATOR_HPP_
