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

#include "sasv/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "sasv/error.hpp"
#include "sasv/text.hpp"

namespace sasv {

std::string_view to_string(TrialLabel label) {
  switch (label) {
    case TrialLabel::kTarget: return "target";
    case TrialLabel::kNontarget: return "nontarget";
    case TrialLabel::kSpoof: return "spoof";
  }
  return "?";
}

TrialLabel parse_trial_label(std::string_view text) {
  if (text == "target") return TrialLabel::kTarget;
  if (text == "nontarget") return TrialLabel::kNontarget;
  if (text == "spoof") return TrialLabel::kSpoof;
  throw BadLabelError("bad trial label '" + std::string(text) +
                      "' (expected target, nontarget or spoof)");
}

EerPoint eer(std::span<const double> positives,
             std::span<const double> negatives) {
  if (positives.empty()) throw EmptyClassError("eer: no positive scores");
  if (negatives.empty()) throw EmptyClassError("eer: no negative scores");

  std::vector<double> pos(positives.begin(), positives.end());
  std::vector<double> neg(negatives.begin(), negatives.end());
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<double> thresholds;
  thresholds.reserve(pos.size() + neg.size() + 1);
  std::merge(pos.begin(), pos.end(), neg.begin(), neg.end(),
             std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  // Above every score: all trials rejected.
  thresholds.push_back(std::nextafter(thresholds.back(),
                                      std::numeric_limits<double>::infinity()));

  const double n_pos = static_cast<double>(pos.size());
  const double n_neg = static_cast<double>(neg.size());
  std::size_t pos_below = 0;
  std::size_t neg_below = 0;
  double prev_frr = 0, prev_far = 1, prev_t = thresholds.front();
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double t = thresholds[i];
    while (pos_below < pos.size() && pos[pos_below] < t) ++pos_below;
    while (neg_below < neg.size() && neg[neg_below] < t) ++neg_below;
    const double frr = static_cast<double>(pos_below) / n_pos;
    const double far = static_cast<double>(neg.size() - neg_below) / n_neg;
    const double diff = frr - far;
    if (diff == 0) return {frr, t};
    if (diff > 0) {
      const double prev_diff = prev_frr - prev_far;
      const double lambda = -prev_diff / (diff - prev_diff);
      return {prev_frr + lambda * (frr - prev_frr),
              prev_t + lambda * (t - prev_t)};
    }
    prev_frr = frr;
    prev_far = far;
    prev_t = t;
  }
  // The final point always has FRR = 1, FAR = 0.
  return {prev_frr, prev_t};
}

EerReport evaluate(std::span<const ScoreRecord> records) {
  std::vector<double> target, nontarget, spoof;
  for (const ScoreRecord& r : records) {
    switch (r.label) {
      case TrialLabel::kTarget: target.push_back(r.score); break;
      case TrialLabel::kNontarget: nontarget.push_back(r.score); break;
      case TrialLabel::kSpoof: spoof.push_back(r.score); break;
    }
  }
  if (target.empty()) throw EmptyClassError("evaluate: no target trials");
  EerReport report;
  report.n_target = target.size();
  report.n_nontarget = nontarget.size();
  report.n_spoof = spoof.size();
  if (!nontarget.empty()) report.sv = eer(target, nontarget);
  if (!spoof.empty()) report.spf = eer(target, spoof);
  if (!nontarget.empty() || !spoof.empty()) {
    std::vector<double> impostors = nontarget;
    impostors.insert(impostors.end(), spoof.begin(), spoof.end());
    report.sasv = eer(target, impostors);
  }
  return report;
}

namespace {

std::string percent(const std::optional<EerPoint>& p) {
  if (!p) return "absent";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * p->eer);
  return buf;
}

}  // namespace

std::string format_percentages(const EerReport& report) {
  return percent(report.sv) + " " + percent(report.spf) + " " +
         percent(report.sasv);
}

std::string format_report(const EerReport& report) {
  std::ostringstream out;
  out << "SV-EER[%]   " << percent(report.sv) << "\n"
      << "SPF-EER[%]  " << percent(report.spf) << "\n"
      << "SASV-EER[%] " << percent(report.sasv) << "\n"
      << "trials: " << report.n_target << " target, " << report.n_nontarget
      << " nontarget, " << report.n_spoof << " spoof\n";
  return out.str();
}

std::string format_key_values(const EerReport& report) {
  std::ostringstream out;
  auto put = [&out](const char* key, const std::optional<EerPoint>& p) {
    out << key << "_eer=" << (p ? format_double(p->eer) : "absent") << "\n";
    out << key << "_threshold="
        << (p ? format_double(p->threshold) : "absent") << "\n";
  };
  put("sv", report.sv);
  put("spf", report.spf);
  put("sasv", report.sasv);
  out << "n_target=" << report.n_target << "\n"
      << "n_nontarget=" << report.n_nontarget << "\n"
      << "n_spoof=" << report.n_spoof << "\n";
  return out.str();
}

std::vector<ScoreRecord> load_scores(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<ScoreRecord> records;
  records.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 4) {
      throw ParseError(where + ": expected 4 tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    ScoreRecord r;
    r.claimed_speaker = std::string(fields[0]);
    r.test_utterance = std::string(fields[1]);
    const auto score = parse_double(fields[2]);
    if (!score) {
      throw ParseError(where + ": bad score '" + std::string(fields[2]) + "'");
    }
    r.score = *score;
    try {
      r.label = parse_trial_label(fields[3]);
    } catch (const BadLabelError& e) {
      throw BadLabelError(where + ": " + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

void save_scores(std::span<const ScoreRecord> records,
                 const std::filesystem::path& path) {
  std::string text;
  for (const ScoreRecord& r : records) {
    text += r.claimed_speaker;
    text += '\t';
    text += r.test_utterance;
    text += '\t';
    text += format_double(r.score);
    text += '\t';
    text += to_string(r.label);
    text += '\n';
  }
  write_text(path, text);
}

}  // namespace sasv
