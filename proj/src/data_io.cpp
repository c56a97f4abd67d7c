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

#include "sasv/data_io.hpp"

#include <set>

#include "sasv/error.hpp"
#include "sasv/text.hpp"

namespace sasv {

namespace {

std::string location(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line + 1);
}

}  // namespace

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  EmbeddingTable table;
  Index dim = -1;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tokens = split_whitespace(lines[i]);
    if (tokens.empty()) continue;
    if (tokens.size() < 2) {
      throw ParseError(location(path, i) + ": expected an id and values");
    }
    Vector values(static_cast<Index>(tokens.size() - 1));
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      const auto x = parse_double(tokens[k]);
      if (!x) {
        throw ParseError(location(path, i) + ": bad value '" +
                         std::string(tokens[k]) + "'");
      }
      values(static_cast<Index>(k - 1)) = *x;
    }
    if (dim < 0) dim = values.size();
    if (values.size() != dim) {
      throw DimensionError(location(path, i) + ": dimension " +
                           std::to_string(values.size()) + ", expected " +
                           std::to_string(dim));
    }
    std::string id(tokens[0]);
    if (table.count(id) != 0) {
      throw DuplicateIdError(location(path, i) + ": duplicate id '" + id + "'");
    }
    table.emplace(std::move(id), std::move(values));
  }
  return table;
}

void save_embeddings(const EmbeddingTable& table,
                     const std::filesystem::path& path) {
  std::string text;
  for (const auto& [id, values] : table) {
    text += id;
    for (Index k = 0; k < values.size(); ++k) {
      text += ' ';
      text += format_double(values(k));
    }
    text += '\n';
  }
  write_text(path, text);
}

Index embedding_dim(const EmbeddingTable& table) {
  return table.empty() ? 0 : table.begin()->second.size();
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 3) {
      throw ParseError(location(path, i) +
                       ": expected speaker<TAB>utterance<TAB>bonafide|spoof");
    }
    ManifestEntry e;
    e.speaker_id = std::string(fields[0]);
    e.utterance_id = std::string(fields[1]);
    if (fields[2] == "bonafide") {
      e.bonafide = true;
    } else if (fields[2] == "spoof") {
      e.bonafide = false;
    } else {
      throw BadLabelError(location(path, i) + ": bad flag '" +
                          std::string(fields[2]) +
                          "' (expected bonafide or spoof)");
    }
    if (!seen.insert(e.utterance_id).second) {
      throw DuplicateIdError(location(path, i) + ": duplicate utterance '" +
                             e.utterance_id + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const std::vector<ManifestEntry>& entries,
                   const std::filesystem::path& path) {
  std::string text;
  for (const ManifestEntry& e : entries) {
    text += e.speaker_id + '\t' + e.utterance_id + '\t' +
            (e.bonafide ? "bonafide" : "spoof") + '\n';
  }
  write_text(path, text);
}

TrialList load_trials(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  TrialList trials;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 4) {
      throw ParseError(location(path, i) +
                       ": expected claimed<TAB>enrollments<TAB>test<TAB>label");
    }
    Trial t;
    t.claimed_speaker = std::string(fields[0]);
    for (std::string_view id : split(fields[1], ',')) {
      if (id.empty()) {
        throw ParseError(location(path, i) + ": empty enrollment id");
      }
      t.enrollment.emplace_back(id);
    }
    t.test_utterance = std::string(fields[2]);
    try {
      t.label = parse_trial_label(fields[3]);
    } catch (const BadLabelError& e) {
      throw BadLabelError(location(path, i) + ": " + e.what());
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void save_trials(const TrialList& trials, const std::filesystem::path& path) {
  std::string text;
  for (const Trial& t : trials) {
    text += t.claimed_speaker;
    text += '\t';
    for (std::size_t k = 0; k < t.enrollment.size(); ++k) {
      if (k > 0) text += ',';
      text += t.enrollment[k];
    }
    text += '\t';
    text += t.test_utterance;
    text += '\t';
    text += to_string(t.label);
    text += '\n';
  }
  write_text(path, text);
}

namespace {

class MissingCollector {
 public:
  MissingCollector(const EmbeddingTable& asv, const EmbeddingTable& cm)
      : asv_(asv), cm_(cm) {}

  void check(const std::string& id, bool need_cm) {
    const bool ok = asv_.count(id) != 0 && (!need_cm || cm_.count(id) != 0);
    if (!ok && seen_.insert(id).second) missing_.push_back(id);
  }
  std::vector<std::string> take() { return std::move(missing_); }

 private:
  const EmbeddingTable& asv_;
  const EmbeddingTable& cm_;
  std::set<std::string> seen_;
  std::vector<std::string> missing_;
};

}  // namespace

std::vector<std::string> unresolved_ids(const std::vector<ManifestEntry>& entries,
                                        const EmbeddingTable& asv,
                                        const EmbeddingTable& cm) {
  MissingCollector c(asv, cm);
  for (const ManifestEntry& e : entries) c.check(e.utterance_id, true);
  return c.take();
}

std::vector<std::string> unresolved_ids(const TrialList& trials,
                                        const EmbeddingTable& asv,
                                        const EmbeddingTable& cm) {
  MissingCollector c(asv, cm);
  for (const Trial& t : trials) {
    // Enrollment only needs speaker embeddings.
    for (const std::string& id : t.enrollment) c.check(id, false);
    c.check(t.test_utterance, true);
  }
  return c.take();
}

void require_resolved(const std::vector<std::string>& missing,
                      const std::string& what) {
  if (missing.empty()) return;
  std::string msg = what + ": " + std::to_string(missing.size()) +
                    " unresolved id(s):";
  for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
    msg += " " + missing[i];
  }
  throw UnresolvedIdError(msg);
}

}  // namespace sasv
