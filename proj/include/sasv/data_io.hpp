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

// Text formats:
//   embeddings  utterance_id v1 v2 ... vd        (whitespace separated)
//   manifest    speaker_id<TAB>utt_id<TAB>bonafide|spoof
//   trials      claimed<TAB>enroll1,enroll2,...<TAB>test_id<TAB>label

#ifndef SASV_DATA_IO_HPP_
#define SASV_DATA_IO_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sasv/evaluator.hpp"
#include "sasv/tensor.hpp"

namespace sasv {

/// utterance id -> embedding. Ordered so that writing is deterministic.
using EmbeddingTable = std::map<std::string, Vector>;

/// Throws ParseError (line number in message), DimensionError on rows of
/// inconsistent width, DuplicateIdError on repeated ids.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingTable& table,
                     const std::filesystem::path& path);
/// Width shared by all rows; 0 for an empty table.
Index embedding_dim(const EmbeddingTable& table);

struct ManifestEntry {
  std::string speaker_id;
  std::string utterance_id;
  bool bonafide = true;
};

/// Reads the utterance list. Throws BadLabelError for a flag other than
/// bonafide/spoof.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::vector<ManifestEntry>& entries,
                   const std::filesystem::path& path);

struct Trial {
  std::string claimed_speaker;
  std::vector<std::string> enrollment;
  std::string test_utterance;
  TrialLabel label = TrialLabel::kTarget;
};

using TrialList = std::vector<Trial>;

TrialList load_trials(const std::filesystem::path& path);
void save_trials(const TrialList& trials, const std::filesystem::path& path);

/// Ids referenced by the manifest or trials that are absent from a table,
/// in first-seen order without repeats.
std::vector<std::string> unresolved_ids(const std::vector<ManifestEntry>& entries,
                                        const EmbeddingTable& asv,
                                        const EmbeddingTable& cm);
std::vector<std::string> unresolved_ids(const TrialList& trials,
                                        const EmbeddingTable& asv,
                                        const EmbeddingTable& cm);

/// Throws UnresolvedIdError naming up to the first ten missing ids.
void require_resolved(const std::vector<std::string>& missing,
                      const std::string& what);

}  // namespace sasv

#endif  // SASV_DATA_IO_HPP_
