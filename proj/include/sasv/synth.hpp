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

// Synthetic speaker / countermeasure embeddings.
//
// Each speaker owns a random unit centroid c. Bona fide speaker embeddings
// are normalize(c + asv_noise * g) and spoofed ones
// normalize(c + (1 - fidelity) * g' + asv_noise * g), so a spoof imitates
// its target in speaker space. Gaussian draws g are scaled by 1/sqrt(d) so
// that the noise levels do not depend on the embedding width. CM embeddings
// come from two isotropic gaussians (standard deviation cm_noise per
// coordinate) whose means lie cm_separation apart along one fixed direction.

#ifndef SASV_SYNTH_HPP_
#define SASV_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sasv/data_io.hpp"

namespace sasv {

struct SynthConfig {
  Index train_speakers = 40;
  Index dev_speakers = 10;
  Index eval_speakers = 20;
  Index bonafide_per_speaker = 20;
  Index spoof_per_speaker = 20;
  Index enroll_per_speaker = 5;
  Index nontarget_per_test = 1;
  Index asv_dim = 192;
  Index cm_dim = 160;
  double asv_noise = 1.5;
  double spoof_speaker_fidelity = 0.9;
  double cm_separation = 6.0;
  double cm_noise = 1.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

struct SyntheticData {
  std::vector<ManifestEntry> manifest;  // training partition
  EmbeddingTable asv;                   // every partition
  EmbeddingTable cm;
  TrialList train_trials;
  TrialList dev_trials;
  TrialList eval_trials;
};

/// Deterministic per seed. Enrollment lists hold bona fide utterances only;
/// each remaining bona fide utterance is a target trial and is also tested
/// against nontarget_per_test other speakers; every spoofed utterance is a
/// spoof trial against its own speaker.
SyntheticData generate_synthetic(const SynthConfig& config);

inline constexpr const char* kManifestFile = "manifest.tsv";
inline constexpr const char* kAsvEmbeddingFile = "asv_embeddings.txt";
inline constexpr const char* kCmEmbeddingFile = "cm_embeddings.txt";
inline constexpr const char* kTrainTrialsFile = "trials_train.tsv";
inline constexpr const char* kDevTrialsFile = "trials_dev.tsv";
inline constexpr const char* kEvalTrialsFile = "trials_eval.tsv";

/// Writes the six files above into `dir`, creating it if needed.
void write_synthetic(const SyntheticData& data,
                     const std::filesystem::path& dir);

}  // namespace sasv

#endif  // SASV_SYNTH_HPP_
