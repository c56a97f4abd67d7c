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

// Mini-batch construction for back-end training.
//
// A batch holds M speakers with K utterances each (K/2 bona fide, K/2
// spoofed). Every utterance in turn serves as a test trial; it is paired with
// the remaining K-1 utterances of its own speaker and, for each other
// speaker, with that speaker's utterances minus the one at the same position.
// A pair is positive only when the speakers agree and the test is bona fide.

#ifndef SASV_SAMPLER_HPP_
#define SASV_SAMPLER_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sasv/data_io.hpp"
#include "sasv/model.hpp"
#include "sasv/tensor.hpp"

namespace sasv {

struct UtteranceRecord {
  std::string speaker_id;
  std::string utterance_id;
  bool bonafide = true;
  Vector asv;
  Vector cm;
};

/// Training utterances grouped by speaker, in order of first appearance.
struct SpeakerPool {
  struct Speaker {
    std::string id;
    std::vector<std::size_t> bonafide;  // indices into utterances
    std::vector<std::size_t> spoof;
  };
  std::vector<UtteranceRecord> utterances;
  std::vector<Speaker> speakers;

  Index asv_dim() const;
  Index cm_dim() const;
};

SpeakerPool make_pool(std::vector<UtteranceRecord> utterances);

/// Joins the manifest with both embedding tables. Throws UnresolvedIdError.
SpeakerPool build_pool(const std::vector<ManifestEntry>& manifest,
                       const EmbeddingTable& asv, const EmbeddingTable& cm);

using Rng = std::mt19937_64;

struct MiniBatch {
  Index m = 0;  // speakers
  Index k = 0;  // utterances per speaker
  /// Pool indices, slot-major: utterances[slot * k + j].
  std::vector<std::size_t> utterances;

  std::size_t at(Index slot, Index j) const {
    return utterances[static_cast<std::size_t>(slot * k + j)];
  }
};

enum class PairLabel { kNegative, kPositive };

struct TrainingPair {
  Index test_slot = 0;    // l
  Index test_index = 0;   // m
  Index enroll_slot = 0;  // n
  PairLabel label = PairLabel::kNegative;
};

/// Positions of the enrollment entries of a pair within the enrolled
/// speaker's slot: every j in [0, k) except test_index.
std::vector<Index> enrollment_positions(const MiniBatch& batch,
                                        const TrainingPair& pair);

/// Materialises the enrollment set of a pair from the pool.
EnrollmentSet enrollment(const SpeakerPool& pool, const MiniBatch& batch,
                         const TrainingPair& pair);

/// Draws M distinct speakers and, per speaker, K/2 bona fide plus K/2 spoofed
/// utterances without replacement, shuffled within the slot. Throws
/// ConfigError for invalid M/K and PoolExhaustedError when too few speakers
/// qualify. Batches with a pair whose enrollment has no bona fide entry are
/// redrawn, at most 100 times.
MiniBatch draw_batch(const SpeakerPool& pool, Index m, Index k, Rng& rng);

/// All M*K*M pairs ordered by (test slot, test index, enrollment slot).
std::vector<TrainingPair> expand_pairs(const MiniBatch& batch,
                                       const SpeakerPool& pool);

/// True when some pair's enrollment would contain only spoofed entries.
bool has_degenerate_enrollment(const MiniBatch& batch, const SpeakerPool& pool);

/// ceil(pool size / (M*K)).
std::size_t batches_per_epoch(const SpeakerPool& pool, Index m, Index k);

inline constexpr int kMaxBatchRedraws = 100;

}  // namespace sasv

#endif  // SASV_SAMPLER_HPP_
