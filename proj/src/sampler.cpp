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

#include "sasv/sampler.hpp"

#include <algorithm>
#include <map>

#include "sasv/error.hpp"

namespace sasv {

Index SpeakerPool::asv_dim() const {
  return utterances.empty() ? 0 : utterances.front().asv.size();
}

Index SpeakerPool::cm_dim() const {
  return utterances.empty() ? 0 : utterances.front().cm.size();
}

SpeakerPool make_pool(std::vector<UtteranceRecord> utterances) {
  SpeakerPool pool;
  pool.utterances = std::move(utterances);
  std::map<std::string, std::size_t> slot_of;
  for (std::size_t i = 0; i < pool.utterances.size(); ++i) {
    const UtteranceRecord& u = pool.utterances[i];
    if (u.asv.size() != pool.asv_dim() || u.cm.size() != pool.cm_dim()) {
      throw DimensionError("utterance '" + u.utterance_id +
                           "' has embedding dimensions that differ from the "
                           "rest of the pool");
    }
    auto [it, fresh] = slot_of.emplace(u.speaker_id, pool.speakers.size());
    if (fresh) pool.speakers.push_back({u.speaker_id, {}, {}});
    SpeakerPool::Speaker& s = pool.speakers[it->second];
    (u.bonafide ? s.bonafide : s.spoof).push_back(i);
  }
  return pool;
}

SpeakerPool build_pool(const std::vector<ManifestEntry>& manifest,
                       const EmbeddingTable& asv, const EmbeddingTable& cm) {
  require_resolved(unresolved_ids(manifest, asv, cm), "manifest");
  std::vector<UtteranceRecord> records;
  records.reserve(manifest.size());
  for (const ManifestEntry& e : manifest) {
    records.push_back({e.speaker_id, e.utterance_id, e.bonafide,
                       asv.at(e.utterance_id), cm.at(e.utterance_id)});
  }
  return make_pool(std::move(records));
}

std::vector<Index> enrollment_positions(const MiniBatch& batch,
                                        const TrainingPair& pair) {
  std::vector<Index> positions;
  positions.reserve(static_cast<std::size_t>(batch.k - 1));
  for (Index j = 0; j < batch.k; ++j) {
    if (j != pair.test_index) positions.push_back(j);
  }
  return positions;
}

EnrollmentSet enrollment(const SpeakerPool& pool, const MiniBatch& batch,
                         const TrainingPair& pair) {
  const std::vector<Index> positions = enrollment_positions(batch, pair);
  EnrollmentSet set;
  set.embeddings.resize(static_cast<Index>(positions.size()), pool.asv_dim());
  set.bonafide.resize(static_cast<Index>(positions.size()));
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const UtteranceRecord& u =
        pool.utterances[batch.at(pair.enroll_slot, positions[r])];
    if (r == 0) set.speaker_id = u.speaker_id;
    set.embeddings.row(static_cast<Index>(r)) = u.asv.transpose();
    set.bonafide(static_cast<Index>(r)) = u.bonafide;
  }
  return set;
}

namespace {

void check_batch_shape(Index m, Index k) {
  if (m < 2) throw ConfigError("batch needs at least 2 speakers, got " +
                               std::to_string(m));
  if (k < 2 || k % 2 != 0) {
    throw ConfigError("utterances per speaker must be even and >= 2, got " +
                      std::to_string(k));
  }
}

MiniBatch draw_once(const SpeakerPool& pool,
                    const std::vector<std::size_t>& eligible, Index m, Index k,
                    Rng& rng) {
  std::vector<std::size_t> speakers = eligible;
  std::shuffle(speakers.begin(), speakers.end(), rng);
  speakers.resize(static_cast<std::size_t>(m));

  const auto half = static_cast<std::size_t>(k / 2);
  MiniBatch batch;
  batch.m = m;
  batch.k = k;
  batch.utterances.reserve(static_cast<std::size_t>(m * k));
  for (std::size_t s : speakers) {
    std::vector<std::size_t> bona = pool.speakers[s].bonafide;
    std::vector<std::size_t> spoof = pool.speakers[s].spoof;
    std::shuffle(bona.begin(), bona.end(), rng);
    std::shuffle(spoof.begin(), spoof.end(), rng);
    std::vector<std::size_t> slot(bona.begin(), bona.begin() + half);
    slot.insert(slot.end(), spoof.begin(), spoof.begin() + half);
    std::shuffle(slot.begin(), slot.end(), rng);
    batch.utterances.insert(batch.utterances.end(), slot.begin(), slot.end());
  }
  return batch;
}

}  // namespace

bool has_degenerate_enrollment(const MiniBatch& batch,
                               const SpeakerPool& pool) {
  for (Index n = 0; n < batch.m; ++n) {
    Index bona = 0;
    for (Index j = 0; j < batch.k; ++j) {
      bona += pool.utterances[batch.at(n, j)].bonafide ? 1 : 0;
    }
    // Dropping position j leaves no bona fide entry.
    for (Index j = 0; j < batch.k; ++j) {
      const bool dropped = pool.utterances[batch.at(n, j)].bonafide;
      if (bona - (dropped ? 1 : 0) == 0) return true;
    }
  }
  return false;
}

MiniBatch draw_batch(const SpeakerPool& pool, Index m, Index k, Rng& rng) {
  check_batch_shape(m, k);
  const auto half = static_cast<std::size_t>(k / 2);
  std::vector<std::size_t> eligible;
  std::size_t short_bona = 0, short_spoof = 0;
  for (std::size_t s = 0; s < pool.speakers.size(); ++s) {
    const bool bona_ok = pool.speakers[s].bonafide.size() >= half;
    const bool spoof_ok = pool.speakers[s].spoof.size() >= half;
    short_bona += bona_ok ? 0 : 1;
    short_spoof += spoof_ok ? 0 : 1;
    if (bona_ok && spoof_ok) eligible.push_back(s);
  }
  if (eligible.size() < static_cast<std::size_t>(m)) {
    throw PoolExhaustedError(
        "pool exhausted: need " + std::to_string(m) + " speakers with >= " +
        std::to_string(half) + " bona fide and >= " + std::to_string(half) +
        " spoofed utterances, found " + std::to_string(eligible.size()) +
        " of " + std::to_string(pool.speakers.size()) + " (" +
        std::to_string(short_bona) + " short of bona fide, " +
        std::to_string(short_spoof) + " short of spoofed)");
  }
  for (int attempt = 0; attempt <= kMaxBatchRedraws; ++attempt) {
    MiniBatch batch = draw_once(pool, eligible, m, k, rng);
    if (!has_degenerate_enrollment(batch, pool)) return batch;
  }
  throw DegenerateEnrollmentError(
      "every drawn batch left some enrollment without a bona fide entry "
      "after " + std::to_string(kMaxBatchRedraws) + " redraws");
}

std::vector<TrainingPair> expand_pairs(const MiniBatch& batch,
                                       const SpeakerPool& pool) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(static_cast<std::size_t>(batch.m * batch.k * batch.m));
  for (Index l = 0; l < batch.m; ++l) {
    for (Index j = 0; j < batch.k; ++j) {
      const bool bona = pool.utterances[batch.at(l, j)].bonafide;
      for (Index n = 0; n < batch.m; ++n) {
        const bool positive = n == l && bona;
        pairs.push_back({l, j, n,
                         positive ? PairLabel::kPositive : PairLabel::kNegative});
      }
    }
  }
  return pairs;
}

std::size_t batches_per_epoch(const SpeakerPool& pool, Index m, Index k) {
  const auto per_batch = static_cast<std::size_t>(m * k);
  if (per_batch == 0) throw ConfigError("empty batch shape");
  return (pool.utterances.size() + per_batch - 1) / per_batch;
}

}  // namespace sasv
