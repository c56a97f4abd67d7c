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

#include "sasv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <system_error>

#include "sasv/error.hpp"

namespace sasv {

void SynthConfig::validate() const {
  auto at_least = [](Index value, Index bound, const char* name) {
    if (value < bound) {
      throw ConfigError(std::string(name) + " must be >= " +
                        std::to_string(bound) + ", got " +
                        std::to_string(value));
    }
  };
  at_least(train_speakers, 2, "train_speakers");
  at_least(dev_speakers, 2, "dev_speakers");
  at_least(eval_speakers, 2, "eval_speakers");
  at_least(enroll_per_speaker, 1, "enroll_per_speaker");
  at_least(bonafide_per_speaker, enroll_per_speaker + 1,
           "bonafide_per_speaker");
  at_least(spoof_per_speaker, 1, "spoof_per_speaker");
  at_least(nontarget_per_test, 0, "nontarget_per_test");
  at_least(asv_dim, 1, "asv_dim");
  at_least(cm_dim, 1, "cm_dim");
  Index smallest = std::min({train_speakers, dev_speakers, eval_speakers});
  if (nontarget_per_test > smallest - 1) {
    throw ConfigError("nontarget_per_test exceeds the number of other "
                      "speakers in a partition");
  }
  if (!(spoof_speaker_fidelity >= 0 && spoof_speaker_fidelity <= 1)) {
    throw ConfigError("spoof_speaker_fidelity must lie in [0, 1]");
  }
  if (!(asv_noise >= 0) || !(cm_noise >= 0) || !(cm_separation >= 0) ||
      !std::isfinite(asv_noise + cm_noise + cm_separation)) {
    throw ConfigError("noise levels and cm_separation must be finite and "
                      ">= 0");
  }
}

namespace {

class Generator {
 public:
  explicit Generator(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cm_direction_ = unit(cfg.cm_dim);
  }

  void partition(const char* prefix, Index n_speakers, SyntheticData& out,
                 TrialList& trials, bool into_manifest) {
    struct Speaker {
      std::string id;
      std::vector<std::string> bona, spoof;
    };
    std::vector<Speaker> speakers(static_cast<std::size_t>(n_speakers));
    for (Index s = 0; s < n_speakers; ++s) {
      Speaker& sp = speakers[static_cast<std::size_t>(s)];
      sp.id = name(prefix, s);
      const Vector centroid = unit(cfg_.asv_dim);
      for (Index u = 0; u < cfg_.bonafide_per_speaker; ++u) {
        sp.bona.push_back(sp.id + "_b" + number(u));
        emit(out, sp.id, sp.bona.back(), true, centroid, into_manifest);
      }
      for (Index u = 0; u < cfg_.spoof_per_speaker; ++u) {
        sp.spoof.push_back(sp.id + "_s" + number(u));
        emit(out, sp.id, sp.spoof.back(), false, centroid, into_manifest);
      }
    }

    const auto enroll = static_cast<std::size_t>(cfg_.enroll_per_speaker);
    for (std::size_t s = 0; s < speakers.size(); ++s) {
      const Speaker& sp = speakers[s];
      const std::vector<std::string> list(sp.bona.begin(),
                                          sp.bona.begin() + enroll);
      for (std::size_t u = enroll; u < sp.bona.size(); ++u) {
        trials.push_back({sp.id, list, sp.bona[u], TrialLabel::kTarget});
      }
      for (const std::string& id : sp.spoof) {
        trials.push_back({sp.id, list, id, TrialLabel::kSpoof});
      }
    }
    // Nontarget trials: each test utterance claims other speakers.
    std::uniform_int_distribution<std::size_t> pick(1, speakers.size() - 1);
    for (std::size_t s = 0; s < speakers.size(); ++s) {
      for (std::size_t u = enroll; u < speakers[s].bona.size(); ++u) {
        std::vector<std::size_t> claimed;
        while (claimed.size() <
               static_cast<std::size_t>(cfg_.nontarget_per_test)) {
          const std::size_t other = (s + pick(rng_)) % speakers.size();
          bool seen = false;
          for (std::size_t c : claimed) seen = seen || c == other;
          if (!seen) claimed.push_back(other);
        }
        for (std::size_t c : claimed) {
          const Speaker& target = speakers[c];
          trials.push_back({target.id,
                            {target.bona.begin(), target.bona.begin() + enroll},
                            speakers[s].bona[u], TrialLabel::kNontarget});
        }
      }
    }
  }

 private:
  static std::string name(const char* prefix, Index s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03lld", prefix,
                  static_cast<long long>(s));
    return buf;
  }
  static std::string number(Index u) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%03lld", static_cast<long long>(u));
    return buf;
  }

  Vector gaussian(Index d) {
    Vector g(d);
    for (Index i = 0; i < d; ++i) g(i) = normal_(rng_);
    return g;
  }
  Vector unit(Index d) {
    Vector g = gaussian(d);
    return g / g.norm();
  }

  void emit(SyntheticData& out, const std::string& speaker,
            const std::string& utt, bool bonafide, const Vector& centroid,
            bool into_manifest) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.asv_dim));
    Vector asv = centroid;
    if (!bonafide) {
      asv += (1.0 - cfg_.spoof_speaker_fidelity) * scale *
             gaussian(cfg_.asv_dim);
    }
    asv += cfg_.asv_noise * scale * gaussian(cfg_.asv_dim);
    asv /= asv.norm();

    const double side = bonafide ? 0.5 : -0.5;
    Vector cm = side * cfg_.cm_separation * cm_direction_ +
                cfg_.cm_noise * gaussian(cfg_.cm_dim);

    out.asv.emplace(utt, std::move(asv));
    out.cm.emplace(utt, std::move(cm));
    if (into_manifest) out.manifest.push_back({speaker, utt, bonafide});
  }

  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  Vector cm_direction_;
};

}  // namespace

SyntheticData generate_synthetic(const SynthConfig& config) {
  config.validate();
  SyntheticData data;
  Generator gen(config);
  gen.partition("tr", config.train_speakers, data, data.train_trials, true);
  gen.partition("dv", config.dev_speakers, data, data.dev_trials, false);
  gen.partition("ev", config.eval_speakers, data, data.eval_trials, false);
  return data;
}

void write_synthetic(const SyntheticData& data,
                     const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory '" + dir.string() +
                  "': " + ec.message());
  }
  save_manifest(data.manifest, dir / kManifestFile);
  save_embeddings(data.asv, dir / kAsvEmbeddingFile);
  save_embeddings(data.cm, dir / kCmEmbeddingFile);
  save_trials(data.train_trials, dir / kTrainTrialsFile);
  save_trials(data.dev_trials, dir / kDevTrialsFile);
  save_trials(data.eval_trials, dir / kEvalTrialsFile);
}

}  // namespace sasv
