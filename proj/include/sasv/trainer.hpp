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

#ifndef SASV_TRAINER_HPP_
#define SASV_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sasv/evaluator.hpp"
#include "sasv/model.hpp"
#include "sasv/sampler.hpp"

namespace sasv {

enum class HardSelection { kNegativesOnly, kAllTrials };

std::string_view to_string(HardSelection mode);
HardSelection parse_hard_selection(std::string_view text);

struct TrainConfig {
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  int epochs = 40;
  double lr_decay_per_epoch = 0.95;
  std::size_t hard_negative_top_n = 100;
  HardSelection hard_selection = HardSelection::kNegativesOnly;
  Index m = 16;
  Index k = 10;
  Index hidden = 64;
  std::uint64_t seed = 0;
  Pooling pooling = Pooling::kAttention;

  /// Throws ConfigError.
  void validate() const;
};

struct OptimizerState {
  BackendParams velocity;
  double lr = 0;
  int epoch = 0;        // completed epochs
  std::size_t batch = 0;  // batch within the current epoch

  static OptimizerState start(const ModelDims& dims, const TrainConfig& cfg);
};

/// Learning rate in effect after `epoch` completed epochs.
double learning_rate_at(const TrainConfig& cfg, int epoch);

/// -log p for a positive pair, -log(1 - p) for a negative one, with p clamped
/// to [1e-12, 1 - 1e-12].
double bce_loss(double p, PairLabel label);

/// Indices (ascending) of the pairs that contribute to the batch loss. With
/// kNegativesOnly every positive is kept together with the top_n negatives of
/// largest loss; with kAllTrials the top_n pairs overall. Ties keep the
/// earlier pair.
std::vector<std::size_t> select_hard(std::span<const double> losses,
                                     std::span<const PairLabel> labels,
                                     std::size_t top_n,
                                     HardSelection mode =
                                         HardSelection::kNegativesOnly);

struct BatchResult {
  double loss = 0;                    // mean over selected pairs
  std::vector<double> pair_losses;    // every pair, in pair order
  std::vector<double> pair_probs;     // fused probability per pair
  std::vector<std::size_t> selected;
  BackendParams grads;                // empty dims unless requested
  /// d loss / d pair loss; nonzero exactly on the selected pairs.
  std::vector<double> loss_weights;
};

struct BatchOptions {
  bool gradients = true;
  /// Optional fixed selection (used by finite differences so that the
  /// subset does not switch between perturbed evaluations).
  const std::vector<std::size_t>* fixed_selection = nullptr;
};

BatchResult evaluate_batch(const BackendParams& params, const SpeakerPool& pool,
                           const MiniBatch& batch,
                           std::span<const TrainingPair> pairs,
                           const TrainConfig& cfg,
                           const BatchOptions& options = {});

struct TrialGradient {
  double loss = 0;
  double prob = 0;
  BackendParams grads;
};

/// Cross-entropy of a single trial and its gradient with respect to every
/// parameter. Spoofed enrollment rows are zeroed and excluded from attention.
TrialGradient trial_gradient(const BackendParams& params,
                             const Eigen::Ref<const Vector>& q_asv,
                             const Eigen::Ref<const Vector>& q_cm,
                             const EnrollmentSet& enroll, PairLabel label,
                             Pooling pooling);

/// v <- mu v + (g + lambda theta); theta <- theta - lr v. Throws
/// NonFiniteError naming the parameter, epoch and batch before touching any
/// tensor when a gradient is not finite.
void sgd_step(BackendParams& params, const BackendParams& grads,
              OptimizerState& state, const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;  // 1-based
  double lr = 0;  // rate used during the epoch
  double mean_loss = 0;
  std::optional<EerReport> dev;
};

/// "epoch<TAB>lr<TAB>loss[<TAB>sv<TAB>spf<TAB>sasv]" with round-trip decimals;
/// a missing dev class prints as "absent".
std::string format_log_line(const EpochLog& log);

struct TrainHooks {
  /// Scores the development trials with the current parameters.
  std::function<EerReport(const BackendParams&)> dev_eval;
  std::function<void(const EpochLog&, const BackendParams&)> on_epoch;
};

struct TrainResult {
  BackendParams params;
  std::vector<EpochLog> log;
};

TrainResult train(const SpeakerPool& pool, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace sasv

#endif  // SASV_TRAINER_HPP_
