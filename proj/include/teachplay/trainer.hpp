// Copyright 2026 The Teachplay Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Self-critic policy-gradient training of the teacher.
//
// RL loss of one rollout, with advantage A_n = R(sampled_n) - R(greedy_n):
//   L_rl = -Σ_n A_n log p(sampled action_n)
// MLE anchor loss of one reference response projected onto the action space:
//   L_mle = -log p(projected action)
// A cycle makes `a` MLE batch updates followed by `b` RL batch updates, plain
// gradient descent, losses averaged over the batch.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "teachplay/coherence.hpp"
#include "teachplay/datasets.hpp"
#include "teachplay/error.hpp"
#include "teachplay/policy.hpp"
#include "teachplay/rewards.hpp"
#include "teachplay/selfplay.hpp"
#include "teachplay/student.hpp"

namespace teachplay {

struct TrainConfig {
  double beta = 0.7;
  std::size_t mle_batches_per_cycle = 3;  // a
  std::size_t rl_batches_per_cycle = 1;   // b
  double learning_rate = 1e-3;
  std::size_t steps = 2000;  // cycles
  std::size_t mle_batch_size = 8;
  std::size_t rl_batch_size = 5;
  std::size_t n_turns = 3;
  std::uint64_t seed = 1;
  double cov_clip = 0.5;
  AttributionMode attribution = AttributionMode::PerTurnTeacher;
  CoherenceBackend coherence_backend = CoherenceBackend::LexicalBaseline;
  /// When set, each cycle is one update on gamma * L_rl + (1 - gamma) * L_mle
  /// instead of the a/b interleave.
  std::optional<double> explicit_gamma;
  /// Weight each turn's RL term by the sampled utterance's token count.
  bool weight_by_length = false;
  bool full_greedy_trajectory = false;
  std::size_t workers = 1;
  std::size_t checkpoint_every = 100;
  PolicyParams init;

  /// Throws InvalidArgument.
  void validate() const;
  RewardConfig reward_config() const;
  SelfPlayOptions selfplay_options() const;
  nlohmann::json to_json() const;
};

struct LossGrad {
  double loss = 0.0;
  Features grad = Features::Zero();
};

/// Index of the candidate with the highest ROUGE-1 F1 against the gold
/// response; lowest index on ties. Throws NoCandidates.
std::size_t project_reference(std::string_view gold_response,
                              const std::vector<Candidate>& candidates);

/// An anchor with its candidate set and projected action resolved.
struct ResolvedAnchor {
  FeatureRows features;
  std::size_t action = 0;
};

ResolvedAnchor resolve_anchor(const AnchorExample& anchor, const Passage& passage);

LossGrad mle_loss_and_grad(const PolicyParams& params, const FeatureRows& features,
                           std::size_t action);

/// Throws PassageMissing when `passage` is null or not the anchor's passage.
LossGrad mle_loss_and_grad(const PolicyParams& params, const AnchorExample& anchor,
                           const Passage* passage);

/// Rewards are constants; log-probabilities are re-evaluated at `params` from
/// the stored candidate features. Throws IncompleteRollout.
LossGrad rl_loss_and_grad(const PolicyParams& params, const Rollout& rollout,
                          bool weight_by_length = false);

enum class UpdateKind : char { Mle = 'M', Rl = 'R', Blended = 'X' };

struct TrainRecord {
  std::size_t step = 0;
  double loss_rl = 0.0;
  double loss_mle = 0.0;
  double mean_r_cov = 0.0;
  double mean_r_coh = 0.0;
  double mean_r_mixed = 0.0;
  double mean_len = 0.0;
  // Not part of the CSV.
  double max_r_cov = 0.0;
  std::size_t n_clipped = 0;
  std::size_t n_turns_scored = 0;
};

struct TrainLog {
  std::vector<TrainRecord> records;

  /// step,loss_rl,loss_mle,mean_r_cov,mean_r_coh,mean_r_mixed,mean_len
  void write_csv(std::ostream& out) const;
  void write_csv(const std::string& path) const;
};

struct TrainResult {
  PolicyParams params;
  TrainLog log;
  std::vector<UpdateKind> trace;
};

/// Raised when an update produces non-finite weights.
class DivergedParametersError : public Error {
 public:
  DivergedParametersError(std::size_t step, PolicyParams last_good)
      : Error(ErrorCode::DivergedParameters,
              "non-finite policy weights at step " + std::to_string(step)),
        step_(step),
        last_good_(last_good) {}
  std::size_t step() const noexcept { return step_; }
  const PolicyParams& last_good() const noexcept { return last_good_; }

 private:
  std::size_t step_;
  PolicyParams last_good_;
};

struct TrainHooks {
  /// Called every config.checkpoint_every cycles with (step, params).
  std::function<void(std::size_t, const PolicyParams&)> on_checkpoint;
  /// Passages anchors are resolved against; defaults to the RL corpus.
  const std::vector<Passage>* anchor_passages = nullptr;
};

/// Throws EmptyCorpus, PassageMissing, DivergedParametersError.
TrainResult train(const TrainConfig& config, const std::vector<Passage>& corpus,
                  const std::vector<AnchorExample>& anchors, const CoherenceScorer& scorer,
                  const Student& student, const TrainHooks& hooks = {});

}  // namespace teachplay
