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

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "teachplay/coherence.hpp"
#include "teachplay/dialogue.hpp"

namespace teachplay {

/// Which utterances a coverage delta is credited to.
enum class AttributionMode {
  PerTurnTeacher,     // teacher utterance against everything said before it
  PerTurnBoth,        // delta also includes the student reply that follows
  EndOfConversation,  // one score for all teacher utterances, copied to every turn
};

enum class CoherenceBackend { SoftmaxClassifier, ConstantLabels, LexicalBaseline };

std::string_view to_string(AttributionMode mode);
AttributionMode attribution_mode_from_string(std::string_view s);

struct RewardConfig {
  double beta = 0.7;
  double cov_clip = 0.5;
  AttributionMode attribution = AttributionMode::PerTurnTeacher;
  CoherenceBackend coherence_backend = CoherenceBackend::LexicalBaseline;

  /// Throws InvalidArgument unless 0 <= beta <= 1 and cov_clip > 0.
  void validate() const;
};

struct CoverageReward {
  double r_cov_raw = 0.0;
  double r_cov = 0.0;
  bool clipped = false;
};

struct RewardBreakdown {
  double r_cov = 0.0;
  double r_cov_raw = 0.0;
  double r_coh = 0.0;
  double r_mixed = 0.0;
  bool clipped = false;
};

nlohmann::json to_json(const RewardBreakdown& r);

/// ROUGE-1(P, H ⊕ U) - ROUGE-1(P, H), clipped from above at cfg.cov_clip.
/// Negative deltas pass through. Throws EmptyPassage.
CoverageReward coverage_reward(const TokenSeq& passage, const TokenSeq& history,
                               const TokenSeq& utterance, const RewardConfig& cfg);

inline double mixed_reward(double r_cov, double r_coh, double beta) {
  return beta * r_cov + (1.0 - beta) * r_coh;
}

RewardBreakdown combine(const CoverageReward& cov, double r_coh, double beta);

/// Reward of a teacher utterance spoken after turns [0, upto) of
/// `conversation`. `follow_up` is the student reply credited under
/// PerTurnBoth (ignored by the other modes).
RewardBreakdown score_teacher_utterance(const Passage& passage, const Conversation& conversation,
                                        std::size_t upto, std::string_view utterance,
                                        const std::optional<std::string>& follow_up,
                                        const RewardConfig& cfg, const CoherenceScorer& scorer);

/// One breakdown over the concatenated teacher utterances; r_coh is the mean
/// of the per-turn coherence values.
RewardBreakdown end_of_conversation_reward(const Passage& passage,
                                           const std::vector<TokenSeq>& teacher_utterances,
                                           const std::vector<double>& turn_coherence,
                                           const RewardConfig& cfg);

/// Per-teacher-turn breakdowns for a finished conversation under
/// cfg.attribution. Throws EmptyConversation.
std::vector<RewardBreakdown> attribute_rewards(const Passage& passage,
                                               const Conversation& conversation,
                                               const RewardConfig& cfg,
                                               const CoherenceScorer& scorer);

}  // namespace teachplay
