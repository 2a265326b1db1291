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

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "teachplay/coherence.hpp"
#include "teachplay/policy.hpp"
#include "teachplay/rewards.hpp"
#include "teachplay/student.hpp"

namespace teachplay {

struct SelfPlayOptions {
  std::size_t n_turns = 3;
  /// Student also answers the teacher's last utterance.
  bool student_replies_last = false;
  /// Greedy baseline runs its own conversation instead of being scored
  /// against the sampled history turn by turn.
  bool full_greedy_trajectory = false;
};

/// Seed handed to the student for the reply after teacher turn `turn`.
std::uint64_t student_seed(std::uint64_t rollout_seed, std::size_t turn);

/// Teacher opens, then teacher and student alternate. Throws EmptyPassage,
/// NoCandidates, InvalidArgument for n_turns == 0.
Conversation run_conversation(const Passage& passage, const PolicyParams& teacher,
                              const Student& student, DecodeMode mode, std::uint64_t seed,
                              const SelfPlayOptions& options = {});

struct TurnRecord {
  FeatureRows features;  // candidate set both decisions were taken from
  Decision sampled_decision;
  Decision greedy_decision;
  std::string sampled_text;
  std::string greedy_text;
  RewardBreakdown sampled_reward;
  RewardBreakdown greedy_reward;

  double advantage() const { return sampled_reward.r_mixed - greedy_reward.r_mixed; }
};

struct Rollout {
  Conversation sampled;
  Conversation greedy;
  std::vector<TurnRecord> per_turn;
};

/// Sampled and greedy decisions at every teacher turn, both rewarded.
Rollout dual_rollout(const Passage& passage, const PolicyParams& teacher, const Student& student,
                     std::uint64_t seed, const RewardConfig& reward_cfg,
                     const CoherenceScorer& scorer, const SelfPlayOptions& options = {});

/// {"passage_id", "turns": [{"speaker", "text"}], "rewards": [...]}
nlohmann::json conversation_to_json(const Conversation& conversation,
                                    const std::vector<RewardBreakdown>& rewards = {});

}  // namespace teachplay
