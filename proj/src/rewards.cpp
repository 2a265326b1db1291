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

#include "teachplay/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "teachplay/error.hpp"

namespace teachplay {

std::string_view to_string(AttributionMode mode) {
  switch (mode) {
    case AttributionMode::PerTurnTeacher: return "per_turn_teacher";
    case AttributionMode::PerTurnBoth: return "per_turn_both";
    case AttributionMode::EndOfConversation: return "end_of_conversation";
  }
  return "per_turn_teacher";
}

AttributionMode attribution_mode_from_string(std::string_view s) {
  if (s == "per_turn_teacher" || s == "teacher") return AttributionMode::PerTurnTeacher;
  if (s == "per_turn_both" || s == "both") return AttributionMode::PerTurnBoth;
  if (s == "end_of_conversation" || s == "end") return AttributionMode::EndOfConversation;
  fail(ErrorCode::InvalidArgument, "unknown attribution mode '" + std::string(s) + "'");
}

void RewardConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "beta must lie in [0, 1], got " + std::to_string(beta));
  }
  if (!(cov_clip > 0.0)) {
    fail(ErrorCode::InvalidArgument, "cov_clip must be positive, got " + std::to_string(cov_clip));
  }
}

nlohmann::json to_json(const RewardBreakdown& r) {
  return {{"r_cov", r.r_cov},
          {"r_cov_raw", r.r_cov_raw},
          {"r_coh", r.r_coh},
          {"r_mixed", r.r_mixed},
          {"clipped", r.clipped}};
}

CoverageReward coverage_reward(const TokenSeq& passage, const TokenSeq& history,
                               const TokenSeq& utterance, const RewardConfig& cfg) {
  if (passage.empty()) fail(ErrorCode::EmptyPassage, "coverage reward needs a non-empty passage");
  CoverageReward out;
  out.r_cov_raw = rouge_1_f1(passage, concat(history, utterance)) - rouge_1_f1(passage, history);
  out.clipped = out.r_cov_raw > cfg.cov_clip;
  out.r_cov = std::min(out.r_cov_raw, cfg.cov_clip);
  return out;
}

RewardBreakdown combine(const CoverageReward& cov, double r_coh, double beta) {
  RewardBreakdown r;
  r.r_cov = cov.r_cov;
  r.r_cov_raw = cov.r_cov_raw;
  r.clipped = cov.clipped;
  r.r_coh = r_coh;
  r.r_mixed = mixed_reward(r.r_cov, r_coh, beta);
  return r;
}

RewardBreakdown score_teacher_utterance(const Passage& passage, const Conversation& conversation,
                                        std::size_t upto, std::string_view utterance,
                                        const std::optional<std::string>& follow_up,
                                        const RewardConfig& cfg, const CoherenceScorer& scorer) {
  const TokenSeq history = conversation.history_tokens(upto);
  TokenSeq credited = tokenize(utterance);
  if (cfg.attribution == AttributionMode::PerTurnBoth && follow_up) {
    credited = concat(credited, tokenize(*follow_up));
  }
  const CoverageReward cov = coverage_reward(passage.tokens, history, credited, cfg);
  const double coh = scorer.score(conversation.history_text(upto), utterance).value;
  return combine(cov, coh, cfg.beta);
}

RewardBreakdown end_of_conversation_reward(const Passage& passage,
                                           const std::vector<TokenSeq>& teacher_utterances,
                                           const std::vector<double>& turn_coherence,
                                           const RewardConfig& cfg) {
  TokenSeq all;
  for (const auto& u : teacher_utterances) all = concat(all, u);
  const CoverageReward cov = coverage_reward(passage.tokens, TokenSeq{}, all, cfg);
  const double coh =
      turn_coherence.empty()
          ? 0.0
          : std::accumulate(turn_coherence.begin(), turn_coherence.end(), 0.0) /
                static_cast<double>(turn_coherence.size());
  return combine(cov, coh, cfg.beta);
}

std::vector<RewardBreakdown> attribute_rewards(const Passage& passage,
                                               const Conversation& conversation,
                                               const RewardConfig& cfg,
                                               const CoherenceScorer& scorer) {
  const auto teacher = conversation.teacher_turn_indices();
  if (teacher.empty()) {
    fail(ErrorCode::EmptyConversation, "conversation has no teacher turn to reward");
  }
  const auto& turns = conversation.turns();
  std::vector<RewardBreakdown> out;
  out.reserve(teacher.size());
  for (std::size_t idx : teacher) {
    std::optional<std::string> follow_up;
    if (idx + 1 < turns.size()) follow_up = turns[idx + 1].text;
    out.push_back(
        score_teacher_utterance(passage, conversation, idx, turns[idx].text, follow_up, cfg, scorer));
  }
  if (cfg.attribution == AttributionMode::EndOfConversation) {
    std::vector<TokenSeq> utterances;
    std::vector<double> coherence;
    for (std::size_t k = 0; k < teacher.size(); ++k) {
      utterances.push_back(turns[teacher[k]].tokens);
      coherence.push_back(out[k].r_coh);
    }
    const RewardBreakdown total = end_of_conversation_reward(passage, utterances, coherence, cfg);
    std::fill(out.begin(), out.end(), total);
  }
  return out;
}

}  // namespace teachplay
