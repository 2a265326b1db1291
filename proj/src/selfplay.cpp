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

#include "teachplay/selfplay.hpp"

#include "teachplay/error.hpp"

namespace teachplay {
namespace {

constexpr std::uint64_t kTeacherStream = 0;
constexpr std::uint64_t kStudentStreamBase = 1000;

bool student_speaks_after(std::size_t turn, const SelfPlayOptions& options) {
  return turn + 1 < options.n_turns || options.student_replies_last;
}

void check_options(const SelfPlayOptions& options) {
  if (options.n_turns == 0) fail(ErrorCode::InvalidArgument, "n_turns must be at least 1");
}

}  // namespace

std::uint64_t student_seed(std::uint64_t rollout_seed, std::size_t turn) {
  return mix_seed(rollout_seed, kStudentStreamBase + turn);
}

Conversation run_conversation(const Passage& passage, const PolicyParams& teacher,
                              const Student& student, DecodeMode mode, std::uint64_t seed,
                              const SelfPlayOptions& options) {
  check_options(options);
  Rng rng(mix_seed(seed, kTeacherStream));
  Conversation conv(passage.id);
  for (std::size_t n = 0; n < options.n_turns; ++n) {
    auto candidates = gen_candidates(passage, conv);
    Decision d = decide(teacher, stack_features(candidates), mode, rng);
    const std::size_t chosen = d.chosen_index;
    conv.append(Speaker::Teacher, std::move(candidates[chosen].text), std::move(d));
    if (student_speaks_after(n, options)) {
      conv.append(Speaker::Student, student.respond(conv, student_seed(seed, n)));
    }
  }
  return conv;
}

Rollout dual_rollout(const Passage& passage, const PolicyParams& teacher, const Student& student,
                     std::uint64_t seed, const RewardConfig& reward_cfg,
                     const CoherenceScorer& scorer, const SelfPlayOptions& options) {
  check_options(options);
  Rng rng(mix_seed(seed, kTeacherStream));
  Rollout out;
  out.sampled = Conversation(passage.id);
  out.greedy = Conversation(passage.id);

  for (std::size_t n = 0; n < options.n_turns; ++n) {
    TurnRecord rec;
    auto candidates = gen_candidates(passage, out.sampled);
    rec.features = stack_features(candidates);
    rec.sampled_decision = decide(teacher, rec.features, DecodeMode::Sampled, rng);
    rec.sampled_text = candidates[rec.sampled_decision.chosen_index].text;

    if (options.full_greedy_trajectory) {
      auto greedy_candidates = gen_candidates(passage, out.greedy);
      rec.greedy_decision =
          decide(teacher, stack_features(greedy_candidates), DecodeMode::Greedy, rng);
      rec.greedy_text = greedy_candidates[rec.greedy_decision.chosen_index].text;
    } else {
      rec.greedy_decision = decide(teacher, rec.features, DecodeMode::Greedy, rng);
      rec.greedy_text = candidates[rec.greedy_decision.chosen_index].text;
    }

    out.sampled.append(Speaker::Teacher, rec.sampled_text, rec.sampled_decision);
    out.greedy.append(Speaker::Teacher, rec.greedy_text, rec.greedy_decision);
    if (student_speaks_after(n, options)) {
      const std::uint64_t s = student_seed(seed, n);
      std::string reply = student.respond(out.sampled, s);
      out.greedy.append(Speaker::Student,
                        options.full_greedy_trajectory ? student.respond(out.greedy, s) : reply);
      out.sampled.append(Speaker::Student, std::move(reply));
    }
    out.per_turn.push_back(std::move(rec));
  }

  const auto sampled_rewards = attribute_rewards(passage, out.sampled, reward_cfg, scorer);
  for (std::size_t n = 0; n < out.per_turn.size(); ++n) {
    out.per_turn[n].sampled_reward = sampled_rewards[n];
  }

  if (options.full_greedy_trajectory) {
    const auto greedy_rewards = attribute_rewards(passage, out.greedy, reward_cfg, scorer);
    for (std::size_t n = 0; n < out.per_turn.size(); ++n) {
      out.per_turn[n].greedy_reward = greedy_rewards[n];
    }
    return out;
  }

  // Step-level baseline: each greedy utterance is scored against the sampled
  // history it was chosen from.
  const auto teacher_idx = out.sampled.teacher_turn_indices();
  std::vector<TokenSeq> greedy_tokens;
  std::vector<double> greedy_coherence;
  for (std::size_t n = 0; n < out.per_turn.size(); ++n) {
    TurnRecord& rec = out.per_turn[n];
    const std::size_t idx = teacher_idx[n];
    std::optional<std::string> follow_up;
    if (reward_cfg.attribution == AttributionMode::PerTurnBoth && student_speaks_after(n, options)) {
      std::vector<std::string> prefix;
      for (std::size_t k = 0; k < idx; ++k) prefix.push_back(out.sampled.turns()[k].text);
      prefix.push_back(rec.greedy_text);
      follow_up = student.respond(Conversation::from_utterances(passage.id, prefix),
                                  student_seed(seed, n));
    }
    rec.greedy_reward = score_teacher_utterance(passage, out.sampled, idx, rec.greedy_text,
                                                follow_up, reward_cfg, scorer);
    greedy_tokens.push_back(tokenize(rec.greedy_text));
    greedy_coherence.push_back(rec.greedy_reward.r_coh);
  }
  if (reward_cfg.attribution == AttributionMode::EndOfConversation) {
    const RewardBreakdown total =
        end_of_conversation_reward(passage, greedy_tokens, greedy_coherence, reward_cfg);
    for (auto& rec : out.per_turn) rec.greedy_reward = total;
  }
  return out;
}

nlohmann::json conversation_to_json(const Conversation& conversation,
                                    const std::vector<RewardBreakdown>& rewards) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : conversation.turns()) {
    turns.push_back({{"speaker", to_string(t.speaker)}, {"text", t.text}});
  }
  nlohmann::json r = nlohmann::json::array();
  for (const auto& b : rewards) r.push_back(to_json(b));
  return {{"passage_id", conversation.passage_id()}, {"turns", turns}, {"rewards", r}};
}

}  // namespace teachplay
