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

#include <doctest.h>

#include "oracles.hpp"
#include "teachplay/selfplay.hpp"

using namespace teachplay;

namespace {

const Passage& passage() {
  static const Passage p = make_passage(
      "p",
      "Kestrel Island is a volcanic island in the Northern Ocean. It covers 86 square "
      "kilometres. However, it rises to 1,204 metres at Mount Harrow. Puffins nest on its cliffs.");
  return p;
}

PolicyParams tilted() {
  PolicyParams p;
  p.weights << 2.0, 0.5, 0.3, 0.0, -1.0, 0.0;
  return p;
}

}  // namespace

TEST_CASE("three teacher turns give T,S,T,S,T") {
  const RuleStudent s;
  const auto c = run_conversation(passage(), tilted(), s, DecodeMode::Sampled, 5);
  REQUIRE(c.size() == 5);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c.turns()[i].speaker == (i % 2 == 0 ? Speaker::Teacher : Speaker::Student));
  }
  CHECK(c.n_teacher_turns() == 3);
  CHECK(c.turns()[0].decision.has_value());
}

TEST_CASE("one teacher turn is a single utterance") {
  SelfPlayOptions o;
  o.n_turns = 1;
  const auto c = run_conversation(passage(), tilted(), RuleStudent{}, DecodeMode::Greedy, 1, o);
  CHECK(c.size() == 1);
  o.n_turns = 0;
  CHECK_THROWS_AS(run_conversation(passage(), tilted(), RuleStudent{}, DecodeMode::Greedy, 1, o),
                  Error);
}

TEST_CASE("conversations are reproducible") {
  const RuleStudent s;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto a = run_conversation(passage(), tilted(), s, DecodeMode::Sampled, seed);
    const auto b = run_conversation(passage(), tilted(), s, DecodeMode::Sampled, seed);
    CHECK(a.utterances() == b.utterances());
  }
}

TEST_CASE("teacher utterances come from the candidate set") {
  const RuleStudent s;
  const auto c = run_conversation(passage(), tilted(), s, DecodeMode::Sampled, 9);
  Conversation prefix("p");
  for (const auto& t : c.turns()) {
    if (t.speaker == Speaker::Teacher) {
      bool found = false;
      for (const auto& cand : gen_candidates(passage(), prefix)) found = found || cand.text == t.text;
      CHECK(found);
    }
    prefix.append(t.speaker, t.text);
  }
}

TEST_CASE("deterministic policy: sampled equals greedy") {
  // Candidates differ in length, so a huge length weight leaves one action
  // with probability exactly 1.
  PolicyParams p;
  p.weights(kLength) = 1e6;
  RewardConfig cfg;
  const auto r = dual_rollout(passage(), p, RuleStudent{}, 4, cfg, LexicalScorer{});
  REQUIRE(r.per_turn.size() == 3);
  for (const auto& t : r.per_turn) {
    CHECK(t.sampled_decision.chosen_index == t.greedy_decision.chosen_index);
    CHECK(t.sampled_text == t.greedy_text);
    CHECK(t.advantage() == 0.0);
  }
}

TEST_CASE("dual rollout: shared candidate sets and reproducible advantages") {
  RewardConfig cfg;
  const LexicalScorer scorer;
  const RuleStudent s;
  const auto a = dual_rollout(passage(), PolicyParams{}, s, 17, cfg, scorer);
  const auto b = dual_rollout(passage(), PolicyParams{}, s, 17, cfg, scorer);
  REQUIRE(a.per_turn.size() == 3);
  CHECK(a.sampled.size() == a.greedy.size());
  for (std::size_t n = 0; n < 3; ++n) {
    CHECK(a.per_turn[n].advantage() == b.per_turn[n].advantage());
    CHECK(a.per_turn[n].greedy_decision.chosen_index == 0);
  }
  // Student replies are identical across the pair in the default mode.
  CHECK(a.sampled.turns()[1].text == a.greedy.turns()[1].text);
}

TEST_CASE("greedy baseline is scored against the sampled history") {
  RewardConfig cfg;
  const LexicalScorer scorer;
  const auto r = dual_rollout(passage(), tilted(), RuleStudent{}, 23, cfg, scorer);
  const auto idx = r.sampled.teacher_turn_indices();
  for (std::size_t n = 0; n < r.per_turn.size(); ++n) {
    const auto expect = score_teacher_utterance(passage(), r.sampled, idx[n], r.per_turn[n].greedy_text,
                                                std::nullopt, cfg, scorer);
    CHECK(r.per_turn[n].greedy_reward.r_mixed == doctest::Approx(expect.r_mixed));
  }
  const auto sampled = attribute_rewards(passage(), r.sampled, cfg, scorer);
  for (std::size_t n = 0; n < sampled.size(); ++n) {
    CHECK(r.per_turn[n].sampled_reward.r_mixed == sampled[n].r_mixed);
  }
}

TEST_CASE("conversation json") {
  const auto c = Conversation::from_utterances("p", {"Hi there.", "Hello."});
  const auto j = conversation_to_json(c);
  CHECK(j["passage_id"] == "p");
  REQUIRE(j["turns"].size() == 2);
  CHECK(j["turns"][0]["speaker"] == "teacher");
  CHECK(j["turns"][1]["text"] == "Hello.");
}

TEST_CASE("conversation alternation is enforced") {
  Conversation c("p");
  CHECK_THROWS_AS(c.append(Speaker::Student, "first"), Error);
  c.append(Speaker::Teacher, "one");
  CHECK_THROWS_AS(c.append(Speaker::Teacher, "two"), Error);
  c.append(Speaker::Student, "ok");
  CHECK(c.history_text() == "one\nok");
  CHECK(c.last_student_turn()->text == "ok");
}
