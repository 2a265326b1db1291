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

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "teachplay/student.hpp"

using namespace teachplay;

namespace {

Conversation after(const std::string& teacher) {
  Conversation c("p");
  c.append(Speaker::Teacher, teacher);
  return c;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST_CASE("no entities falls back to an open statement") {
  const RuleStudent s;
  std::set<std::string> open;
  for (const auto& r : open_statement_rules()) open.emplace(r.text);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CHECK(open.count(s.respond(after("the river is slow and wide."), seed)) == 1);
  }
}

TEST_CASE("fixed seed gives a fixed reply") {
  const RuleStudent s;
  const auto c = after("BERT obtains new results");
  CHECK(s.respond(c, 42) == s.respond(c, 42));
  CHECK(contains(student_entities("BERT obtains new results"), "BERT"));
}

TEST_CASE("replies stay inside the template closure") {
  const RuleStudent s;
  const std::string teacher = "Aurelia Vance joined the \"Brightwater Observatory\" in 1891.";
  const auto closure = response_closure(teacher);
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto r = s.respond(after(teacher), seed);
    CHECK(contains(closure, r));
    seen.insert(r);
  }
  CHECK(seen.size() > 3);
}

TEST_CASE("info-seeking share follows the configured probability") {
  const RuleStudent s;
  int info = 0;
  const int n = 4000;
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    const auto r = s.respond(after("Kestrel Island rises to 1,204 metres."), seed);
    if (r.find("Kestrel") != std::string::npos || r.find("1,204") != std::string::npos) ++info;
  }
  CHECK(std::abs(info / double(n) - 0.6) < 0.03);
  CHECK_THROWS_AS(RuleStudent(RuleStudentConfig{1.5}), Error);
}

TEST_CASE("student never says a passage entity the teacher has not said") {
  const Passage p = make_passage(
      "p", "Tarn Castle stands above Elder Cross. Baron Hugh Tarn raised a fort in 1120.");
  const RuleStudent s;
  for (const auto& sentence : p.sentences) {
    const auto said = tokenize(sentence);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto reply = tokenize(s.respond(after(sentence), seed));
      for (const auto& e : extract_entities(p.text)) {
        for (const auto& tok : tokenize(e.text).tokens) {
          const bool in_reply = contains(reply.tokens, tok);
          const bool in_teacher = contains(said.tokens, tok);
          CHECK((!in_reply || in_teacher));
        }
      }
    }
  }
}

TEST_CASE("student errors") {
  const RuleStudent s;
  CHECK_THROWS_AS(s.respond(Conversation("p"), 1), Error);
  const HttpStudent remote("http://127.0.0.1:1");
  try {
    remote.respond(after("Hello there."), 1);
    FAIL("expected BackendUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BackendUnavailable);
  }
}
