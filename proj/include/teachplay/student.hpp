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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "teachplay/dialogue.hpp"

namespace teachplay {

enum class StudentCategory { InfoSeeking, OpenStatement };

struct StudentRule {
  StudentCategory category;
  std::string_view text;  // at most one "{entity}" slot
};

const std::vector<StudentRule>& info_seeking_rules();
const std::vector<StudentRule>& open_statement_rules();

/// The student bot. It only ever sees the conversation; there is no way to
/// hand it the passage.
class Student {
 public:
  virtual ~Student() = default;
  /// Reply to a history ending in a teacher turn. Throws EmptyHistory.
  virtual std::string respond(const Conversation& history, std::uint64_t seed) const = 0;
  virtual std::string name() const = 0;
};

struct RuleStudentConfig {
  double info_seeking_prob = 0.6;
};

class RuleStudent final : public Student {
 public:
  explicit RuleStudent(RuleStudentConfig config = {});
  std::string respond(const Conversation& history, std::uint64_t seed) const override;
  std::string name() const override { return "rules"; }

 private:
  RuleStudentConfig config_;
};

/// External student: POST /respond {"history": [...]} -> {"utterance": "..."}.
class HttpStudent final : public Student {
 public:
  explicit HttpStudent(std::string base_url);
  std::string respond(const Conversation& history, std::uint64_t seed) const override;
  std::string name() const override { return "url=" + base_url_; }

 private:
  std::string base_url_;
};

/// Entities a student may ask about: capitalized runs, numbers, quoted spans.
std::vector<std::string> student_entities(std::string_view teacher_utterance);

/// Every reply RuleStudent can produce after `teacher_utterance`.
std::vector<std::string> response_closure(std::string_view teacher_utterance);

}  // namespace teachplay
