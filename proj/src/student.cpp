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

#include "teachplay/student.hpp"

#include <algorithm>

#include <httplib.h>
#include <json.hpp>

#include "teachplay/error.hpp"
#include "teachplay/rng.hpp"

namespace teachplay {
namespace {

std::string fill(std::string_view tmpl, std::string_view entity) {
  std::string out(tmpl);
  const auto pos = out.find("{entity}");
  if (pos != std::string::npos) out.replace(pos, 8, entity);
  return out;
}

}  // namespace

const std::vector<StudentRule>& info_seeking_rules() {
  static const std::vector<StudentRule> rules = {
      {StudentCategory::InfoSeeking, "What is {entity}?"},
      {StudentCategory::InfoSeeking, "Tell me more about {entity}."},
      {StudentCategory::InfoSeeking, "Why is {entity} important?"},
  };
  return rules;
}

const std::vector<StudentRule>& open_statement_rules() {
  static const std::vector<StudentRule> rules = {
      {StudentCategory::OpenStatement, "That's interesting!"},
      {StudentCategory::OpenStatement, "Go on."},
      {StudentCategory::OpenStatement, "What else can you tell me?"},
  };
  return rules;
}

std::vector<std::string> student_entities(std::string_view teacher_utterance) {
  std::vector<std::string> out;
  for (auto& e : extract_entities(teacher_utterance, /*include_quoted=*/true)) {
    if (std::find(out.begin(), out.end(), e.text) == out.end()) out.push_back(std::move(e.text));
  }
  return out;
}

std::vector<std::string> response_closure(std::string_view teacher_utterance) {
  std::vector<std::string> out;
  for (const auto& rule : info_seeking_rules()) {
    for (const auto& e : student_entities(teacher_utterance)) out.push_back(fill(rule.text, e));
  }
  for (const auto& rule : open_statement_rules()) out.emplace_back(rule.text);
  return out;
}

RuleStudent::RuleStudent(RuleStudentConfig config) : config_(config) {
  if (!(config_.info_seeking_prob >= 0.0 && config_.info_seeking_prob <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "info_seeking_prob must lie in [0, 1]");
  }
}

std::string RuleStudent::respond(const Conversation& history, std::uint64_t seed) const {
  if (history.empty()) fail(ErrorCode::EmptyHistory, "student needs a teacher utterance to answer");
  const Turn& last = history.turns().back();
  if (last.speaker != Speaker::Teacher) {
    fail(ErrorCode::MalformedDialogue, "student can only answer a teacher turn");
  }
  Rng rng(seed);
  const bool info_seeking = uniform01(rng) < config_.info_seeking_prob;
  const std::size_t template_draw = uniform_index(rng, 3);
  const auto entities = student_entities(last.text);
  if (info_seeking && !entities.empty()) {
    const auto& rules = info_seeking_rules();
    const std::string& entity = entities[uniform_index(rng, entities.size())];
    return fill(rules[template_draw % rules.size()].text, entity);
  }
  const auto& open = open_statement_rules();
  return std::string(open[template_draw % open.size()].text);
}

HttpStudent::HttpStudent(std::string base_url) : base_url_(std::move(base_url)) {}

std::string HttpStudent::respond(const Conversation& history, std::uint64_t /*seed*/) const {
  if (history.empty()) fail(ErrorCode::EmptyHistory, "student needs a teacher utterance to answer");
  httplib::Client client(base_url_);
  client.set_connection_timeout(2);
  client.set_read_timeout(10);
  const nlohmann::json body = {{"history", history.utterances()}};
  auto res = client.Post("/respond", body.dump(), "application/json");
  if (!res || res->status != 200) {
    fail(ErrorCode::BackendUnavailable, "student service at " + base_url_ + " unavailable");
  }
  const auto reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("utterance") || !reply["utterance"].is_string()) {
    fail(ErrorCode::BackendUnavailable, "student service reply lacks an utterance");
  }
  return reply["utterance"].get<std::string>();
}

}  // namespace teachplay
