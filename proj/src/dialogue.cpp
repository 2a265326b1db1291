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

#include "teachplay/dialogue.hpp"

#include "teachplay/error.hpp"

namespace teachplay {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::EmptyPassage: return "EmptyPassage";
    case ErrorCode::EmptyConversation: return "EmptyConversation";
    case ErrorCode::EmptyHistory: return "EmptyHistory";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MalformedLogits: return "MalformedLogits";
    case ErrorCode::MalformedDialogue: return "MalformedDialogue";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::PassageMissing: return "PassageMissing";
    case ErrorCode::IncompleteRollout: return "IncompleteRollout";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DivergedParameters: return "DivergedParameters";
    case ErrorCode::NoMaskableEntities: return "NoMaskableEntities";
    case ErrorCode::NoQuestions: return "NoQuestions";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::UnknownPassage: return "UnknownPassage";
    case ErrorCode::UnknownCheckpoint: return "UnknownCheckpoint";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::SessionClosed: return "SessionClosed";
    case ErrorCode::EmptyUtterance: return "EmptyUtterance";
    case ErrorCode::WrongState: return "WrongState";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::Busy: return "Busy";
  }
  return "Unknown";
}

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::Wikipedia: return "wikipedia";
    case SourceKind::News: return "news";
    case SourceKind::PaperAbstract: return "paper_abstract";
    case SourceKind::Other: return "other";
  }
  return "other";
}

SourceKind source_kind_from_string(std::string_view s) {
  if (s == "wikipedia") return SourceKind::Wikipedia;
  if (s == "news") return SourceKind::News;
  if (s == "paper_abstract") return SourceKind::PaperAbstract;
  return SourceKind::Other;
}

Passage make_passage(std::string id, std::string text, SourceKind source,
                     std::optional<std::size_t> truncated_to) {
  Passage p;
  p.id = std::move(id);
  p.text = std::move(text);
  p.tokens = tokenize(p.text);
  p.sentences = split_sentences(p.text);
  p.source = source;
  p.truncated_to = truncated_to;
  return p;
}

std::string_view to_string(Speaker speaker) {
  return speaker == Speaker::Teacher ? "teacher" : "student";
}

Speaker speaker_from_string(std::string_view s) {
  if (s == "teacher") return Speaker::Teacher;
  if (s == "student") return Speaker::Student;
  fail(ErrorCode::MalformedDialogue, "unknown speaker '" + std::string(s) + "'");
}

std::string_view to_string(DecodeMode mode) {
  return mode == DecodeMode::Greedy ? "greedy" : "sampled";
}

Conversation Conversation::from_utterances(std::string passage_id,
                                           const std::vector<std::string>& utterances) {
  Conversation c(std::move(passage_id));
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    c.append(i % 2 == 0 ? Speaker::Teacher : Speaker::Student, utterances[i]);
  }
  return c;
}

std::optional<Speaker> Conversation::next_speaker() const {
  if (turns_.empty()) return Speaker::Teacher;
  return turns_.back().speaker == Speaker::Teacher ? Speaker::Student : Speaker::Teacher;
}

void Conversation::append(Speaker speaker, std::string text, std::optional<Decision> decision) {
  if (speaker != *next_speaker()) {
    fail(ErrorCode::MalformedDialogue,
         "turn " + std::to_string(turns_.size()) + " breaks teacher/student alternation");
  }
  Turn t;
  t.speaker = speaker;
  t.tokens = tokenize(text);
  t.text = std::move(text);
  t.decision = std::move(decision);
  turns_.push_back(std::move(t));
  if (speaker == Speaker::Teacher) ++n_teacher_;
}

std::vector<std::size_t> Conversation::teacher_turn_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < turns_.size(); ++i) {
    if (turns_[i].speaker == Speaker::Teacher) idx.push_back(i);
  }
  return idx;
}

TokenSeq Conversation::history_tokens(std::size_t upto) const {
  TokenSeq out;
  for (std::size_t i = 0; i < upto && i < turns_.size(); ++i) {
    out.tokens.insert(out.tokens.end(), turns_[i].tokens.tokens.begin(),
                      turns_[i].tokens.tokens.end());
    out.source_len_chars += turns_[i].text.size();
  }
  return out;
}

std::string Conversation::history_text(std::size_t upto) const {
  std::string out;
  for (std::size_t i = 0; i < upto && i < turns_.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += turns_[i].text;
  }
  return out;
}

TokenSeq Conversation::teacher_tokens() const {
  TokenSeq out;
  for (const auto& t : turns_) {
    if (t.speaker != Speaker::Teacher) continue;
    out.tokens.insert(out.tokens.end(), t.tokens.tokens.begin(), t.tokens.tokens.end());
    out.source_len_chars += t.text.size();
  }
  return out;
}

const Turn* Conversation::last_student_turn() const {
  for (auto it = turns_.rbegin(); it != turns_.rend(); ++it) {
    if (it->speaker == Speaker::Student) return &*it;
  }
  return nullptr;
}

std::vector<std::string> Conversation::utterances() const {
  std::vector<std::string> out;
  out.reserve(turns_.size());
  for (const auto& t : turns_) out.push_back(t.text);
  return out;
}

void validate_dialogue(const Dialogue& dialogue) {
  if (dialogue.turns.empty()) {
    fail(ErrorCode::MalformedDialogue, "dialogue '" + dialogue.dialogue_id + "' has no turns");
  }
  for (std::size_t i = 0; i < dialogue.turns.size(); ++i) {
    const Speaker expected = i % 2 == 0 ? Speaker::Teacher : Speaker::Student;
    if (dialogue.turns[i].first != expected) {
      fail(ErrorCode::MalformedDialogue, "dialogue '" + dialogue.dialogue_id + "' turn " +
                                             std::to_string(i) +
                                             " breaks teacher/student alternation");
    }
  }
}

}  // namespace teachplay
