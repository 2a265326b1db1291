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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "teachplay/text.hpp"

namespace teachplay {

enum class SourceKind { Wikipedia, News, PaperAbstract, Other };

std::string_view to_string(SourceKind kind);
SourceKind source_kind_from_string(std::string_view s);

/// Grounding document. Only the teacher ever sees one.
struct Passage {
  std::string id;
  std::string text;
  TokenSeq tokens;
  std::vector<std::string> sentences;
  SourceKind source = SourceKind::Other;
  std::optional<std::size_t> truncated_to;
};

Passage make_passage(std::string id, std::string text, SourceKind source = SourceKind::Other,
                     std::optional<std::size_t> truncated_to = std::nullopt);

enum class Speaker { Teacher, Student };

std::string_view to_string(Speaker speaker);
Speaker speaker_from_string(std::string_view s);

enum class DecodeMode { Greedy, Sampled };

std::string_view to_string(DecodeMode mode);

/// One teacher action choice over a candidate set.
struct Decision {
  std::size_t chosen_index = 0;
  std::vector<double> probs;
  double log_prob = 0.0;
  DecodeMode mode = DecodeMode::Greedy;
};

struct Turn {
  Speaker speaker = Speaker::Teacher;
  std::string text;
  TokenSeq tokens;
  std::optional<Decision> decision;
};

/// Teacher-initiated, strictly alternating exchange.
class Conversation {
 public:
  Conversation() = default;
  explicit Conversation(std::string passage_id) : passage_id_(std::move(passage_id)) {}

  /// Builds a conversation from utterance strings, speakers alternating from
  /// the teacher.
  static Conversation from_utterances(std::string passage_id,
                                      const std::vector<std::string>& utterances);

  /// Throws MalformedDialogue if `speaker` would break the alternation.
  void append(Speaker speaker, std::string text, std::optional<Decision> decision = {});

  const std::string& passage_id() const noexcept { return passage_id_; }
  const std::vector<Turn>& turns() const noexcept { return turns_; }
  std::size_t size() const noexcept { return turns_.size(); }
  bool empty() const noexcept { return turns_.empty(); }
  std::size_t n_teacher_turns() const noexcept { return n_teacher_; }
  std::optional<Speaker> next_speaker() const;

  /// Indices into turns() of teacher turns, in order.
  std::vector<std::size_t> teacher_turn_indices() const;

  /// Tokens of turns [0, upto), both speakers, concatenated.
  TokenSeq history_tokens(std::size_t upto) const;
  TokenSeq history_tokens() const { return history_tokens(turns_.size()); }

  /// Turn texts [0, upto) joined by newlines; the wire form handed to
  /// coherence scorers.
  std::string history_text(std::size_t upto) const;
  std::string history_text() const { return history_text(turns_.size()); }

  /// Concatenated tokens of teacher turns only.
  TokenSeq teacher_tokens() const;

  /// Most recent student utterance, if any.
  const Turn* last_student_turn() const;

  std::vector<std::string> utterances() const;

 private:
  std::string passage_id_;
  std::vector<Turn> turns_;
  std::size_t n_teacher_ = 0;
};

/// A recorded human (or reference) dialogue used for anchors and for the
/// coherence dataset builder.
struct Dialogue {
  std::string dialogue_id;
  std::string passage_id;
  std::vector<std::pair<Speaker, std::string>> turns;
};

/// Throws MalformedDialogue unless turns are non-empty and alternate.
void validate_dialogue(const Dialogue& dialogue);

}  // namespace teachplay
