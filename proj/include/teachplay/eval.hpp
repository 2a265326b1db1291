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

// Objective metrics over teacher/student conversations. The QA and relevance
// scorers are lexical PROXIES for neural models; reports say so in their
// "backend" block.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "teachplay/coherence.hpp"
#include "teachplay/dialogue.hpp"
#include "teachplay/policy.hpp"
#include "teachplay/student.hpp"

namespace teachplay {

inline constexpr std::string_view kMaskToken = "[MASK]";

struct ClozeQuestion {
  std::string passage_id;
  std::string sentence;
  std::string masked_entity;
  std::string masked_form;  // sentence with the entity replaced by [MASK]
};

nlohmann::json to_json(const ClozeQuestion& q);

struct Coverage {
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
};

/// ROUGE-1/2/L F1 of the passage against the teacher's utterances only.
/// Throws EmptyConversation.
Coverage conversation_coverage(const Passage& passage, const Conversation& conversation);

/// Rouge(P, H_n + U_n) - Rouge(P, H_n) for every teacher utterance U_n, where
/// H_n holds every utterance (both speakers) before it. Throws
/// EmptyConversation.
std::vector<double> info_gain(const Passage& passage, const Conversation& conversation,
                              RougeVariant variant);

/// Picks the entity to mask in `sentence`: among entities of at most four
/// words that occur exactly once, the longest, then the leftmost.
std::optional<Entity> maskable_entity(std::string_view sentence);

/// Up to k cloze questions from distinct sentences, chosen by seeded sampling
/// and returned in passage order. Throws NoMaskableEntities.
std::vector<ClozeQuestion> cloze_questions(const Passage& passage, std::size_t k,
                                           std::uint64_t seed);

struct ClozeAnswer {
  std::string predicted;  // lowercased span tokens, "" when unanswered
  double confidence = 0.0;
};

/// PROXY reader. Every span of the conversation up to (entity length + 2)
/// tokens is scored by ROUGE-1 F1 between its ±5-token context and the
/// question's context around [MASK]; the best span wins (earliest, then
/// shortest, on ties).
ClozeAnswer answer_cloze(const ClozeQuestion& question, const Conversation& conversation);

/// Token-level F1 between an answer and the gold entity.
double answer_f1(std::string_view predicted, std::string_view gold);

struct QaMetrics {
  double f1 = 0.0;
  double conf = 0.0;
};

/// Means over questions. Throws NoQuestions.
QaMetrics qa_metrics(const std::vector<ClozeQuestion>& questions, const Conversation& conversation);

/// PROXY relevance: cosine of log-scaled term-frequency vectors, mapped from
/// [-1, 1] to [0, 1].
double relevance(std::string_view student_utterance, std::string_view teacher_response);

class RelevanceScorer {
 public:
  virtual ~RelevanceScorer() = default;
  virtual double score(std::string_view student_utterance,
                       std::string_view teacher_response) const = 0;
  virtual std::string name() const = 0;
};

class LexicalRelevance final : public RelevanceScorer {
 public:
  double score(std::string_view s, std::string_view t) const override { return relevance(s, t); }
  std::string name() const override { return "lexical-proxy"; }
};

/// External scorer speaking the coherence wire format; logits go through the
/// softmax. BackendUnavailable propagates.
class RemoteRelevance final : public RelevanceScorer {
 public:
  explicit RemoteRelevance(std::shared_ptr<const ClassifierHandle> backend)
      : backend_(std::move(backend)) {}
  double score(std::string_view s, std::string_view t) const override;
  std::string name() const override { return backend_->name(); }

 private:
  std::shared_ptr<const ClassifierHandle> backend_;
};

/// Pearson r. Throws LengthMismatch, InvalidArgument (fewer than two
/// ratings), DegenerateVariance.
double pearson_agreement(std::span<const double> a, std::span<const double> b);

struct EvalConfig {
  std::size_t n_turns = 3;
  std::uint64_t seed = 7;
  std::size_t qa_questions = 5;
  const CoherenceScorer* coherence = nullptr;  // defaults to the lexical proxy
  const RelevanceScorer* relevance = nullptr;  // defaults to the lexical proxy
};

struct PassageReport {
  std::string passage_id;
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
  std::optional<double> qa_f1;
  std::optional<double> qa_conf;
  std::size_t n_questions = 0;
  double coherence_mean = 0.0;
  std::optional<double> relevance_mean;
  std::vector<double> ig_r1;
  std::vector<double> ig_r2;
  std::vector<double> ig_rl;
  double avg_utterance_len = 0.0;
};

struct EvalReport {
  nlohmann::json config;
  nlohmann::json backend;
  std::vector<PassageReport> passages;
  PassageReport aggregate;
  std::vector<Conversation> conversations;

  nlohmann::json to_json() const;
  void write_csv(std::ostream& out) const;
};

/// Metrics of one already-played conversation.
PassageReport evaluate_conversation(const Passage& passage, const Conversation& conversation,
                                    const EvalConfig& config);

/// Greedy self-play on every passage with a fixed seed, then all metrics.
/// Throws EmptyCorpus.
EvalReport evaluate(const PolicyParams& params, const std::vector<Passage>& corpus,
                    const Student& student, const EvalConfig& config = {});

}  // namespace teachplay
