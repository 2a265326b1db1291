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

// Coherence scoring. A history is passed around as its utterances joined by
// newlines (see Conversation::history_text); classifier requests join history
// and response with kSeparator.

#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "teachplay/dialogue.hpp"

namespace teachplay {

inline constexpr std::string_view kSeparator = " [SEP] ";

struct Logits {
  double coherent = 0.0;
  double incoherent = 0.0;
};

enum class NliLabel { Entailed, Neutral, Contradict };

std::string_view to_string(NliLabel label);
NliLabel nli_label_from_string(std::string_view s);

struct CoherenceScore {
  double value = 0.0;
  std::optional<Logits> logits;
  std::optional<NliLabel> label;
};

struct LabelConstants {
  double entailed = 1.0;
  double neutral = 0.2;
  double contradict = 0.0;

  /// Throws InvalidArgument unless entailed >= neutral >= contradict.
  void validate() const;
};

/// Softmax over the (coherent, incoherent) pair, computed stably.
CoherenceScore softmax_score(Logits logits);

double score_constant_label(NliLabel label, const LabelConstants& constants = {});

/// Lexical stand-in for a trained classifier (a PROXY):
///   0.5 * ROUGE-1(last history line, response) + 0.5 * (1 - ROUGE-1(history, response))
CoherenceScore score_lexical_baseline(std::string_view history, std::string_view response);

/// What a coherence classifier returns: two-way logits or a three-way NLI label.
using ClassifierOutput = std::variant<Logits, NliLabel>;

class ClassifierHandle {
 public:
  virtual ~ClassifierHandle() = default;
  virtual ClassifierOutput classify(std::string_view history, std::string_view response) const = 0;
  virtual std::string name() const = 0;
};

/// Returns the same output for every request. Test double.
class FixedClassifier final : public ClassifierHandle {
 public:
  explicit FixedClassifier(ClassifierOutput output) : output_(output) {}
  ClassifierOutput classify(std::string_view, std::string_view) const override { return output_; }
  std::string name() const override { return "fixed"; }

 private:
  ClassifierOutput output_;
};

/// Offline classifier derived from the lexical baseline (PROXY). Emits logits
/// whose softmax reproduces the baseline value, or a label by thresholding.
class LexicalProxyClassifier final : public ClassifierHandle {
 public:
  enum class Output { Logits, Label };
  explicit LexicalProxyClassifier(Output output) : output_(output) {}
  ClassifierOutput classify(std::string_view history, std::string_view response) const override;
  std::string name() const override;

 private:
  Output output_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{50};
  std::chrono::milliseconds max_backoff{400};
};

/// Client for an external scorer: POST {path} with
/// {"history", "response", "input"} and a reply of {"o_c", "o_i"} or
/// {"label"}. Safe for concurrent use; each call opens its own connection.
class HttpClassifier final : public ClassifierHandle {
 public:
  /// `base_url` like "http://127.0.0.1:9000".
  explicit HttpClassifier(std::string base_url, std::string path = "/score",
                          RetryPolicy retry = {});
  ClassifierOutput classify(std::string_view history, std::string_view response) const override;
  std::string name() const override { return "url=" + base_url_; }

 private:
  std::string base_url_;
  std::string path_;
  RetryPolicy retry_;
};

/// Parses a scorer reply body. Throws MalformedLogits.
ClassifierOutput parse_classifier_reply(const nlohmann::json& body);

/// Builds the scorer request body.
nlohmann::json classifier_request(std::string_view history, std::string_view response);

/// Classifier-backed coherence via the softmax form. BackendUnavailable from
/// the handle propagates; a label reply raises MalformedLogits.
CoherenceScore score_softmax(std::string_view history, std::string_view response,
                             const ClassifierHandle& backend);

class CoherenceScorer {
 public:
  virtual ~CoherenceScorer() = default;
  virtual CoherenceScore score(std::string_view history, std::string_view response) const = 0;
  /// Label written into reports so proxy and external runs stay distinguishable.
  virtual std::string name() const = 0;
};

class SoftmaxScorer final : public CoherenceScorer {
 public:
  explicit SoftmaxScorer(std::shared_ptr<const ClassifierHandle> backend)
      : backend_(std::move(backend)) {}
  CoherenceScore score(std::string_view history, std::string_view response) const override;
  std::string name() const override { return "softmax:" + backend_->name(); }

 private:
  std::shared_ptr<const ClassifierHandle> backend_;
};

class ConstantLabelScorer final : public CoherenceScorer {
 public:
  ConstantLabelScorer(std::shared_ptr<const ClassifierHandle> backend, LabelConstants constants = {});
  CoherenceScore score(std::string_view history, std::string_view response) const override;
  std::string name() const override { return "constants:" + backend_->name(); }

 private:
  std::shared_ptr<const ClassifierHandle> backend_;
  LabelConstants constants_;
};

class LexicalScorer final : public CoherenceScorer {
 public:
  CoherenceScore score(std::string_view history, std::string_view response) const override {
    return score_lexical_baseline(history, response);
  }
  std::string name() const override { return "lexical-proxy"; }
};

/// Accepts whichever reply shape an external service sends: logits go
/// through the softmax, labels through the constants.
class RemoteScorer final : public CoherenceScorer {
 public:
  RemoteScorer(std::shared_ptr<const ClassifierHandle> backend, LabelConstants constants = {})
      : backend_(std::move(backend)), constants_(constants) {}
  CoherenceScore score(std::string_view history, std::string_view response) const override;
  std::string name() const override { return backend_->name(); }

 private:
  std::shared_ptr<const ClassifierHandle> backend_;
  LabelConstants constants_;
};

/// "softmax" | "constants" | "lexical" | "url=http://host:port".
/// The first two run on the offline lexical proxy classifier.
std::unique_ptr<CoherenceScorer> make_scorer(std::string_view spec);

enum class CoherenceLabel { Coherent, Incoherent };

struct CoherencePair {
  std::string history_text;
  std::string response_text;
  CoherenceLabel label = CoherenceLabel::Coherent;
  std::string dialogue_id;
  std::size_t turn_index = 0;
};

/// For teacher response i with history h_i: (h_i, r_i, COHERENT) and
/// (h_i, r_j, INCOHERENT) for every later teacher response r_j of the same
/// dialogue. Throws MalformedDialogue.
std::vector<CoherencePair> build_coherence_dataset(const std::vector<Dialogue>& dialogues);

nlohmann::json to_json(const CoherencePair& pair);

}  // namespace teachplay
