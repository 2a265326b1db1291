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

#include "teachplay/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "teachplay/error.hpp"

namespace teachplay {

std::string_view to_string(NliLabel label) {
  switch (label) {
    case NliLabel::Entailed: return "entailed";
    case NliLabel::Neutral: return "neutral";
    case NliLabel::Contradict: return "contradict";
  }
  return "neutral";
}

NliLabel nli_label_from_string(std::string_view s) {
  if (s == "entailed") return NliLabel::Entailed;
  if (s == "neutral") return NliLabel::Neutral;
  if (s == "contradict") return NliLabel::Contradict;
  fail(ErrorCode::MalformedLogits, "unknown coherence label '" + std::string(s) + "'");
}

void LabelConstants::validate() const {
  if (!(entailed >= neutral && neutral >= contradict)) {
    fail(ErrorCode::InvalidArgument, "label constants must satisfy s_e >= s_n >= s_c");
  }
}

CoherenceScore softmax_score(Logits logits) {
  if (!std::isfinite(logits.coherent) || !std::isfinite(logits.incoherent)) {
    fail(ErrorCode::MalformedLogits, "non-finite coherence logits");
  }
  // e^c / (e^c + e^i) == 1 / (1 + e^(i - c))
  const double value = 1.0 / (1.0 + std::exp(logits.incoherent - logits.coherent));
  return {value, logits, std::nullopt};
}

double score_constant_label(NliLabel label, const LabelConstants& constants) {
  switch (label) {
    case NliLabel::Entailed: return constants.entailed;
    case NliLabel::Neutral: return constants.neutral;
    case NliLabel::Contradict: return constants.contradict;
  }
  return constants.neutral;
}

CoherenceScore score_lexical_baseline(std::string_view history, std::string_view response) {
  const auto last_newline = history.rfind('\n');
  const std::string_view last =
      last_newline == std::string_view::npos ? history : history.substr(last_newline + 1);
  const TokenSeq resp = tokenize(response);
  const double relevance = rouge_1_f1(tokenize(last), resp);
  const double novelty = 1.0 - rouge_1_f1(tokenize(history), resp);
  return {std::clamp(0.5 * relevance + 0.5 * novelty, 0.0, 1.0), std::nullopt, std::nullopt};
}

ClassifierOutput LexicalProxyClassifier::classify(std::string_view history,
                                                  std::string_view response) const {
  const double v = std::clamp(score_lexical_baseline(history, response).value, 1e-6, 1.0 - 1e-6);
  if (output_ == Output::Logits) return Logits{std::log(v), std::log1p(-v)};
  if (v >= 0.6) return NliLabel::Entailed;
  if (v >= 0.4) return NliLabel::Neutral;
  return NliLabel::Contradict;
}

std::string LexicalProxyClassifier::name() const {
  return output_ == Output::Logits ? "lexical-proxy-logits" : "lexical-proxy-labels";
}

nlohmann::json classifier_request(std::string_view history, std::string_view response) {
  std::string input(history);
  input += kSeparator;
  input += response;
  return {{"history", history}, {"response", response}, {"input", input}};
}

ClassifierOutput parse_classifier_reply(const nlohmann::json& body) {
  if (!body.is_object()) fail(ErrorCode::MalformedLogits, "scorer reply is not an object");
  if (body.contains("o_c") || body.contains("o_i")) {
    if (!body.contains("o_c") || !body.contains("o_i") || !body["o_c"].is_number() ||
        !body["o_i"].is_number()) {
      fail(ErrorCode::MalformedLogits, "scorer reply needs numeric o_c and o_i");
    }
    Logits l{body["o_c"].get<double>(), body["o_i"].get<double>()};
    if (!std::isfinite(l.coherent) || !std::isfinite(l.incoherent)) {
      fail(ErrorCode::MalformedLogits, "non-finite coherence logits");
    }
    return l;
  }
  if (body.contains("label") && body["label"].is_string()) {
    return nli_label_from_string(body["label"].get<std::string>());
  }
  fail(ErrorCode::MalformedLogits, "scorer reply has neither logits nor label");
}

HttpClassifier::HttpClassifier(std::string base_url, std::string path, RetryPolicy retry)
    : base_url_(std::move(base_url)), path_(std::move(path)), retry_(retry) {}

ClassifierOutput HttpClassifier::classify(std::string_view history,
                                          std::string_view response) const {
  const std::string body = classifier_request(history, response).dump();
  auto backoff = retry_.initial_backoff;
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt < retry_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, retry_.max_backoff);
    }
    httplib::Client client(base_url_);
    client.set_connection_timeout(2);
    client.set_read_timeout(10);
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      fail(ErrorCode::BackendUnavailable,
           "scorer at " + base_url_ + " answered HTTP " + std::to_string(res->status));
    }
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) fail(ErrorCode::MalformedLogits, "scorer reply is not JSON");
    return parse_classifier_reply(parsed);
  }
  fail(ErrorCode::BackendUnavailable, "scorer at " + base_url_ + " unreachable after " +
                                          std::to_string(retry_.attempts) +
                                          " attempts: " + last_error);
}

CoherenceScore score_softmax(std::string_view history, std::string_view response,
                             const ClassifierHandle& backend) {
  const ClassifierOutput out = backend.classify(history, response);
  if (const auto* logits = std::get_if<Logits>(&out)) return softmax_score(*logits);
  fail(ErrorCode::MalformedLogits, "softmax scoring needs logits, backend returned a label");
}

CoherenceScore SoftmaxScorer::score(std::string_view history, std::string_view response) const {
  return score_softmax(history, response, *backend_);
}

ConstantLabelScorer::ConstantLabelScorer(std::shared_ptr<const ClassifierHandle> backend,
                                         LabelConstants constants)
    : backend_(std::move(backend)), constants_(constants) {
  constants_.validate();
}

CoherenceScore ConstantLabelScorer::score(std::string_view history,
                                          std::string_view response) const {
  const ClassifierOutput out = backend_->classify(history, response);
  const auto* label = std::get_if<NliLabel>(&out);
  if (!label) fail(ErrorCode::MalformedLogits, "constant-label scoring needs a label");
  return {score_constant_label(*label, constants_), std::nullopt, *label};
}

CoherenceScore RemoteScorer::score(std::string_view history, std::string_view response) const {
  const ClassifierOutput out = backend_->classify(history, response);
  if (const auto* logits = std::get_if<Logits>(&out)) return softmax_score(*logits);
  const NliLabel label = std::get<NliLabel>(out);
  return {score_constant_label(label, constants_), std::nullopt, label};
}

std::unique_ptr<CoherenceScorer> make_scorer(std::string_view spec) {
  if (spec == "lexical") return std::make_unique<LexicalScorer>();
  if (spec == "softmax") {
    return std::make_unique<SoftmaxScorer>(
        std::make_shared<LexicalProxyClassifier>(LexicalProxyClassifier::Output::Logits));
  }
  if (spec == "constants") {
    return std::make_unique<ConstantLabelScorer>(
        std::make_shared<LexicalProxyClassifier>(LexicalProxyClassifier::Output::Label));
  }
  if (spec.starts_with("url=") && spec.size() > 4) {
    return std::make_unique<RemoteScorer>(
        std::make_shared<HttpClassifier>(std::string(spec.substr(4))));
  }
  fail(ErrorCode::InvalidArgument, "unknown coherence backend '" + std::string(spec) +
                                       "' (expected softmax|constants|lexical|url=...)");
}

std::vector<CoherencePair> build_coherence_dataset(const std::vector<Dialogue>& dialogues) {
  std::vector<CoherencePair> pairs;
  for (const Dialogue& d : dialogues) {
    validate_dialogue(d);
    std::vector<std::size_t> responses;
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      if (d.turns[i].first == Speaker::Teacher) responses.push_back(i);
    }
    for (std::size_t a = 0; a < responses.size(); ++a) {
      const std::size_t pos = responses[a];
      std::string history;
      for (std::size_t k = 0; k < pos; ++k) {
        if (k > 0) history.push_back('\n');
        history += d.turns[k].second;
      }
      auto emit = [&](std::size_t response_pos, CoherenceLabel label) {
        const std::string& text = d.turns[response_pos].second;
        if (text.empty()) {
          fail(ErrorCode::MalformedDialogue,
               "dialogue '" + d.dialogue_id + "' has an empty teacher response");
        }
        pairs.push_back({history, text, label, d.dialogue_id, pos});
      };
      emit(pos, CoherenceLabel::Coherent);
      for (std::size_t b = a + 1; b < responses.size(); ++b) {
        emit(responses[b], CoherenceLabel::Incoherent);
      }
    }
  }
  return pairs;
}

nlohmann::json to_json(const CoherencePair& pair) {
  return {{"history", pair.history_text},
          {"response", pair.response_text},
          {"label", pair.label == CoherenceLabel::Coherent ? "coherent" : "incoherent"},
          {"dialogue_id", pair.dialogue_id},
          {"turn_index", pair.turn_index}};
}

}  // namespace teachplay
