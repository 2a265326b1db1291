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

#include "teachplay/policy.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "teachplay/error.hpp"

namespace teachplay {
namespace {

constexpr std::array<std::string_view, 12> kConnectives = {
    "however", "moreover",     "furthermore", "additionally", "also",    "therefore",
    "thus",    "consequently", "meanwhile",   "nevertheless", "instead", "indeed"};

// Sentence minus a leading connective (and its comma), re-capitalized.
std::string trim_connective(const std::string& sentence) {
  std::size_t end = 0;
  while (end < sentence.size() && std::isalpha(static_cast<unsigned char>(sentence[end]))) ++end;
  std::string first = sentence.substr(0, end);
  for (auto& c : first) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (std::find(kConnectives.begin(), kConnectives.end(), first) == kConnectives.end()) {
    return sentence;
  }
  std::size_t rest = end;
  if (rest < sentence.size() && sentence[rest] == ',') ++rest;
  while (rest < sentence.size() && std::isspace(static_cast<unsigned char>(sentence[rest]))) ++rest;
  if (rest >= sentence.size()) return sentence;
  std::string out = sentence.substr(rest);
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

// Lowercases the opening word only when it is a function word, so names and
// acronyms keep their capitals.
std::string embed_sentence(const std::string& sentence) {
  std::size_t end = 0;
  while (end < sentence.size() && !std::isspace(static_cast<unsigned char>(sentence[end]))) ++end;
  std::string out = sentence;
  std::string first = sentence.substr(0, end);
  while (!first.empty() && std::ispunct(static_cast<unsigned char>(first.back()))) first.pop_back();
  if (!out.empty() && is_function_word(first)) {
    out[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[0])));
  }
  return out;
}

}  // namespace

std::string_view to_string(Template t) {
  switch (t) {
    case Template::Verbatim: return "verbatim";
    case Template::LeadTrim: return "lead_trim";
    case Template::TopicPrefix: return "topic_prefix";
  }
  return "verbatim";
}

void PolicyParams::validate() const {
  if (!weights.allFinite()) fail(ErrorCode::InvalidArgument, "policy weights must be finite");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(ErrorCode::InvalidArgument, "policy temperature must be positive");
  }
}

FeatureRows stack_features(const std::vector<Candidate>& candidates) {
  FeatureRows rows(static_cast<Eigen::Index>(candidates.size()), kFeatureDim);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = candidates[i].features.transpose();
  }
  return rows;
}

namespace {

Features featurize_with(const TokenSeq& text, std::size_t sentence_index, const Passage& passage,
                        const TokenSeq& history, double history_score, const Turn* last_student) {
  Features f;
  f(kNovelty) = rouge_1_f1(passage.tokens, concat(history, text)) - history_score;
  f(kResponsiveness) = last_student ? rouge_1_f1(last_student->tokens, text) : 0.0;
  const double n_sent = static_cast<double>(std::max<std::size_t>(1, passage.sentences.size()));
  f(kPosition) = 1.0 - static_cast<double>(sentence_index) / n_sent;
  f(kLength) = std::min(1.0, static_cast<double>(text.size()) / 40.0);
  f(kRepetition) = rouge_1_f1(history, text);
  f(kBias) = 1.0;
  return f;
}

}  // namespace

Features featurize(const TokenSeq& text, std::size_t sentence_index, const Passage& passage,
                   const Conversation& history) {
  const TokenSeq h = history.history_tokens();
  return featurize_with(text, sentence_index, passage, h, rouge_1_f1(passage.tokens, h),
                        history.last_student_turn());
}

std::vector<Candidate> gen_candidates(const Passage& passage, const Conversation& history) {
  if (passage.tokens.empty() || passage.sentences.empty()) {
    fail(ErrorCode::EmptyPassage, "passage '" + passage.id + "' has no text");
  }
  const TokenSeq h = history.history_tokens();
  const double history_score = rouge_1_f1(passage.tokens, h);
  const Turn* last_student = history.last_student_turn();

  std::vector<Candidate> out;
  std::unordered_set<std::string> seen;
  auto add = [&](std::string text, std::size_t idx, Template t) {
    if (text.empty() || !seen.insert(text).second) return;
    Candidate c;
    c.tokens = tokenize(text);
    if (c.tokens.empty()) return;
    c.text = std::move(text);
    c.source_sentence_index = idx;
    c.template_id = t;
    c.features = featurize_with(c.tokens, idx, passage, h, history_score, last_student);
    out.push_back(std::move(c));
  };
  for (std::size_t i = 0; i < passage.sentences.size(); ++i) {
    const std::string& s = passage.sentences[i];
    add(s, i, Template::Verbatim);
    const std::string trimmed = trim_connective(s);
    add(trimmed, i, Template::LeadTrim);
    if (history.empty()) {
      add("Did you know that " + embed_sentence(trimmed), i, Template::TopicPrefix);
    } else {
      add("Well, " + embed_sentence(trimmed), i, Template::TopicPrefix);
    }
  }
  if (out.empty()) fail(ErrorCode::EmptyPassage, "passage '" + passage.id + "' has no sentences");
  return out;
}

Decision decide(const PolicyParams& params, const FeatureRows& features, DecodeMode mode,
                Rng& rng) {
  if (features.rows() == 0) fail(ErrorCode::NoCandidates, "decide() needs at least one candidate");
  const Eigen::VectorXd logits = policy_logits(features, params.weights, params.temperature);
  const Eigen::VectorXd probs = softmax(logits);

  Decision d;
  d.mode = mode;
  d.probs.assign(probs.data(), probs.data() + probs.size());
  Eigen::Index chosen = 0;
  if (mode == DecodeMode::Greedy) {
    // maxCoeff returns the first maximal index, which is the tie-break we want.
    probs.maxCoeff(&chosen);
  } else {
    const double u = uniform01(rng);
    double acc = 0.0;
    chosen = probs.size() - 1;
    for (Eigen::Index k = 0; k < probs.size(); ++k) {
      acc += probs(k);
      if (u < acc) {
        chosen = k;
        break;
      }
    }
  }
  d.chosen_index = static_cast<std::size_t>(chosen);
  d.log_prob = log_softmax_at(logits, chosen);
  return d;
}

Decision decide(const PolicyParams& params, const std::vector<Candidate>& candidates,
                DecodeMode mode, std::uint64_t seed) {
  Rng rng(seed);
  return decide(params, stack_features(candidates), mode, rng);
}

Features log_prob_grad(const PolicyParams& params, const FeatureRows& features,
                       std::size_t chosen_index) {
  if (features.rows() == 0) fail(ErrorCode::NoCandidates, "gradient needs at least one candidate");
  if (chosen_index >= static_cast<std::size_t>(features.rows())) {
    fail(ErrorCode::InvalidArgument, "chosen index out of range");
  }
  return policy_log_prob_grad(features, params.weights, params.temperature,
                              static_cast<Eigen::Index>(chosen_index));
}

nlohmann::json to_json(const PolicyParams& params) {
  std::vector<double> w(params.weights.data(), params.weights.data() + kFeatureDim);
  return {{"weights", w},
          {"temperature", params.temperature},
          {"feature_dim", kFeatureDim},
          {"version", 1}};
}

PolicyParams policy_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("weights") || !j["weights"].is_array()) {
    fail(ErrorCode::UnknownCheckpoint, "checkpoint lacks a weights array");
  }
  if (j.value("feature_dim", kFeatureDim) != kFeatureDim ||
      j["weights"].size() != static_cast<std::size_t>(kFeatureDim)) {
    fail(ErrorCode::UnknownCheckpoint, "checkpoint feature_dim does not match 6");
  }
  if (j.value("version", 1) != 1) fail(ErrorCode::UnknownCheckpoint, "unsupported checkpoint version");
  PolicyParams p;
  try {
    for (int k = 0; k < kFeatureDim; ++k) p.weights(k) = j["weights"][k].get<double>();
    p.temperature = j.value("temperature", 1.0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::UnknownCheckpoint, std::string("malformed checkpoint: ") + e.what());
  }
  try {
    p.validate();
  } catch (const Error& e) {
    fail(ErrorCode::UnknownCheckpoint, e.what());
  }
  return p;
}

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const nlohmann::json& meta) {
  nlohmann::json j = to_json(params);
  if (!meta.is_null()) j["meta"] = meta;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write checkpoint '" + path + "'");
  out << j.dump(2) << '\n';
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::UnknownCheckpoint, "checkpoint '" + path + "' not found");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::UnknownCheckpoint, "checkpoint '" + path + "' is not JSON");
  return policy_from_json(j);
}

}  // namespace teachplay
