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

// The teacher policy: one action per turn, chosen from passage-derived
// candidate utterances by a linear-feature softmax.
//
//   logits = F w / T,   p = softmax(logits),
//   d/dw log p_k = (f_k - p^T F) / T
//
// The math core is templated on the Eigen expression type so the same code
// serves double evaluation and finite-difference checks in other scalars.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "teachplay/dialogue.hpp"
#include "teachplay/rng.hpp"

namespace teachplay {

inline constexpr int kFeatureDim = 6;

template <typename Scalar>
using FeatureVector = Eigen::Matrix<Scalar, kFeatureDim, 1>;

template <typename Scalar>
using FeatureMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, kFeatureDim, Eigen::RowMajor>;

using Features = FeatureVector<double>;
using FeatureRows = FeatureMatrix<double>;

/// Column meaning of a feature vector.
enum Feature : int {
  kNovelty = 0,         // ROUGE-1(P, H + c) - ROUGE-1(P, H)
  kResponsiveness = 1,  // ROUGE-1(last student utterance, c)
  kPosition = 2,        // 1 - sentence_index / num_sentences
  kLength = 3,          // min(1, |c| / 40)
  kRepetition = 4,      // ROUGE-1(H, c)
  kBias = 5,
};

enum class Template { Verbatim, LeadTrim, TopicPrefix };

std::string_view to_string(Template t);

struct Candidate {
  std::string text;
  TokenSeq tokens;
  std::size_t source_sentence_index = 0;
  Template template_id = Template::Verbatim;
  Features features = Features::Zero();
};

struct PolicyParams {
  Features weights = Features::Zero();
  double temperature = 1.0;

  /// Throws InvalidArgument on non-finite weights or temperature <= 0.
  void validate() const;
  bool finite() const { return weights.allFinite() && std::isfinite(temperature); }
};

// ---------------------------------------------------------------------------
// Softmax core.

template <typename DerivedF, typename DerivedW>
Eigen::Matrix<typename DerivedF::Scalar, Eigen::Dynamic, 1> policy_logits(
    const Eigen::MatrixBase<DerivedF>& features, const Eigen::MatrixBase<DerivedW>& weights,
    typename DerivedF::Scalar temperature) {
  return (features * weights) / temperature;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar shift = logits.maxCoeff();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (logits.array() - shift).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
typename Derived::Scalar log_softmax_at(const Eigen::MatrixBase<Derived>& logits,
                                        Eigen::Index k) {
  using std::exp;
  using std::log;
  const auto shift = logits.maxCoeff();
  return logits(k) - shift - log((logits.array() - shift).exp().sum());
}

/// log p(chosen) under the policy.
template <typename DerivedF, typename DerivedW>
typename DerivedF::Scalar policy_log_prob(const Eigen::MatrixBase<DerivedF>& features,
                                          const Eigen::MatrixBase<DerivedW>& weights,
                                          typename DerivedF::Scalar temperature,
                                          Eigen::Index chosen) {
  return log_softmax_at(policy_logits(features, weights, temperature), chosen);
}

/// d/dw log p(chosen) = (f_chosen - Σ_k p_k f_k) / T.
template <typename DerivedF, typename DerivedW>
FeatureVector<typename DerivedF::Scalar> policy_log_prob_grad(
    const Eigen::MatrixBase<DerivedF>& features, const Eigen::MatrixBase<DerivedW>& weights,
    typename DerivedF::Scalar temperature, Eigen::Index chosen) {
  const auto probs = softmax(policy_logits(features, weights, temperature));
  const FeatureVector<typename DerivedF::Scalar> expected = features.transpose() * probs;
  return (features.row(chosen).transpose() - expected) / temperature;
}

// ---------------------------------------------------------------------------
// Candidates and decisions.

/// Stacks candidate features into an n x kFeatureDim matrix.
FeatureRows stack_features(const std::vector<Candidate>& candidates);

/// Features of `text` (from passage sentence `sentence_index`) given the
/// conversation so far.
Features featurize(const TokenSeq& text, std::size_t sentence_index, const Passage& passage,
                   const Conversation& history);

/// Up to three candidates per passage sentence (verbatim, connective-trimmed,
/// topic-prefixed), de-duplicated by text, ordered by sentence then template.
/// Throws EmptyPassage.
std::vector<Candidate> gen_candidates(const Passage& passage, const Conversation& history);

/// GREEDY takes the argmax (lowest index on ties); SAMPLED draws from `rng`.
/// Throws NoCandidates.
Decision decide(const PolicyParams& params, const FeatureRows& features, DecodeMode mode,
                Rng& rng);

Decision decide(const PolicyParams& params, const std::vector<Candidate>& candidates,
                DecodeMode mode, std::uint64_t seed);

/// Throws NoCandidates, or InvalidArgument for an out-of-range index.
Features log_prob_grad(const PolicyParams& params, const FeatureRows& features,
                       std::size_t chosen_index);

// ---------------------------------------------------------------------------
// Checkpoints: {"weights": [...], "temperature": t, "feature_dim": 6, "version": 1}

nlohmann::json to_json(const PolicyParams& params);
PolicyParams policy_from_json(const nlohmann::json& j);

/// Writes the checkpoint; `meta` (seeds, config echo) goes under "meta".
void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const nlohmann::json& meta = nullptr);

/// Throws UnknownCheckpoint when the file is missing or malformed.
PolicyParams load_checkpoint(const std::string& path);

}  // namespace teachplay
