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

#include "teachplay/eval.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "teachplay/error.hpp"
#include "teachplay/rng.hpp"
#include "teachplay/selfplay.hpp"

namespace teachplay {
namespace {

constexpr std::size_t kContextWindow = 5;

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + 1)) {
    ++n;
  }
  return n;
}

TokenSeq slice(const TokenSeq& seq, std::size_t begin, std::size_t end) {
  TokenSeq out;
  out.tokens.assign(seq.tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                    seq.tokens.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

nlohmann::json opt4(const std::optional<double>& v) {
  return v ? nlohmann::json(round4(*v)) : nlohmann::json(nullptr);
}

nlohmann::json rounded(const std::vector<double>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) out.push_back(round4(x));
  return out;
}

nlohmann::json row_json(const PassageReport& r) {
  return {{"passage_id", r.passage_id},
          {"r1", round4(r.r1)},
          {"r2", round4(r.r2)},
          {"rl", round4(r.rl)},
          {"qa_f1", opt4(r.qa_f1)},
          {"qa_conf", opt4(r.qa_conf)},
          {"n_questions", r.n_questions},
          {"coherence_mean", round4(r.coherence_mean)},
          {"relevance_mean", opt4(r.relevance_mean)},
          {"ig_per_turn", {{"r1", rounded(r.ig_r1)}, {"r2", rounded(r.ig_r2)}, {"rl", rounded(r.ig_rl)}}},
          {"avg_utterance_len", round4(r.avg_utterance_len)}};
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fmt4(const std::optional<double>& v) { return v ? fmt4(*v) : std::string(); }

}  // namespace

nlohmann::json to_json(const ClozeQuestion& q) {
  return {{"passage_id", q.passage_id},
          {"sentence", q.sentence},
          {"masked_entity", q.masked_entity},
          {"masked_form", q.masked_form}};
}

Coverage conversation_coverage(const Passage& passage, const Conversation& conversation) {
  if (conversation.empty()) fail(ErrorCode::EmptyConversation, "conversation is empty");
  const TokenSeq teacher = conversation.teacher_tokens();
  return {rouge_n_f1(passage.tokens, teacher, 1), rouge_n_f1(passage.tokens, teacher, 2),
          rouge_l_f1(passage.tokens, teacher)};
}

std::vector<double> info_gain(const Passage& passage, const Conversation& conversation,
                              RougeVariant variant) {
  const auto teacher = conversation.teacher_turn_indices();
  if (teacher.empty()) fail(ErrorCode::EmptyConversation, "conversation has no teacher turn");
  std::vector<double> gains;
  gains.reserve(teacher.size());
  for (std::size_t idx : teacher) {
    const TokenSeq history = conversation.history_tokens(idx);
    const TokenSeq with = concat(history, conversation.turns()[idx].tokens);
    gains.push_back(rouge_f1(variant, passage.tokens, with) -
                    rouge_f1(variant, passage.tokens, history));
  }
  return gains;
}

std::optional<Entity> maskable_entity(std::string_view sentence) {
  std::optional<Entity> best;
  for (auto& e : extract_entities(sentence)) {
    if (e.n_words > 4 || count_occurrences(sentence, e.text) != 1) continue;
    if (!best || e.text.size() > best->text.size()) best = std::move(e);
  }
  return best;
}

std::vector<ClozeQuestion> cloze_questions(const Passage& passage, std::size_t k,
                                           std::uint64_t seed) {
  std::vector<std::pair<std::size_t, Entity>> eligible;
  for (std::size_t i = 0; i < passage.sentences.size(); ++i) {
    if (auto e = maskable_entity(passage.sentences[i])) eligible.emplace_back(i, std::move(*e));
  }
  if (eligible.empty()) {
    fail(ErrorCode::NoMaskableEntities, "passage '" + passage.id + "' has no maskable entity");
  }
  Rng rng(seed);
  shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(std::min(k, eligible.size()));
  std::sort(eligible.begin(), eligible.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<ClozeQuestion> out;
  for (const auto& [idx, e] : eligible) {
    const std::string& s = passage.sentences[idx];
    ClozeQuestion q;
    q.passage_id = passage.id;
    q.sentence = s;
    q.masked_entity = e.text;
    q.masked_form = s.substr(0, e.begin) + std::string(kMaskToken) + s.substr(e.end);
    out.push_back(std::move(q));
  }
  return out;
}

ClozeAnswer answer_cloze(const ClozeQuestion& question, const Conversation& conversation) {
  const auto mask = question.masked_form.find(kMaskToken);
  if (mask == std::string::npos) return {};
  const TokenSeq left = tokenize(std::string_view(question.masked_form).substr(0, mask));
  const TokenSeq right =
      tokenize(std::string_view(question.masked_form).substr(mask + kMaskToken.size()));
  TokenSeq context = slice(left, left.size() - std::min(left.size(), kContextWindow), left.size());
  context = concat(context, slice(right, 0, std::min(right.size(), kContextWindow)));

  const TokenSeq conv = conversation.history_tokens();
  const std::size_t max_len = std::max<std::size_t>(1, tokenize(question.masked_entity).size()) + 2;
  ClozeAnswer best;
  std::size_t best_begin = 0;
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < conv.size(); ++i) {
    for (std::size_t len = 1; len <= max_len && i + len <= conv.size(); ++len) {
      const std::size_t lb = i - std::min(i, kContextWindow);
      const std::size_t re = std::min(conv.size(), i + len + kContextWindow);
      const TokenSeq span_context = concat(slice(conv, lb, i), slice(conv, i + len, re));
      const double s = rouge_1_f1(context, span_context);
      if (s > best.confidence) {
        best.confidence = s;
        best_begin = i;
        best_len = len;
      }
    }
  }
  if (best.confidence <= 0.0) return {};
  best.predicted = join(slice(conv, best_begin, best_begin + best_len).tokens, " ");
  return best;
}

double answer_f1(std::string_view predicted, std::string_view gold) {
  return rouge_1_f1(tokenize(gold), tokenize(predicted));
}

QaMetrics qa_metrics(const std::vector<ClozeQuestion>& questions, const Conversation& conversation) {
  if (questions.empty()) fail(ErrorCode::NoQuestions, "no cloze questions to answer");
  QaMetrics m;
  for (const auto& q : questions) {
    const ClozeAnswer a = answer_cloze(q, conversation);
    m.f1 += answer_f1(a.predicted, q.masked_entity);
    m.conf += a.confidence;
  }
  m.f1 /= static_cast<double>(questions.size());
  m.conf /= static_cast<double>(questions.size());
  return m;
}

double relevance(std::string_view student_utterance, std::string_view teacher_response) {
  std::map<std::string, std::pair<double, double>> tf;
  for (const auto& t : tokenize(student_utterance).tokens) tf[t].first += 1.0;
  for (const auto& t : tokenize(teacher_response).tokens) tf[t].second += 1.0;
  Eigen::VectorXd a(static_cast<Eigen::Index>(tf.size()));
  Eigen::VectorXd b(static_cast<Eigen::Index>(tf.size()));
  Eigen::Index k = 0;
  for (const auto& [term, counts] : tf) {
    a(k) = counts.first > 0 ? 1.0 + std::log(counts.first) : 0.0;
    b(k) = counts.second > 0 ? 1.0 + std::log(counts.second) : 0.0;
    ++k;
  }
  const double na = a.norm();
  const double nb = b.norm();
  const double cosine = (na == 0.0 || nb == 0.0) ? 0.0 : a.dot(b) / (na * nb);
  return std::clamp((cosine + 1.0) / 2.0, 0.0, 1.0);
}

double RemoteRelevance::score(std::string_view s, std::string_view t) const {
  const ClassifierOutput out = backend_->classify(s, t);
  if (const auto* logits = std::get_if<Logits>(&out)) return softmax_score(*logits).value;
  return score_constant_label(std::get<NliLabel>(out));
}

double pearson_agreement(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::LengthMismatch, "rating lists differ in length");
  if (a.size() < 2) fail(ErrorCode::InvalidArgument, "need at least two ratings");
  const Eigen::Map<const Eigen::VectorXd> x(a.data(), static_cast<Eigen::Index>(a.size()));
  const Eigen::Map<const Eigen::VectorXd> y(b.data(), static_cast<Eigen::Index>(b.size()));
  const Eigen::VectorXd dx = x.array() - x.mean();
  const Eigen::VectorXd dy = y.array() - y.mean();
  const double sxx = dx.squaredNorm();
  const double syy = dy.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::DegenerateVariance, "ratings have zero variance");
  return std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), -1.0, 1.0);
}

PassageReport evaluate_conversation(const Passage& passage, const Conversation& conversation,
                                    const EvalConfig& config) {
  static const LexicalScorer kLexicalCoherence;
  static const LexicalRelevance kLexicalRelevance;
  const CoherenceScorer& coherence = config.coherence ? *config.coherence : kLexicalCoherence;
  const RelevanceScorer& relevance_scorer = config.relevance ? *config.relevance : kLexicalRelevance;

  PassageReport r;
  r.passage_id = passage.id;
  const Coverage cov = conversation_coverage(passage, conversation);
  r.r1 = cov.r1;
  r.r2 = cov.r2;
  r.rl = cov.rl;
  r.ig_r1 = info_gain(passage, conversation, RougeVariant::R1);
  r.ig_r2 = info_gain(passage, conversation, RougeVariant::R2);
  r.ig_rl = info_gain(passage, conversation, RougeVariant::RL);

  try {
    const auto questions =
        cloze_questions(passage, config.qa_questions, mix_seed(config.seed, hash_string(passage.id)));
    const QaMetrics qa = qa_metrics(questions, conversation);
    r.qa_f1 = qa.f1;
    r.qa_conf = qa.conf;
    r.n_questions = questions.size();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoMaskableEntities) throw;
  }

  const auto& turns = conversation.turns();
  const auto teacher = conversation.teacher_turn_indices();
  double coh = 0.0;
  double len = 0.0;
  double rel = 0.0;
  std::size_t n_rel = 0;
  for (std::size_t idx : teacher) {
    coh += coherence.score(conversation.history_text(idx), turns[idx].text).value;
    len += static_cast<double>(turns[idx].tokens.size());
    if (idx > 0 && turns[idx - 1].speaker == Speaker::Student) {
      rel += relevance_scorer.score(turns[idx - 1].text, turns[idx].text);
      ++n_rel;
    }
  }
  r.coherence_mean = coh / static_cast<double>(teacher.size());
  r.avg_utterance_len = len / static_cast<double>(teacher.size());
  if (n_rel > 0) r.relevance_mean = rel / static_cast<double>(n_rel);
  return r;
}

EvalReport evaluate(const PolicyParams& params, const std::vector<Passage>& corpus,
                    const Student& student, const EvalConfig& config) {
  if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "evaluation corpus is empty");
  static const LexicalScorer kLexicalCoherence;
  static const LexicalRelevance kLexicalRelevance;
  const CoherenceScorer& coherence = config.coherence ? *config.coherence : kLexicalCoherence;
  const RelevanceScorer& relevance_scorer = config.relevance ? *config.relevance : kLexicalRelevance;

  EvalReport report;
  report.config = {{"n_turns", config.n_turns},
                   {"seed", config.seed},
                   {"qa_questions", config.qa_questions},
                   {"decoding", "greedy"},
                   {"policy", to_json(params)}};
  report.backend = {{"coherence", coherence.name()},
                    {"qa", "lexical-proxy"},
                    {"relevance", relevance_scorer.name()}};

  SelfPlayOptions sp;
  sp.n_turns = config.n_turns;
  for (const Passage& p : corpus) {
    Conversation conv = run_conversation(p, params, student, DecodeMode::Greedy,
                                         mix_seed(config.seed, hash_string(p.id)), sp);
    report.passages.push_back(evaluate_conversation(p, conv, config));
    report.conversations.push_back(std::move(conv));
  }

  PassageReport& agg = report.aggregate;
  agg.passage_id = "aggregate";
  agg.ig_r1.assign(config.n_turns, 0.0);
  agg.ig_r2.assign(config.n_turns, 0.0);
  agg.ig_rl.assign(config.n_turns, 0.0);
  double qa_f1 = 0.0, qa_conf = 0.0, rel = 0.0;
  std::size_t n_qa = 0, n_rel = 0;
  for (const auto& r : report.passages) {
    agg.r1 += r.r1;
    agg.r2 += r.r2;
    agg.rl += r.rl;
    agg.coherence_mean += r.coherence_mean;
    agg.avg_utterance_len += r.avg_utterance_len;
    agg.n_questions += r.n_questions;
    for (std::size_t t = 0; t < config.n_turns && t < r.ig_r1.size(); ++t) {
      agg.ig_r1[t] += r.ig_r1[t];
      agg.ig_r2[t] += r.ig_r2[t];
      agg.ig_rl[t] += r.ig_rl[t];
    }
    if (r.qa_f1) {
      qa_f1 += *r.qa_f1;
      qa_conf += *r.qa_conf;
      ++n_qa;
    }
    if (r.relevance_mean) {
      rel += *r.relevance_mean;
      ++n_rel;
    }
  }
  const double n = static_cast<double>(report.passages.size());
  agg.r1 /= n;
  agg.r2 /= n;
  agg.rl /= n;
  agg.coherence_mean /= n;
  agg.avg_utterance_len /= n;
  for (std::size_t t = 0; t < config.n_turns; ++t) {
    agg.ig_r1[t] /= n;
    agg.ig_r2[t] /= n;
    agg.ig_rl[t] /= n;
  }
  if (n_qa > 0) {
    agg.qa_f1 = qa_f1 / static_cast<double>(n_qa);
    agg.qa_conf = qa_conf / static_cast<double>(n_qa);
  }
  if (n_rel > 0) agg.relevance_mean = rel / static_cast<double>(n_rel);
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < passages.size(); ++i) {
    nlohmann::json row = row_json(passages[i]);
    if (i < conversations.size()) {
      nlohmann::json turns = nlohmann::json::array();
      for (const auto& t : conversations[i].turns()) {
        turns.push_back({{"speaker", teachplay::to_string(t.speaker)}, {"text", t.text}});
      }
      row["turns"] = turns;
    }
    rows.push_back(std::move(row));
  }
  return {{"schema_version", 1},
          {"config", config},
          {"backend", backend},
          {"passages", rows},
          {"aggregate", row_json(aggregate)}};
}

void EvalReport::write_csv(std::ostream& out) const {
  const std::size_t turns = aggregate.ig_r1.size();
  out << "passage_id,r1,r2,rl,qa_f1,qa_conf,coherence_mean,relevance_mean,avg_utterance_len";
  for (const char* v : {"r1", "r2", "rl"}) {
    for (std::size_t t = 1; t <= turns; ++t) out << ",ig_" << v << "_t" << t;
  }
  out << '\n';
  auto line = [&](const PassageReport& r) {
    out << r.passage_id << ',' << fmt4(r.r1) << ',' << fmt4(r.r2) << ',' << fmt4(r.rl) << ','
        << fmt4(r.qa_f1) << ',' << fmt4(r.qa_conf) << ',' << fmt4(r.coherence_mean) << ','
        << fmt4(r.relevance_mean) << ',' << fmt4(r.avg_utterance_len);
    for (const auto* ig : {&r.ig_r1, &r.ig_r2, &r.ig_rl}) {
      for (std::size_t t = 0; t < turns; ++t) out << ',' << (t < ig->size() ? fmt4((*ig)[t]) : "");
    }
    out << '\n';
  };
  for (const auto& r : passages) line(r);
  line(aggregate);
}

}  // namespace teachplay
