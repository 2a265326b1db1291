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

#include "teachplay/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <ostream>
#include <unordered_map>

namespace teachplay {
namespace {

constexpr std::uint64_t kCorpusOrderStream = 1;
constexpr std::uint64_t kAnchorOrderStream = 2;
constexpr std::uint64_t kRolloutStreamBase = 1'000'000;

// Endless round-robin over [0, n) that reshuffles at every epoch boundary.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    shuffle(order_.begin(), order_.end(), rng_);
  }

  std::size_t next() {
    if (pos_ == order_.size()) {
      shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  reward_config().validate();
  if (rl_batches_per_cycle < 1) fail(ErrorCode::InvalidArgument, "rl_batches_per_cycle must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning_rate must be positive");
  if (mle_batch_size < 1 || rl_batch_size < 1) {
    fail(ErrorCode::InvalidArgument, "batch sizes must be >= 1");
  }
  if (n_turns < 1) fail(ErrorCode::InvalidArgument, "n_turns must be >= 1");
  if (explicit_gamma && !(*explicit_gamma >= 0.0 && *explicit_gamma <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "gamma must lie in [0, 1]");
  }
  init.validate();
}

RewardConfig TrainConfig::reward_config() const {
  return {beta, cov_clip, attribution, coherence_backend};
}

SelfPlayOptions TrainConfig::selfplay_options() const {
  SelfPlayOptions o;
  o.n_turns = n_turns;
  o.full_greedy_trajectory = full_greedy_trajectory;
  return o;
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = {{"beta", beta},
                      {"mle_batches_per_cycle", mle_batches_per_cycle},
                      {"rl_batches_per_cycle", rl_batches_per_cycle},
                      {"learning_rate", learning_rate},
                      {"steps", steps},
                      {"mle_batch_size", mle_batch_size},
                      {"rl_batch_size", rl_batch_size},
                      {"n_turns", n_turns},
                      {"seed", seed},
                      {"cov_clip", cov_clip},
                      {"attribution", to_string(attribution)},
                      {"weight_by_length", weight_by_length},
                      {"full_greedy_trajectory", full_greedy_trajectory}};
  if (explicit_gamma) j["gamma"] = *explicit_gamma;
  return j;
}

std::size_t project_reference(std::string_view gold_response,
                              const std::vector<Candidate>& candidates) {
  if (candidates.empty()) fail(ErrorCode::NoCandidates, "cannot project onto an empty candidate set");
  const TokenSeq gold = tokenize(gold_response);
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double s = rouge_1_f1(gold, candidates[i].tokens);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

ResolvedAnchor resolve_anchor(const AnchorExample& anchor, const Passage& passage) {
  const Conversation history = Conversation::from_utterances(passage.id, anchor.history);
  const auto candidates = gen_candidates(passage, history);
  return {stack_features(candidates), project_reference(anchor.gold_response, candidates)};
}

LossGrad mle_loss_and_grad(const PolicyParams& params, const FeatureRows& features,
                           std::size_t action) {
  LossGrad out;
  out.loss = -policy_log_prob(features, params.weights, params.temperature,
                              static_cast<Eigen::Index>(action));
  out.grad = -log_prob_grad(params, features, action);
  return out;
}

LossGrad mle_loss_and_grad(const PolicyParams& params, const AnchorExample& anchor,
                           const Passage* passage) {
  if (passage == nullptr || passage->id != anchor.passage_id) {
    fail(ErrorCode::PassageMissing, "passage '" + anchor.passage_id + "' for anchor not loaded");
  }
  const ResolvedAnchor r = resolve_anchor(anchor, *passage);
  return mle_loss_and_grad(params, r.features, r.action);
}

LossGrad rl_loss_and_grad(const PolicyParams& params, const Rollout& rollout,
                          bool weight_by_length) {
  if (rollout.per_turn.empty()) fail(ErrorCode::IncompleteRollout, "rollout has no scored turns");
  LossGrad out;
  for (const TurnRecord& rec : rollout.per_turn) {
    if (rec.features.rows() == 0 ||
        rec.sampled_decision.chosen_index >= static_cast<std::size_t>(rec.features.rows())) {
      fail(ErrorCode::IncompleteRollout, "rollout turn lacks its candidate set");
    }
    double weight = rec.advantage();
    if (weight_by_length) weight *= static_cast<double>(tokenize(rec.sampled_text).size());
    const auto k = static_cast<Eigen::Index>(rec.sampled_decision.chosen_index);
    out.loss -= weight * policy_log_prob(rec.features, params.weights, params.temperature, k);
    out.grad -= weight * policy_log_prob_grad(rec.features, params.weights, params.temperature, k);
  }
  return out;
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "step,loss_rl,loss_mle,mean_r_cov,mean_r_coh,mean_r_mixed,mean_len\n";
  for (const auto& r : records) {
    out << r.step << ',' << format_double(r.loss_rl) << ',' << format_double(r.loss_mle) << ','
        << format_double(r.mean_r_cov) << ',' << format_double(r.mean_r_coh) << ','
        << format_double(r.mean_r_mixed) << ',' << format_double(r.mean_len) << '\n';
  }
}

void TrainLog::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write training log '" + path + "'");
  write_csv(out);
}

TrainResult train(const TrainConfig& config, const std::vector<Passage>& corpus,
                  const std::vector<AnchorExample>& anchors, const CoherenceScorer& scorer,
                  const Student& student, const TrainHooks& hooks) {
  config.validate();
  if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "training corpus is empty");
  const bool uses_mle =
      config.explicit_gamma ? *config.explicit_gamma < 1.0 : config.mle_batches_per_cycle > 0;
  if (uses_mle && anchors.empty()) {
    fail(ErrorCode::EmptyCorpus, "MLE updates requested but no anchors given");
  }

  // Candidate sets of anchors do not depend on the parameters; resolve once.
  std::vector<ResolvedAnchor> resolved;
  if (uses_mle) {
    const auto& pool = hooks.anchor_passages ? *hooks.anchor_passages : corpus;
    std::unordered_map<std::string, const Passage*> by_id;
    for (const auto& p : pool) by_id.emplace(p.id, &p);
    resolved.reserve(anchors.size());
    for (const auto& a : anchors) {
      const auto it = by_id.find(a.passage_id);
      if (it == by_id.end()) {
        fail(ErrorCode::PassageMissing, "anchor refers to unknown passage '" + a.passage_id + "'");
      }
      resolved.push_back(resolve_anchor(a, *it->second));
    }
  }

  const RewardConfig reward_cfg = config.reward_config();
  const SelfPlayOptions sp = config.selfplay_options();
  EpochSampler passage_order(corpus.size(), mix_seed(config.seed, kCorpusOrderStream));
  EpochSampler anchor_order(std::max<std::size_t>(resolved.size(), 1),
                            mix_seed(config.seed, kAnchorOrderStream));
  std::uint64_t rollout_counter = 0;

  TrainResult result;
  result.params = config.init;
  PolicyParams& params = result.params;

  auto mle_batch = [&]() {
    LossGrad total;
    for (std::size_t i = 0; i < config.mle_batch_size; ++i) {
      const ResolvedAnchor& a = resolved[anchor_order.next()];
      const LossGrad lg = mle_loss_and_grad(params, a.features, a.action);
      total.loss += lg.loss;
      total.grad += lg.grad;
    }
    const double n = static_cast<double>(config.mle_batch_size);
    total.loss /= n;
    total.grad /= n;
    return total;
  };

  TrainRecord rec;
  double sum_len = 0.0;
  auto rl_batch = [&]() {
    std::vector<std::pair<const Passage*, std::uint64_t>> jobs;
    for (std::size_t i = 0; i < config.rl_batch_size; ++i) {
      jobs.emplace_back(&corpus[passage_order.next()],
                        mix_seed(config.seed, kRolloutStreamBase + rollout_counter++));
    }
    std::vector<Rollout> rollouts(jobs.size());
    const PolicyParams snapshot = params;
    auto run = [&](std::size_t i) {
      rollouts[i] = dual_rollout(*jobs[i].first, snapshot, student, jobs[i].second, reward_cfg,
                                 scorer, sp);
    };
    if (config.workers > 1) {
      std::vector<std::future<void>> pending;
      for (std::size_t start = 0; start < jobs.size(); start += config.workers) {
        pending.clear();
        for (std::size_t i = start; i < std::min(jobs.size(), start + config.workers); ++i) {
          pending.push_back(std::async(std::launch::async, run, i));
        }
        for (auto& f : pending) f.get();
      }
    } else {
      for (std::size_t i = 0; i < jobs.size(); ++i) run(i);
    }

    LossGrad total;
    for (const Rollout& r : rollouts) {
      const LossGrad lg = rl_loss_and_grad(params, r, config.weight_by_length);
      total.loss += lg.loss;
      total.grad += lg.grad;
      for (const TurnRecord& t : r.per_turn) {
        rec.mean_r_cov += t.sampled_reward.r_cov;
        rec.mean_r_coh += t.sampled_reward.r_coh;
        rec.mean_r_mixed += t.sampled_reward.r_mixed;
        rec.max_r_cov = rec.n_turns_scored == 0 ? t.sampled_reward.r_cov
                                                : std::max(rec.max_r_cov, t.sampled_reward.r_cov);
        rec.n_clipped += t.sampled_reward.clipped ? 1 : 0;
        sum_len += static_cast<double>(tokenize(t.sampled_text).size());
        ++rec.n_turns_scored;
      }
    }
    const double n = static_cast<double>(rollouts.size());
    total.loss /= n;
    total.grad /= n;
    return total;
  };

  auto apply = [&](const Features& grad, std::size_t step, UpdateKind kind) {
    const PolicyParams last_good = params;
    params.weights -= config.learning_rate * grad;
    result.trace.push_back(kind);
    if (!params.finite()) throw DivergedParametersError(step, last_good);
  };

  for (std::size_t step = 1; step <= config.steps; ++step) {
    rec = TrainRecord{};
    rec.step = step;
    sum_len = 0.0;
    double loss_mle = 0.0;
    double loss_rl = 0.0;
    std::size_t n_mle = 0;
    std::size_t n_rl = 0;

    if (config.explicit_gamma) {
      const double gamma = *config.explicit_gamma;
      Features grad = Features::Zero();
      if (uses_mle) {
        const LossGrad m = mle_batch();
        loss_mle += m.loss;
        ++n_mle;
        grad += (1.0 - gamma) * m.grad;
      }
      const LossGrad r = rl_batch();
      loss_rl += r.loss;
      ++n_rl;
      grad += gamma * r.grad;
      apply(grad, step, UpdateKind::Blended);
    } else {
      for (std::size_t i = 0; i < config.mle_batches_per_cycle; ++i) {
        const LossGrad m = mle_batch();
        loss_mle += m.loss;
        ++n_mle;
        apply(m.grad, step, UpdateKind::Mle);
      }
      for (std::size_t i = 0; i < config.rl_batches_per_cycle; ++i) {
        const LossGrad r = rl_batch();
        loss_rl += r.loss;
        ++n_rl;
        apply(r.grad, step, UpdateKind::Rl);
      }
    }

    rec.loss_mle = n_mle ? loss_mle / static_cast<double>(n_mle) : 0.0;
    rec.loss_rl = n_rl ? loss_rl / static_cast<double>(n_rl) : 0.0;
    if (rec.n_turns_scored > 0) {
      const double n = static_cast<double>(rec.n_turns_scored);
      rec.mean_r_cov /= n;
      rec.mean_r_coh /= n;
      rec.mean_r_mixed /= n;
      rec.mean_len = sum_len / n;
    }
    result.log.records.push_back(rec);
    if (hooks.on_checkpoint && config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
      hooks.on_checkpoint(step, params);
    }
  }
  return result;
}

}  // namespace teachplay
