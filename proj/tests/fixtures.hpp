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

// Seeded random policies, feature matrices and rollouts for gradient checks.

#pragma once

#include "teachplay/policy.hpp"
#include "teachplay/rng.hpp"
#include "teachplay/selfplay.hpp"

namespace fixture {

using namespace teachplay;

inline FeatureRows random_rows(Rng& rng, int n) {
  FeatureRows f(n, kFeatureDim);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < kFeatureDim; ++k) f(i, k) = uniform01(rng) * 2.0 - 1.0;
  }
  return f;
}

inline PolicyParams random_params(Rng& rng) {
  PolicyParams p;
  for (int k = 0; k < kFeatureDim; ++k) p.weights(k) = uniform01(rng) * 4.0 - 2.0;
  p.temperature = 0.5 + uniform01(rng);
  return p;
}

inline TurnRecord turn(const FeatureRows& f, std::size_t chosen, double r_sampled, double r_greedy) {
  TurnRecord t;
  t.features = f;
  t.sampled_decision.chosen_index = chosen;
  t.sampled_reward.r_mixed = r_sampled;
  t.greedy_reward.r_mixed = r_greedy;
  return t;
}

inline Rollout random_rollout(Rng& rng, int turns) {
  Rollout r;
  for (int n = 0; n < turns; ++n) {
    const int k = 2 + static_cast<int>(uniform_index(rng, 5));
    r.per_turn.push_back(turn(random_rows(rng, k), uniform_index(rng, k), uniform01(rng),
                              uniform01(rng)));
  }
  return r;
}

}  // namespace fixture
