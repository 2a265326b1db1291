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

// Independent reference implementations the tests compare against. Nothing
// here calls into the library beyond its public types.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Core>

#include "teachplay/error.hpp"
#include "teachplay/rng.hpp"
#include "teachplay/text.hpp"

namespace oracle {

using Words = std::vector<std::string>;

inline teachplay::TokenSeq seq(const Words& w) {
  teachplay::TokenSeq s;
  s.tokens = w;
  return s;
}

inline double f1(double overlap, double cand_total, double ref_total) {
  if (overlap == 0.0 || cand_total == 0.0 || ref_total == 0.0) return 0.0;
  const double p = overlap / cand_total;
  const double r = overlap / ref_total;
  return 2.0 * p * r / (p + r);
}

// n-gram counting through an ordered map of word vectors.
inline double rouge_n(const Words& ref, const Words& cand, std::size_t n) {
  auto bag = [n](const Words& w) {
    std::map<Words, int> m;
    for (std::size_t i = 0; i + n <= w.size(); ++i) ++m[Words(w.begin() + i, w.begin() + i + n)];
    return m;
  };
  const auto r = bag(ref);
  const auto c = bag(cand);
  int overlap = 0;
  int rt = 0;
  int ct = 0;
  for (const auto& [k, v] : r) rt += v;
  for (const auto& [k, v] : c) {
    ct += v;
    const auto it = r.find(k);
    if (it != r.end()) overlap += std::min(v, it->second);
  }
  return f1(overlap, ct, rt);
}

inline bool is_subsequence(const Words& sub, const Words& of) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < of.size() && j < sub.size(); ++i) {
    if (of[i] == sub[j]) ++j;
  }
  return j == sub.size();
}

// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t lcs(const Words& a, const Words& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    Words sub;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::size_t{1} << i)) sub.push_back(a[i]);
    }
    if (sub.size() > best && is_subsequence(sub, b)) best = sub.size();
  }
  return best;
}

inline double rouge_l(const Words& ref, const Words& cand) {
  return f1(static_cast<double>(lcs(ref, cand)), cand.size(), ref.size());
}

inline Words random_words(teachplay::Rng& rng, std::size_t max_len, std::size_t vocab) {
  const std::size_t len = teachplay::uniform_index(rng, max_len + 1);
  Words w;
  for (std::size_t i = 0; i < len; ++i) {
    w.push_back(std::string(1, static_cast<char>('a' + teachplay::uniform_index(rng, vocab))));
  }
  return w;
}

// Central differences of a scalar function of the 6 policy weights.
template <typename Vec>
Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& at,
                       double h = 1e-5) {
  Vec g = Vec::Zero();
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    Vec up = at;
    Vec down = at;
    up(i) += h;
    down(i) -= h;
    g(i) = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-8});
  return (a - b).norm() / scale;
}

// Plain-loop Pearson r.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline std::string data_path(const std::string& name) {
  return std::string(TEACHPLAY_DATA_DIR) + "/" + name;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("teachplay_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
