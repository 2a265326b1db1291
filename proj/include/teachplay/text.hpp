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

// Tokenization, n-gram bags and ROUGE F1 scoring. Everything here is a pure
// function of its arguments.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace teachplay {

struct TokenSeq {
  std::vector<std::string> tokens;
  std::size_t source_len_chars = 0;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens[i]; }

  friend bool operator==(const TokenSeq& a, const TokenSeq& b) {
    return a.tokens == b.tokens;
  }
};

/// A token with the byte range of the whitespace-delimited chunk that
/// produced it.
struct TokenSpan {
  std::string token;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Lowercases ASCII letters, splits on Unicode whitespace, strips leading and
/// trailing punctuation from every chunk and drops chunks that end up empty.
/// Internal hyphens and apostrophes survive ("bert's", "self-play").
TokenSeq tokenize(std::string_view text);

std::vector<TokenSpan> tokenize_with_offsets(std::string_view text);

/// Token concatenation a ⊕ b.
TokenSeq concat(const TokenSeq& a, const TokenSeq& b);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Multiset of n-grams. Keys are the n tokens joined by '\x1f'.
class NgramBag {
 public:
  using Map = std::unordered_map<std::string, std::size_t>;

  NgramBag(const TokenSeq& seq, std::size_t n);

  std::size_t order() const noexcept { return n_; }
  std::size_t total() const noexcept { return total_; }
  const Map& counts() const noexcept { return counts_; }
  std::size_t count(const std::string& key) const;

 private:
  std::size_t n_;
  std::size_t total_ = 0;
  Map counts_;
};

/// Σ over candidate n-grams of min(candidate count, reference count).
std::size_t clipped_overlap(const NgramBag& reference, const NgramBag& candidate);

/// 2PR/(P+R); 0 when either side is empty or there is no overlap.
double f1_from_counts(std::size_t overlap, std::size_t candidate_total,
                      std::size_t reference_total);

double rouge_n_f1(const TokenSeq& reference, const TokenSeq& candidate, std::size_t n);

inline double rouge_1_f1(const TokenSeq& reference, const TokenSeq& candidate) {
  return rouge_n_f1(reference, candidate, 1);
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

double rouge_l_f1(const TokenSeq& reference, const TokenSeq& candidate);

enum class RougeVariant { R1, R2, RL };

double rouge_f1(RougeVariant variant, const TokenSeq& reference, const TokenSeq& candidate);

std::string_view to_string(RougeVariant variant);

/// Splits on ". ", "? " and "! " (any whitespace after the mark), except after
/// "e.g.", "i.e." and "et al.". Sentences keep their closing punctuation.
std::vector<std::string> split_sentences(std::string_view text);

/// A surface entity: a run of capitalized words, a number, or a quoted span.
struct Entity {
  std::string text;
  std::size_t begin = 0;  // byte offsets into the source text
  std::size_t end = 0;
  std::size_t n_words = 0;
  bool numeric = false;
};

/// Capitalized runs (leading function words such as "The" dropped, a run
/// breaks at trailing punctuation), numbers, and optionally "quoted" spans, in
/// textual order.
std::vector<Entity> extract_entities(std::string_view text, bool include_quoted = false);

/// Capitalized function words ("The", "However", "Did") that never start an
/// entity.
bool is_function_word(std::string_view word);

}  // namespace teachplay
