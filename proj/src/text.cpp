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

#include "teachplay/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <unordered_set>

namespace teachplay {
namespace {

// Length in bytes of a Unicode whitespace sequence starting at i, or 0.
std::size_t whitespace_len(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
  auto at = [&](std::size_t k) {
    return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0u;
  };
  if (c == 0xC2 && (at(1) == 0x85 || at(1) == 0xA0)) return 2;
  if (c == 0xE1 && at(1) == 0x9A && at(2) == 0x80) return 3;  // U+1680
  if (c == 0xE2 && at(1) == 0x80) {
    const auto b = at(2);
    if ((b >= 0x80 && b <= 0x8A) || b == 0xA8 || b == 0xA9 || b == 0xAF) return 3;
  }
  if (c == 0xE2 && at(1) == 0x81 && at(2) == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && at(1) == 0x80 && at(2) == 0x80) return 3;  // U+3000
  return 0;
}

// Multi-byte punctuation treated like ASCII punctuation at token edges.
constexpr std::array<std::string_view, 9> kUnicodePunct = {
    "“", "”", "‘", "’", "«", "»", "…", "–", "—"};

std::size_t leading_punct_len(std::string_view s) {
  if (s.empty()) return 0;
  if (std::ispunct(static_cast<unsigned char>(s.front()))) return 1;
  for (auto p : kUnicodePunct) {
    if (s.starts_with(p)) return p.size();
  }
  return 0;
}

std::size_t trailing_punct_len(std::string_view s) {
  if (s.empty()) return 0;
  if (std::ispunct(static_cast<unsigned char>(s.back()))) return 1;
  for (auto p : kUnicodePunct) {
    if (s.ends_with(p)) return p.size();
  }
  return 0;
}

struct Chunk {
  std::size_t begin;
  std::size_t end;
};

std::vector<Chunk> whitespace_chunks(std::string_view text) {
  std::vector<Chunk> chunks;
  std::size_t i = 0;
  std::size_t start = std::string_view::npos;
  while (i < text.size()) {
    const std::size_t ws = whitespace_len(text, i);
    if (ws > 0) {
      if (start != std::string_view::npos) {
        chunks.push_back({start, i});
        start = std::string_view::npos;
      }
      i += ws;
    } else {
      if (start == std::string_view::npos) start = i;
      ++i;
    }
  }
  if (start != std::string_view::npos) chunks.push_back({start, text.size()});
  return chunks;
}

// Core of a chunk after stripping edge punctuation, as offsets.
Chunk strip_punct(std::string_view text, Chunk c) {
  while (c.begin < c.end) {
    const std::size_t n = leading_punct_len(text.substr(c.begin, c.end - c.begin));
    if (n == 0) break;
    c.begin += n;
  }
  while (c.begin < c.end) {
    const std::size_t n = trailing_punct_len(text.substr(c.begin, c.end - c.begin));
    if (n == 0) break;
    c.end -= n;
  }
  return c;
}

struct GramRef {
  std::size_t hash;
  const std::string* first;
};

// Orders by hash, then by tokens; any total order works for the merge.
int compare_ngrams(const GramRef& a, const GramRef& b, std::size_t n) {
  if (a.hash != b.hash) return a.hash < b.hash ? -1 : 1;
  for (std::size_t k = 0; k < n; ++k) {
    if (const int c = a.first[k].compare(b.first[k]); c != 0) return c;
  }
  return 0;
}

std::vector<GramRef> sorted_ngrams(const TokenSeq& seq, std::size_t n) {
  std::vector<GramRef> out;
  if (n == 0 || seq.size() < n) return out;
  std::vector<std::size_t> h(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) h[i] = std::hash<std::string>{}(seq.tokens[i]);
  out.reserve(seq.size() - n + 1);
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    std::size_t g = h[i];
    for (std::size_t k = 1; k < n; ++k) g = g * 0x9E3779B97F4A7C15ull + h[i + k];
    out.push_back({g, &seq.tokens[i]});
  }
  std::sort(out.begin(), out.end(), [n](const GramRef& a, const GramRef& b) {
    return compare_ngrams(a, b, n) < 0;
  });
  return out;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) {
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

std::string ngram_key(const std::vector<std::string>& tokens, std::size_t pos, std::size_t n) {
  std::string key = tokens[pos];
  for (std::size_t k = 1; k < n; ++k) {
    key.push_back('\x1f');
    key += tokens[pos + k];
  }
  return key;
}

bool ends_with_abbreviation(std::string_view upto) {
  static constexpr std::array<std::string_view, 3> kAbbrev = {"e.g.", "i.e.", "et al."};
  const std::string lowered = lower_ascii(upto);
  for (auto a : kAbbrev) {
    if (lowered.size() >= a.size() && std::string_view(lowered).ends_with(a)) {
      const std::size_t before = lowered.size() - a.size();
      if (before == 0 || !std::isalnum(static_cast<unsigned char>(lowered[before - 1]))) {
        return true;
      }
    }
  }
  return false;
}

const std::unordered_set<std::string_view>& function_words() {
  static const std::unordered_set<std::string_view> words = {
      "The", "A", "An", "This", "That", "These", "Those", "It", "Its", "In", "On", "At",
      "By", "For", "From", "With", "As", "Of", "To", "And", "But", "Or", "If", "When",
      "While", "After", "Before", "Did", "Do", "Does", "Well", "What", "Why", "How", "Who",
      "Where", "Which", "However", "Moreover", "Furthermore", "Also", "Thus", "Therefore",
      "Meanwhile", "Indeed", "Instead", "Additionally", "Consequently", "Nevertheless",
      "Finally", "We", "Our", "They", "Their", "He", "She", "His", "Her", "I", "You", "Tell",
      "Go", "That's", "It's", "There", "Here", "Some", "Many", "Most", "Each", "All", "Both",
      "Yes", "No", "Not", "Is", "Are", "Was", "Were", "Can", "Could", "Will", "Would",
      "Such", "Other", "Since", "Because", "Although", "During", "Under", "Over", "Into",
      "About", "Today", "Yesterday", "Recently", "Later", "Then", "So", "Now"};
  return words;
}

bool is_number_core(std::string_view core) {
  bool digit = false;
  for (char c : core) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isdigit(u)) {
      digit = true;
    } else if (c != '.' && c != ',' && c != '-' && c != '%') {
      return false;
    }
  }
  return digit;
}

}  // namespace

bool is_function_word(std::string_view word) { return function_words().contains(word); }

std::vector<TokenSpan> tokenize_with_offsets(std::string_view text) {
  std::vector<TokenSpan> out;
  for (const Chunk& raw : whitespace_chunks(text)) {
    const Chunk core = strip_punct(text, raw);
    if (core.begin >= core.end) continue;
    out.push_back({lower_ascii(text.substr(core.begin, core.end - core.begin)), raw.begin,
                   raw.end});
  }
  return out;
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq seq;
  seq.source_len_chars = text.size();
  for (auto& span : tokenize_with_offsets(text)) seq.tokens.push_back(std::move(span.token));
  return seq;
}

TokenSeq concat(const TokenSeq& a, const TokenSeq& b) {
  TokenSeq out;
  out.tokens.reserve(a.size() + b.size());
  out.tokens.insert(out.tokens.end(), a.tokens.begin(), a.tokens.end());
  out.tokens.insert(out.tokens.end(), b.tokens.begin(), b.tokens.end());
  out.source_len_chars = a.source_len_chars + b.source_len_chars;
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

NgramBag::NgramBag(const TokenSeq& seq, std::size_t n) : n_(n) {
  if (n == 0 || seq.size() < n) return;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts_[ngram_key(seq.tokens, i, n)];
    ++total_;
  }
}

std::size_t NgramBag::count(const std::string& key) const {
  const auto it = counts_.find(key);
  return it == counts_.end() ? 0 : it->second;
}

std::size_t clipped_overlap(const NgramBag& reference, const NgramBag& candidate) {
  std::size_t overlap = 0;
  for (const auto& [key, c] : candidate.counts()) {
    overlap += std::min(c, reference.count(key));
  }
  return overlap;
}

double f1_from_counts(std::size_t overlap, std::size_t candidate_total,
                      std::size_t reference_total) {
  if (candidate_total == 0 || reference_total == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(candidate_total);
  const double recall = static_cast<double>(overlap) / static_cast<double>(reference_total);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double rouge_n_f1(const TokenSeq& reference, const TokenSeq& candidate, std::size_t n) {
  const auto ref = sorted_ngrams(reference, n);
  const auto cand = sorted_ngrams(candidate, n);
  std::size_t overlap = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ref.size() && j < cand.size()) {
    const int c = compare_ngrams(ref[i], cand[j], n);
    if (c < 0) {
      ++i;
    } else if (c > 0) {
      ++j;
    } else {
      ++overlap;
      ++i;
      ++j;
    }
  }
  return f1_from_counts(overlap, cand.size(), ref.size());
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f1(const TokenSeq& reference, const TokenSeq& candidate) {
  return f1_from_counts(lcs_length(reference, candidate), candidate.size(), reference.size());
}

double rouge_f1(RougeVariant variant, const TokenSeq& reference, const TokenSeq& candidate) {
  switch (variant) {
    case RougeVariant::R1:
      return rouge_n_f1(reference, candidate, 1);
    case RougeVariant::R2:
      return rouge_n_f1(reference, candidate, 2);
    case RougeVariant::RL:
      return rouge_l_f1(reference, candidate);
  }
  return 0.0;
}

std::string_view to_string(RougeVariant variant) {
  switch (variant) {
    case RougeVariant::R1:
      return "r1";
    case RougeVariant::R2:
      return "r2";
    case RougeVariant::RL:
      return "rl";
  }
  return "?";
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && whitespace_len(text, b) > 0) b += whitespace_len(text, b);
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) sentences.emplace_back(text.substr(b, e - b));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '?' && c != '!') continue;
    if (whitespace_len(text, i + 1) == 0) continue;
    if (c == '.' && ends_with_abbreviation(text.substr(start, i + 1 - start))) continue;
    emit(start, i + 1);
    start = i + 1;
  }
  emit(start, text.size());
  return sentences;
}

std::vector<Entity> extract_entities(std::string_view text, bool include_quoted) {
  std::vector<Entity> entities;
  const auto& stop = function_words();

  std::vector<Chunk> run;
  auto close_run = [&] {
    std::size_t first = 0;
    while (first < run.size() &&
           stop.contains(text.substr(run[first].begin, run[first].end - run[first].begin))) {
      ++first;
    }
    if (first < run.size()) {
      Entity e;
      e.begin = run[first].begin;
      e.end = run.back().end;
      e.text = std::string(text.substr(e.begin, e.end - e.begin));
      e.n_words = run.size() - first;
      entities.push_back(std::move(e));
    }
    run.clear();
  };

  for (const Chunk& raw : whitespace_chunks(text)) {
    const Chunk core = strip_punct(text, raw);
    if (core.begin >= core.end) {
      close_run();
      continue;
    }
    const std::string_view word = text.substr(core.begin, core.end - core.begin);
    const bool leading_punct = core.begin != raw.begin;
    const bool trailing_punct = core.end != raw.end;
    if (is_number_core(word)) {
      close_run();
      entities.push_back({std::string(word), core.begin, core.end, 1, true});
      continue;
    }
    if (std::isupper(static_cast<unsigned char>(word.front()))) {
      if (leading_punct) close_run();
      run.push_back(core);
      if (trailing_punct) close_run();
    } else {
      close_run();
    }
  }
  close_run();

  if (include_quoted) {
    std::size_t open = std::string_view::npos;
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] != '"') continue;
      if (open == std::string_view::npos) {
        open = i;
      } else {
        if (i > open + 1) {
          Entity e;
          e.begin = open + 1;
          e.end = i;
          e.text = std::string(text.substr(e.begin, e.end - e.begin));
          e.n_words = tokenize(e.text).size();
          if (e.n_words > 0) entities.push_back(std::move(e));
        }
        open = std::string_view::npos;
      }
    }
    std::stable_sort(entities.begin(), entities.end(),
                     [](const Entity& a, const Entity& b) { return a.begin < b.begin; });
  }
  return entities;
}

}  // namespace teachplay
