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

#include <doctest.h>

#include "oracles.hpp"
#include "teachplay/text.hpp"

using namespace teachplay;

namespace {

std::vector<std::string> toks(std::string_view s) { return tokenize(s).tokens; }

}  // namespace

TEST_CASE("tokenize lowercases and strips edge punctuation") {
  CHECK(toks("").empty());
  CHECK(toks("The cat, sat.") == std::vector<std::string>{"the", "cat", "sat"});
  CHECK(toks("BERT's score: 80.5%") == std::vector<std::string>{"bert's", "score", "80.5"});
  CHECK(toks("  -- ... ").empty());
  CHECK(toks("well-known (test)") == std::vector<std::string>{"well-known", "test"});
}

TEST_CASE("tokenize splits on unicode whitespace") {
  CHECK(toks("a b　c\td") == std::vector<std::string>{"a", "b", "c", "d"});
}

TEST_CASE("tokenize_with_offsets points back into the text") {
  const std::string text = "Hello, big world!";
  const auto spans = tokenize_with_offsets(text);
  REQUIRE(spans.size() == 3);
  CHECK(text.substr(spans[1].begin, spans[1].end - spans[1].begin) == "big");
  CHECK(spans[0].token == "hello");
}

TEST_CASE("rouge_n fixtures") {
  CHECK(rouge_n_f1(tokenize("a b c"), tokenize("a b c"), 1) == doctest::Approx(1.0));
  CHECK(rouge_n_f1(tokenize("the cat sat"), tokenize("the cat ran"), 1) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK(rouge_n_f1(tokenize("a b"), tokenize("c d"), 1) == 0.0);
  CHECK(rouge_n_f1(tokenize("a"), tokenize("a"), 2) == 0.0);
  CHECK(rouge_n_f1(tokenize("a a a"), tokenize("a"), 1) == doctest::Approx(0.5));
}

TEST_CASE("rouge_l fixtures") {
  CHECK(rouge_l_f1(tokenize("a b c d"), tokenize("a b c d")) == doctest::Approx(1.0));
  CHECK(rouge_l_f1(tokenize("a b c d"), tokenize("a c")) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK(rouge_l_f1(tokenize(""), tokenize("a")) == 0.0);
  CHECK(lcs_length(tokenize("a b c b d a b"), tokenize("b d c a b a")) == 4);
}

TEST_CASE("ngram bag counts sum to the number of windows") {
  const auto s = tokenize("a b a b c");
  for (std::size_t n = 1; n <= 6; ++n) {
    const NgramBag bag(s, n);
    std::size_t sum = 0;
    for (const auto& [k, v] : bag.counts()) sum += v;
    CHECK(sum == (s.size() >= n ? s.size() - n + 1 : 0));
    CHECK(bag.total() == sum);
  }
  CHECK(clipped_overlap(NgramBag(tokenize("a a b"), 1), NgramBag(tokenize("a a a"), 1)) == 2);
}

TEST_CASE("rouge matches the brute-force oracle on random pairs") {
  Rng rng(20260101);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = oracle::random_words(rng, 12, 5);
    const auto b = oracle::random_words(rng, 12, 5);
    const auto sa = oracle::seq(a);
    const auto sb = oracle::seq(b);
    CHECK(std::abs(rouge_n_f1(sa, sb, 1) - oracle::rouge_n(a, b, 1)) <= 1e-12);
    CHECK(std::abs(rouge_n_f1(sa, sb, 2) - oracle::rouge_n(a, b, 2)) <= 1e-12);
    CHECK(std::abs(rouge_l_f1(sa, sb) - oracle::rouge_l(a, b)) <= 1e-12);
    CHECK(std::abs(rouge_n_f1(sa, sb, 1) - rouge_n_f1(sb, sa, 1)) <= 1e-12);
  }
}

TEST_CASE("appending a reference token never lowers the overlap") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ref = oracle::random_words(rng, 10, 5);
    if (ref.empty()) continue;
    auto cand = oracle::random_words(rng, 10, 5);
    const NgramBag r(oracle::seq(ref), 1);
    const auto before = clipped_overlap(r, NgramBag(oracle::seq(cand), 1));
    cand.push_back(ref[uniform_index(rng, ref.size())]);
    CHECK(clipped_overlap(r, NgramBag(oracle::seq(cand), 1)) >= before);
  }
}

TEST_CASE("rouge is exactly one on identical sequences") {
  const auto s = tokenize("the river rises in the hills and the river falls");
  for (std::size_t n = 1; n <= 3; ++n) CHECK(rouge_n_f1(s, s, n) == 1.0);
  CHECK(rouge_l_f1(s, s) == 1.0);
}

TEST_CASE("split_sentences keeps abbreviations together") {
  const auto s = split_sentences("We test it, e.g. on toys. It works!  Does it? Yes");
  REQUIRE(s.size() == 4);
  CHECK(s[0] == "We test it, e.g. on toys.");
  CHECK(s[1] == "It works!");
  CHECK(s[3] == "Yes");
  CHECK(split_sentences("Smith et al. report gains. Fine.").size() == 2);
}

TEST_CASE("entities are capitalized runs and numbers") {
  const auto e = extract_entities("BERT obtains 80.5 on GLUE");
  std::vector<std::string> texts;
  for (const auto& x : e) texts.push_back(x.text);
  CHECK(std::find(texts.begin(), texts.end(), "BERT") != texts.end());
  CHECK(std::find(texts.begin(), texts.end(), "80.5") != texts.end());
  CHECK(std::find(texts.begin(), texts.end(), "GLUE") != texts.end());
  for (const auto& x : e) {
    CHECK(std::string_view("BERT obtains 80.5 on GLUE").substr(x.begin, x.end - x.begin) == x.text);
  }
}

TEST_CASE("join and concat") {
  CHECK(join({"a", "b", "c"}, ", ") == "a, b, c");
  CHECK(join({}, ",").empty());
  CHECK(concat(tokenize("a b"), tokenize("c")).tokens == std::vector<std::string>{"a", "b", "c"});
}
