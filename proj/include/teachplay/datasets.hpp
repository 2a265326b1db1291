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

// Corpus and dialogue ingestion. Files are UTF-8, newline-delimited.
//
//   passages (JSONL): {"id": "...", "text": "...", "source": "news"}
//   passages (TSV):   id<TAB>text
//   dialogues (JSONL): {"dialogue_id", "passage_id",
//                       "turns": [{"speaker": "teacher"|"student", "text"}]}

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "teachplay/dialogue.hpp"
#include "teachplay/error.hpp"
#include "teachplay/rng.hpp"

namespace teachplay {

enum class PassageFormat { PlainJsonl, Tsv };

/// Throws MalformedRow (with the 1-based line number), EmptyFile, or Io.
std::vector<Passage> load_passages(const std::string& path,
                                   PassageFormat format = PassageFormat::PlainJsonl,
                                   std::optional<std::size_t> truncate_tokens = std::nullopt);

std::vector<Passage> parse_passages(std::istream& in, PassageFormat format,
                                    std::optional<std::size_t> truncate_tokens,
                                    const std::string& source_name = "<stream>");

/// Text cut right after the chunk holding the max_tokens-th token.
std::string truncate_to_tokens(const std::string& text, std::size_t max_tokens);

void write_passages_jsonl(const std::string& path, const std::vector<Passage>& passages);

/// Throws MalformedDialogue, EmptyFile, or Io.
std::vector<Dialogue> load_dialogues(const std::string& path);
std::vector<Dialogue> parse_dialogues(std::istream& in, const std::string& source_name = "<stream>");

/// A reference teacher response used by the MLE anchor loss.
struct AnchorExample {
  std::string passage_id;
  std::vector<std::string> history;
  std::string gold_response;
};

/// One anchor per teacher turn of every dialogue.
std::vector<AnchorExample> anchors_from_dialogues(const std::vector<Dialogue>& dialogues);

struct CorpusManifest {
  std::string name;
  SourceKind source = SourceKind::Other;
  std::size_t passage_count = 0;
  std::optional<std::size_t> truncate_tokens;
  std::uint64_t split_seed = 0;
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};

  /// Throws InvalidArgument unless ratios are non-negative and sum to 1.
  void validate() const;
};

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> valid;
  std::vector<T> test;
};

/// Split sizes: valid and test get floor(n * ratio), train takes the rest.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios);

/// Seeded shuffle, then contiguous train/valid/test cuts. Throws TooSmall.
template <typename T>
Split<T> split(std::vector<T> corpus, std::uint64_t seed,
               const std::array<double, 3>& ratios = {0.8, 0.1, 0.1}) {
  if (corpus.size() < 3) {
    fail(ErrorCode::TooSmall, "need at least 3 items to split, got " + std::to_string(corpus.size()));
  }
  CorpusManifest manifest;
  manifest.split_ratios = ratios;
  manifest.validate();
  Rng rng(seed);
  shuffle(corpus.begin(), corpus.end(), rng);
  const auto sizes = split_sizes(corpus.size(), ratios);
  Split<T> out;
  auto it = std::make_move_iterator(corpus.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
  it += static_cast<std::ptrdiff_t>(sizes[0]);
  out.valid.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
  it += static_cast<std::ptrdiff_t>(sizes[1]);
  out.test.assign(it, std::make_move_iterator(corpus.end()));
  return out;
}

}  // namespace teachplay
