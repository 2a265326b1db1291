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

#include "teachplay/datasets.hpp"

#include <fstream>
#include <istream>

#include <json.hpp>

namespace teachplay {
namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  return in;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

[[noreturn]] void malformed_row(const std::string& source, std::size_t line_no,
                                const std::string& why) {
  fail(ErrorCode::MalformedRow, source + ":" + std::to_string(line_no) + ": " + why);
}

}  // namespace

std::string truncate_to_tokens(const std::string& text, std::size_t max_tokens) {
  const auto spans = tokenize_with_offsets(text);
  if (spans.size() <= max_tokens) return text;
  if (max_tokens == 0) return {};
  return text.substr(0, spans[max_tokens - 1].end);
}

std::vector<Passage> parse_passages(std::istream& in, PassageFormat format,
                                    std::optional<std::size_t> truncate_tokens,
                                    const std::string& source_name) {
  std::vector<Passage> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    std::string id, text;
    SourceKind source = SourceKind::Other;
    if (format == PassageFormat::Tsv) {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) malformed_row(source_name, line_no, "expected id<TAB>text");
      id = line.substr(0, tab);
      text = line.substr(tab + 1);
    } else {
      const auto row = nlohmann::json::parse(line, nullptr, false);
      if (row.is_discarded() || !row.is_object()) malformed_row(source_name, line_no, "invalid JSON");
      if (!row.contains("id") || !row["id"].is_string()) {
        malformed_row(source_name, line_no, "missing string field \"id\"");
      }
      if (!row.contains("text") || !row["text"].is_string()) {
        malformed_row(source_name, line_no, "missing string field \"text\"");
      }
      id = row["id"].get<std::string>();
      text = row["text"].get<std::string>();
      if (row.contains("source") && row["source"].is_string()) {
        source = source_kind_from_string(row["source"].get<std::string>());
      }
    }
    if (id.empty()) malformed_row(source_name, line_no, "empty id");
    if (truncate_tokens) text = truncate_to_tokens(text, *truncate_tokens);
    out.push_back(make_passage(std::move(id), std::move(text), source, truncate_tokens));
  }
  if (out.empty()) fail(ErrorCode::EmptyFile, source_name + " contains no passages");
  return out;
}

std::vector<Passage> load_passages(const std::string& path, PassageFormat format,
                                   std::optional<std::size_t> truncate_tokens) {
  auto in = open_input(path);
  return parse_passages(in, format, truncate_tokens, path);
}

void write_passages_jsonl(const std::string& path, const std::vector<Passage>& passages) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write '" + path + "'");
  for (const auto& p : passages) {
    nlohmann::json row = {{"id", p.id}, {"text", p.text}, {"source", to_string(p.source)}};
    out << row.dump() << '\n';
  }
}

std::vector<Dialogue> parse_dialogues(std::istream& in, const std::string& source_name) {
  std::vector<Dialogue> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    auto bad = [&](const std::string& why) {
      fail(ErrorCode::MalformedDialogue, source_name + ":" + std::to_string(line_no) + ": " + why);
    };
    const auto row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object()) bad("invalid JSON");
    Dialogue d;
    d.dialogue_id = row.value("dialogue_id", std::string{});
    d.passage_id = row.value("passage_id", std::string{});
    if (d.dialogue_id.empty()) bad("missing dialogue_id");
    if (!row.contains("turns") || !row["turns"].is_array()) bad("missing turns array");
    for (const auto& t : row["turns"]) {
      if (!t.is_object() || !t.contains("speaker") || !t.contains("text") ||
          !t["speaker"].is_string() || !t["text"].is_string()) {
        bad("each turn needs string speaker and text");
      }
      d.turns.emplace_back(speaker_from_string(t["speaker"].get<std::string>()),
                           t["text"].get<std::string>());
    }
    try {
      validate_dialogue(d);
    } catch (const Error& e) {
      bad(e.what());
    }
    out.push_back(std::move(d));
  }
  if (out.empty()) fail(ErrorCode::EmptyFile, source_name + " contains no dialogues");
  return out;
}

std::vector<Dialogue> load_dialogues(const std::string& path) {
  auto in = open_input(path);
  return parse_dialogues(in, path);
}

std::vector<AnchorExample> anchors_from_dialogues(const std::vector<Dialogue>& dialogues) {
  std::vector<AnchorExample> out;
  for (const auto& d : dialogues) {
    std::vector<std::string> history;
    for (const auto& [speaker, text] : d.turns) {
      if (speaker == Speaker::Teacher && !text.empty()) {
        out.push_back({d.passage_id, history, text});
      }
      history.push_back(text);
    }
  }
  return out;
}

void CorpusManifest::validate() const {
  double sum = 0.0;
  for (double r : split_ratios) {
    if (!(r >= 0.0)) fail(ErrorCode::InvalidArgument, "split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail(ErrorCode::InvalidArgument, "split ratios must sum to 1");
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  const auto floor_of = [n](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
  };
  const std::size_t valid = floor_of(ratios[1]);
  const std::size_t test = floor_of(ratios[2]);
  return {n - valid - test, valid, test};
}

}  // namespace teachplay
