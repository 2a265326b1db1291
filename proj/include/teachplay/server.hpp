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

// Human-evaluation sessions: chat with a teacher checkpoint, recover masked
// sentences, score the rubric. State lives in memory and is rebuilt on start
// by replaying an append-only JSONL event log.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "teachplay/dialogue.hpp"
#include "teachplay/error.hpp"
#include "teachplay/eval.hpp"
#include "teachplay/policy.hpp"

namespace httplib {
class Server;
}

namespace teachplay {

enum class SessionState { Chatting, Qa, Rating, Done };

std::string_view to_string(SessionState state);
SessionState session_state_from_string(std::string_view s);

inline constexpr std::size_t kSessionTeacherTurns = 3;
inline constexpr std::size_t kSessionQaItems = 5;

struct Rubric {
  int coherence = 0;    // 1..3
  int readability = 0;  // 1..3
  int overall = 0;      // 0..3

  /// Throws OutOfRange.
  void validate() const;
};

struct QaAnswer {
  bool recoverable = false;
  std::optional<std::string> recovered_text;
};

struct EvalSession {
  std::string session_id;
  std::string passage_id;
  std::string checkpoint_id;
  std::int64_t created_at = 0;  // unix seconds
  SessionState state = SessionState::Chatting;
  Conversation conversation;
  std::vector<ClozeQuestion> qa_items;
  std::vector<QaAnswer> answers;
  std::optional<double> qa_human_ratio;
  std::optional<Rubric> ratings;
};

/// Full DONE record, passage included.
nlohmann::json session_record(const EvalSession& session, const Passage& passage);

struct ResultAggregate {
  std::string checkpoint_id;
  std::size_t n_sessions = 0;
  std::optional<double> qa_human;  // over sessions that had QA items
  double coherence = 0.0;
  double readability = 0.0;
  double overall = 0.0;
};

nlohmann::json to_json(const ResultAggregate& a);

/// Per-checkpoint means over DONE records, sorted by checkpoint id.
std::vector<ResultAggregate> aggregate_results(const std::vector<nlohmann::json>& records);

struct ServiceOptions {
  std::string log_path;  // empty: no persistence
  /// Injected clock for created_at; defaults to the system clock.
  std::int64_t (*clock)() = nullptr;
};

/// Transport-free session logic. Every public call is safe to issue from
/// several threads; two overlapping calls on one session give Busy.
class SessionService {
 public:
  /// Replays options.log_path if it exists. A torn final line is skipped.
  SessionService(std::vector<Passage> passages,
                 std::vector<std::pair<std::string, PolicyParams>> checkpoints,
                 ServiceOptions options = {});
  ~SessionService();

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  /// Empty checkpoint_id picks checkpoints round-robin. Returns
  /// {session_id, checkpoint_id, opening_utterance, state}.
  nlohmann::json create_session(const std::string& passage_id, const std::string& checkpoint_id);
  /// {teacher_response, chat_closed, state}
  nlohmann::json post_utterance(const std::string& session_id, const std::string& text);
  /// {items: [{index, masked_form}]}
  nlohmann::json get_qa_task(const std::string& session_id);
  /// {qa_human_ratio, state}
  nlohmann::json submit_qa(const std::string& session_id, const std::vector<QaAnswer>& answers);
  /// {done, state}
  nlohmann::json submit_rating(const std::string& session_id, const Rubric& rubric);
  /// {session_id, passage_id, checkpoint_id, state, transcript}; the passage
  /// is added only once DONE.
  nlohmann::json get_session(const std::string& session_id);

  /// DONE session records, optionally for one checkpoint, in creation order.
  std::vector<nlohmann::json> export_results(const std::string& checkpoint_id = {});

  std::size_t n_sessions() const;
  std::size_t replayed_events() const noexcept { return replayed_; }
  std::size_t skipped_log_lines() const noexcept { return skipped_; }

 private:
  struct Slot {
    std::mutex busy;
    EvalSession session;
  };
  class Lease;

  Lease lease(const std::string& session_id);
  const Passage& passage(const std::string& id) const;
  const PolicyParams& checkpoint(const std::string& id) const;
  std::string teacher_reply(const EvalSession& s) const;
  std::vector<ClozeQuestion> qa_items_for(const Passage& p) const;
  void append_event(const nlohmann::json& event);
  void replay();
  void apply(const nlohmann::json& event);
  std::int64_t now() const;

  std::map<std::string, Passage> passages_;
  std::vector<std::pair<std::string, PolicyParams>> checkpoints_;
  ServiceOptions options_;

  mutable std::mutex table_mu_;
  std::map<std::string, std::unique_ptr<Slot>> sessions_;
  std::vector<std::string> order_;
  std::uint64_t next_id_ = 1;
  std::size_t round_robin_ = 0;

  std::mutex log_mu_;
  std::ofstream log_;
  std::size_t replayed_ = 0;
  std::size_t skipped_ = 0;
};

/// HTTP status for a service error: 404 unknown ids, 409 state conflicts,
/// 422 bad input.
int http_status(ErrorCode code);

/// JSON routes over a SessionService.
class HttpServer {
 public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();

  /// Blocks until stop().
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  SessionService& service_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace teachplay
