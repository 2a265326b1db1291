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

#include "teachplay/server.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <httplib.h>

#include "teachplay/error.hpp"
#include "teachplay/rng.hpp"

namespace teachplay {
namespace {

std::int64_t system_clock_seconds() {
  using namespace std::chrono;
  return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

std::string format_session_id(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(n));
  return buf;
}

nlohmann::json transcript(const Conversation& c) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : c.turns()) {
    out.push_back({{"speaker", to_string(t.speaker)}, {"text", t.text}});
  }
  return out;
}

nlohmann::json rubric_json(const Rubric& r) {
  return {{"coherence", r.coherence}, {"readability", r.readability}, {"overall", r.overall}};
}

ClozeQuestion cloze_from_json(const nlohmann::json& j) {
  return {j.at("passage_id").get<std::string>(), j.at("sentence").get<std::string>(),
          j.at("masked_entity").get<std::string>(), j.at("masked_form").get<std::string>()};
}

nlohmann::json answers_json(const std::vector<QaAnswer>& answers) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& a : answers) {
    out.push_back({{"recoverable", a.recoverable},
                   {"recovered_text", a.recovered_text ? nlohmann::json(*a.recovered_text)
                                                       : nlohmann::json(nullptr)}});
  }
  return out;
}

std::vector<QaAnswer> answers_from_json(const nlohmann::json& j) {
  if (!j.is_array()) fail(ErrorCode::InvalidArgument, "\"answers\" must be an array");
  std::vector<QaAnswer> out;
  for (const auto& a : j) {
    if (!a.is_object() || !a.contains("recoverable") || !a["recoverable"].is_boolean()) {
      fail(ErrorCode::InvalidArgument, "each answer needs a boolean \"recoverable\"");
    }
    QaAnswer qa;
    qa.recoverable = a["recoverable"].get<bool>();
    if (a.contains("recovered_text") && a["recovered_text"].is_string()) {
      qa.recovered_text = a["recovered_text"].get<std::string>();
    }
    out.push_back(std::move(qa));
  }
  return out;
}

// Drops a torn final line so later appends start on a fresh line.
void trim_torn_tail(const std::string& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec || size == 0) return;
  std::ifstream in(path, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.back() == '\n') return;
  const auto last_nl = data.rfind('\n');
  std::filesystem::resize_file(path, last_nl == std::string::npos ? 0 : last_nl + 1);
}

}  // namespace

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::Chatting: return "CHATTING";
    case SessionState::Qa: return "QA";
    case SessionState::Rating: return "RATING";
    case SessionState::Done: return "DONE";
  }
  return "UNKNOWN";
}

SessionState session_state_from_string(std::string_view s) {
  if (s == "CHATTING") return SessionState::Chatting;
  if (s == "QA") return SessionState::Qa;
  if (s == "RATING") return SessionState::Rating;
  if (s == "DONE") return SessionState::Done;
  fail(ErrorCode::InvalidArgument, "unknown session state '" + std::string(s) + "'");
}

void Rubric::validate() const {
  if (coherence < 1 || coherence > 3) fail(ErrorCode::OutOfRange, "coherence must be in 1..3");
  if (readability < 1 || readability > 3) fail(ErrorCode::OutOfRange, "readability must be in 1..3");
  if (overall < 0 || overall > 3) fail(ErrorCode::OutOfRange, "overall must be in 0..3");
}

nlohmann::json session_record(const EvalSession& s, const Passage& passage) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& q : s.qa_items) items.push_back(to_json(q));
  return {{"session_id", s.session_id},
          {"passage_id", s.passage_id},
          {"checkpoint_id", s.checkpoint_id},
          {"created_at", s.created_at},
          {"state", to_string(s.state)},
          {"passage", passage.text},
          {"transcript", transcript(s.conversation)},
          {"qa_items", items},
          {"answers", answers_json(s.answers)},
          {"qa_human_ratio", s.qa_human_ratio ? nlohmann::json(*s.qa_human_ratio) : nlohmann::json(nullptr)},
          {"ratings", s.ratings ? rubric_json(*s.ratings) : nlohmann::json(nullptr)}};
}

nlohmann::json to_json(const ResultAggregate& a) {
  return {{"checkpoint_id", a.checkpoint_id},
          {"n_sessions", a.n_sessions},
          {"qa_human", a.qa_human ? nlohmann::json(*a.qa_human) : nlohmann::json(nullptr)},
          {"coherence", a.coherence},
          {"readability", a.readability},
          {"overall", a.overall}};
}

std::vector<ResultAggregate> aggregate_results(const std::vector<nlohmann::json>& records) {
  struct Acc {
    ResultAggregate agg;
    double qa = 0.0;
    std::size_t n_qa = 0;
  };
  std::map<std::string, Acc> by_checkpoint;
  for (const auto& r : records) {
    const std::string id = r.at("checkpoint_id").get<std::string>();
    Acc& acc = by_checkpoint[id];
    acc.agg.checkpoint_id = id;
    ++acc.agg.n_sessions;
    const auto& rating = r.at("ratings");
    acc.agg.coherence += rating.at("coherence").get<double>();
    acc.agg.readability += rating.at("readability").get<double>();
    acc.agg.overall += rating.at("overall").get<double>();
    if (r.contains("qa_human_ratio") && r["qa_human_ratio"].is_number()) {
      acc.qa += r["qa_human_ratio"].get<double>();
      ++acc.n_qa;
    }
  }
  std::vector<ResultAggregate> out;
  for (auto& [id, acc] : by_checkpoint) {
    const double n = static_cast<double>(acc.agg.n_sessions);
    acc.agg.coherence /= n;
    acc.agg.readability /= n;
    acc.agg.overall /= n;
    if (acc.n_qa > 0) acc.agg.qa_human = acc.qa / static_cast<double>(acc.n_qa);
    out.push_back(acc.agg);
  }
  return out;
}

// Holds a session's request lock for the duration of one call.
class SessionService::Lease {
 public:
  Lease(Slot& slot) : slot_(&slot), lock_(slot.busy, std::try_to_lock) {
    if (!lock_.owns_lock()) {
      fail(ErrorCode::Busy, "session " + slot.session.session_id + " is handling another request");
    }
  }
  EvalSession& operator*() { return slot_->session; }
  EvalSession* operator->() { return &slot_->session; }

 private:
  Slot* slot_;
  std::unique_lock<std::mutex> lock_;
};

SessionService::SessionService(std::vector<Passage> passages,
                               std::vector<std::pair<std::string, PolicyParams>> checkpoints,
                               ServiceOptions options)
    : checkpoints_(std::move(checkpoints)), options_(options) {
  for (auto& p : passages) {
    const std::string id = p.id;
    passages_.emplace(id, std::move(p));
  }
  if (!options_.log_path.empty()) {
    if (std::filesystem::exists(options_.log_path)) {
      replay();
      trim_torn_tail(options_.log_path);
    }
    log_.open(options_.log_path, std::ios::binary | std::ios::app);
    if (!log_) fail(ErrorCode::Io, "cannot open event log '" + options_.log_path + "'");
  }
}

SessionService::~SessionService() = default;

std::int64_t SessionService::now() const {
  return options_.clock ? options_.clock() : system_clock_seconds();
}

const Passage& SessionService::passage(const std::string& id) const {
  const auto it = passages_.find(id);
  if (it == passages_.end()) fail(ErrorCode::UnknownPassage, "unknown passage '" + id + "'");
  return it->second;
}

const PolicyParams& SessionService::checkpoint(const std::string& id) const {
  for (const auto& [name, params] : checkpoints_) {
    if (name == id) return params;
  }
  fail(ErrorCode::UnknownCheckpoint, "unknown checkpoint '" + id + "'");
}

SessionService::Lease SessionService::lease(const std::string& session_id) {
  Slot* slot = nullptr;
  {
    std::lock_guard<std::mutex> g(table_mu_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) fail(ErrorCode::UnknownSession, "unknown session '" + session_id + "'");
    slot = it->second.get();
  }
  return Lease(*slot);
}

std::string SessionService::teacher_reply(const EvalSession& s) const {
  const Passage& p = passage(s.passage_id);
  const auto candidates = gen_candidates(p, s.conversation);
  const Decision d = decide(checkpoint(s.checkpoint_id), candidates, DecodeMode::Greedy, 0);
  return candidates[d.chosen_index].text;
}

std::vector<ClozeQuestion> SessionService::qa_items_for(const Passage& p) const {
  // Seeded by passage so every evaluator of a passage sees the same task.
  try {
    return cloze_questions(p, kSessionQaItems, hash_string(p.id));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoMaskableEntities) throw;
    return {};
  }
}

void SessionService::append_event(const nlohmann::json& event) {
  if (!log_.is_open()) return;
  std::lock_guard<std::mutex> g(log_mu_);
  log_ << event.dump() << '\n';
  log_.flush();
  if (!log_) fail(ErrorCode::Io, "event log write failed");
}

nlohmann::json SessionService::create_session(const std::string& passage_id,
                                              const std::string& checkpoint_id) {
  passage(passage_id);
  if (checkpoints_.empty()) fail(ErrorCode::UnknownCheckpoint, "no checkpoints loaded");
  auto slot = std::make_unique<Slot>();
  EvalSession& s = slot->session;
  {
    std::lock_guard<std::mutex> g(table_mu_);
    if (checkpoint_id.empty()) {
      s.checkpoint_id = checkpoints_[round_robin_++ % checkpoints_.size()].first;
    } else {
      checkpoint(checkpoint_id);
      s.checkpoint_id = checkpoint_id;
    }
    s.session_id = format_session_id(next_id_++);
  }
  s.passage_id = passage_id;
  s.created_at = now();
  s.conversation = Conversation(passage_id);
  const std::string opening = teacher_reply(s);
  s.conversation.append(Speaker::Teacher, opening);

  append_event({{"type", "create"},
                {"session_id", s.session_id},
                {"passage_id", s.passage_id},
                {"checkpoint_id", s.checkpoint_id},
                {"created_at", s.created_at},
                {"opening_utterance", opening}});
  nlohmann::json reply = {{"session_id", s.session_id},
                          {"checkpoint_id", s.checkpoint_id},
                          {"opening_utterance", opening},
                          {"state", to_string(s.state)}};
  std::lock_guard<std::mutex> g(table_mu_);
  order_.push_back(s.session_id);
  sessions_.emplace(s.session_id, std::move(slot));
  return reply;
}

nlohmann::json SessionService::post_utterance(const std::string& session_id,
                                              const std::string& text) {
  auto s = lease(session_id);
  if (s->state != SessionState::Chatting ||
      s->conversation.n_teacher_turns() >= kSessionTeacherTurns) {
    fail(ErrorCode::SessionClosed, "chat is closed for session " + session_id);
  }
  if (tokenize(text).empty()) fail(ErrorCode::EmptyUtterance, "utterance is empty");

  Conversation next = s->conversation;
  next.append(Speaker::Student, text);
  EvalSession probe = *s;
  probe.conversation = next;
  const std::string response = teacher_reply(probe);
  next.append(Speaker::Teacher, response);
  const bool closed = next.n_teacher_turns() >= kSessionTeacherTurns;

  nlohmann::json event = {{"type", "utterance"},
                          {"session_id", session_id},
                          {"text", text},
                          {"teacher_response", response}};
  std::vector<ClozeQuestion> items;
  if (closed) {
    items = qa_items_for(passage(s->passage_id));
    nlohmann::json js = nlohmann::json::array();
    for (const auto& q : items) js.push_back(to_json(q));
    event["qa_items"] = js;
  }
  append_event(event);

  s->conversation = std::move(next);
  if (closed) {
    s->qa_items = std::move(items);
    s->state = SessionState::Qa;
  }
  return {{"teacher_response", response}, {"chat_closed", closed}, {"state", to_string(s->state)}};
}

nlohmann::json SessionService::get_qa_task(const std::string& session_id) {
  auto s = lease(session_id);
  if (s->state != SessionState::Qa) {
    fail(ErrorCode::WrongState, "session " + session_id + " is " + std::string(to_string(s->state)));
  }
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < s->qa_items.size(); ++i) {
    items.push_back({{"index", i}, {"masked_form", s->qa_items[i].masked_form}});
  }
  return {{"items", items}, {"state", to_string(s->state)}};
}

nlohmann::json SessionService::submit_qa(const std::string& session_id,
                                         const std::vector<QaAnswer>& answers) {
  auto s = lease(session_id);
  if (s->state != SessionState::Qa) {
    fail(ErrorCode::WrongState, "session " + session_id + " is " + std::string(to_string(s->state)));
  }
  if (answers.size() != s->qa_items.size()) {
    fail(ErrorCode::LengthMismatch, "expected " + std::to_string(s->qa_items.size()) +
                                        " answers, got " + std::to_string(answers.size()));
  }
  std::optional<double> ratio;
  if (!answers.empty()) {
    std::size_t ok = 0;
    for (const auto& a : answers) ok += a.recoverable ? 1 : 0;
    ratio = static_cast<double>(ok) / static_cast<double>(answers.size());
  }
  append_event({{"type", "qa"},
                {"session_id", session_id},
                {"answers", answers_json(answers)},
                {"qa_human_ratio", ratio ? nlohmann::json(*ratio) : nlohmann::json(nullptr)}});
  s->answers = answers;
  s->qa_human_ratio = ratio;
  s->state = SessionState::Rating;
  return {{"qa_human_ratio", ratio ? nlohmann::json(*ratio) : nlohmann::json(nullptr)},
          {"state", to_string(s->state)}};
}

nlohmann::json SessionService::submit_rating(const std::string& session_id, const Rubric& rubric) {
  auto s = lease(session_id);
  if (s->state != SessionState::Rating) {
    fail(ErrorCode::WrongState, "session " + session_id + " is " + std::string(to_string(s->state)));
  }
  rubric.validate();
  append_event({{"type", "rating"}, {"session_id", session_id}, {"ratings", rubric_json(rubric)}});
  s->ratings = rubric;
  s->state = SessionState::Done;
  return {{"done", true}, {"state", to_string(s->state)}};
}

nlohmann::json SessionService::get_session(const std::string& session_id) {
  auto s = lease(session_id);
  nlohmann::json out = {{"session_id", s->session_id},
                        {"passage_id", s->passage_id},
                        {"checkpoint_id", s->checkpoint_id},
                        {"state", to_string(s->state)},
                        {"transcript", transcript(s->conversation)}};
  if (s->state == SessionState::Done) {
    const auto it = passages_.find(s->passage_id);
    if (it != passages_.end()) out["passage"] = it->second.text;
  }
  return out;
}

std::vector<nlohmann::json> SessionService::export_results(const std::string& checkpoint_id) {
  std::vector<Slot*> slots;
  {
    std::lock_guard<std::mutex> g(table_mu_);
    for (const auto& id : order_) slots.push_back(sessions_.at(id).get());
  }
  std::vector<nlohmann::json> out;
  for (Slot* slot : slots) {
    std::lock_guard<std::mutex> g(slot->busy);
    const EvalSession& s = slot->session;
    if (s.state != SessionState::Done) continue;
    if (!checkpoint_id.empty() && s.checkpoint_id != checkpoint_id) continue;
    const auto it = passages_.find(s.passage_id);
    const Passage missing = make_passage(s.passage_id, "");
    out.push_back(session_record(s, it != passages_.end() ? it->second : missing));
  }
  return out;
}

std::size_t SessionService::n_sessions() const {
  std::lock_guard<std::mutex> g(table_mu_);
  return sessions_.size();
}

void SessionService::replay() {
  std::ifstream in(options_.log_path, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto event = nlohmann::json::parse(line, nullptr, false);
    if (event.is_discarded() || !event.is_object()) {
      ++skipped_;
      continue;
    }
    try {
      apply(event);
      ++replayed_;
    } catch (const std::exception&) {
      ++skipped_;
    }
  }
}

void SessionService::apply(const nlohmann::json& e) {
  const std::string type = e.at("type").get<std::string>();
  const std::string id = e.at("session_id").get<std::string>();
  if (type == "create") {
    auto slot = std::make_unique<Slot>();
    EvalSession& s = slot->session;
    s.session_id = id;
    s.passage_id = e.at("passage_id").get<std::string>();
    s.checkpoint_id = e.at("checkpoint_id").get<std::string>();
    s.created_at = e.at("created_at").get<std::int64_t>();
    s.conversation = Conversation(s.passage_id);
    s.conversation.append(Speaker::Teacher, e.at("opening_utterance").get<std::string>());
    unsigned long long n = 0;
    if (std::sscanf(id.c_str(), "s%llu", &n) == 1 && n >= next_id_) next_id_ = n + 1;
    order_.push_back(id);
    sessions_[id] = std::move(slot);
    return;
  }
  EvalSession& s = sessions_.at(id)->session;
  if (type == "utterance") {
    s.conversation.append(Speaker::Student, e.at("text").get<std::string>());
    s.conversation.append(Speaker::Teacher, e.at("teacher_response").get<std::string>());
    if (e.contains("qa_items")) {
      for (const auto& q : e["qa_items"]) s.qa_items.push_back(cloze_from_json(q));
      s.state = SessionState::Qa;
    }
  } else if (type == "qa") {
    s.answers = answers_from_json(e.at("answers"));
    if (e.at("qa_human_ratio").is_number()) s.qa_human_ratio = e["qa_human_ratio"].get<double>();
    s.state = SessionState::Rating;
  } else if (type == "rating") {
    const auto& r = e.at("ratings");
    s.ratings = Rubric{r.at("coherence").get<int>(), r.at("readability").get<int>(),
                       r.at("overall").get<int>()};
    s.state = SessionState::Done;
  } else {
    fail(ErrorCode::InvalidArgument, "unknown event type '" + type + "'");
  }
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownPassage:
    case ErrorCode::UnknownCheckpoint:
      return 404;
    case ErrorCode::SessionClosed:
    case ErrorCode::WrongState:
    case ErrorCode::Busy:
      return 409;
    case ErrorCode::Io:
    case ErrorCode::BackendUnavailable:
      return 500;
    default:
      return 422;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

nlohmann::json parse_body(const httplib::Request& req) {
  const auto body = nlohmann::json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    fail(ErrorCode::InvalidArgument, "request body must be a JSON object");
  }
  return body;
}

std::string string_field(const nlohmann::json& body, const char* key, bool required) {
  if (!body.contains(key) || body[key].is_null()) {
    if (required) fail(ErrorCode::InvalidArgument, std::string("missing field \"") + key + "\"");
    return {};
  }
  if (!body[key].is_string()) {
    fail(ErrorCode::InvalidArgument, std::string("field \"") + key + "\" must be a string");
  }
  return body[key].get<std::string>();
}

int rubric_field(const nlohmann::json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_number_integer()) {
    fail(ErrorCode::OutOfRange, std::string("\"") + key + "\" must be an integer score");
  }
  return body[key].get<int>();
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, 200, f(req));
    } catch (const Error& e) {
      send_json(res, http_status(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "Internal"}, {"message", e.what()}});
    }
  };
}

}  // namespace

HttpServer::HttpServer(SessionService& service)
    : service_(service), http_(std::make_unique<httplib::Server>()) {
  auto& svc = service_;
  http_->Post("/sessions", guarded([&svc](const httplib::Request& req) {
    const auto body = parse_body(req);
    return svc.create_session(string_field(body, "passage_id", true),
                              string_field(body, "checkpoint_id", false));
  }));
  http_->Get("/sessions/:id", guarded([&svc](const httplib::Request& req) {
    return svc.get_session(req.path_params.at("id"));
  }));
  http_->Post("/sessions/:id/utterance", guarded([&svc](const httplib::Request& req) {
    const auto body = parse_body(req);
    return svc.post_utterance(req.path_params.at("id"), string_field(body, "text", true));
  }));
  http_->Get("/sessions/:id/qa", guarded([&svc](const httplib::Request& req) {
    return svc.get_qa_task(req.path_params.at("id"));
  }));
  http_->Post("/sessions/:id/qa", guarded([&svc](const httplib::Request& req) {
    const auto body = parse_body(req);
    if (!body.contains("answers")) fail(ErrorCode::InvalidArgument, "missing field \"answers\"");
    return svc.submit_qa(req.path_params.at("id"), answers_from_json(body["answers"]));
  }));
  http_->Post("/sessions/:id/rating", guarded([&svc](const httplib::Request& req) {
    const auto body = parse_body(req);
    const Rubric r{rubric_field(body, "coherence"), rubric_field(body, "readability"),
                   rubric_field(body, "overall")};
    return svc.submit_rating(req.path_params.at("id"), r);
  }));
  http_->Get("/results", [&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string checkpoint = req.get_param_value("checkpoint");
    const auto records = svc.export_results(checkpoint);
    if (req.get_param_value("aggregate") == "1") {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& a : aggregate_results(records)) out.push_back(to_json(a));
      send_json(res, 200, out);
      return;
    }
    std::ostringstream jsonl;
    for (const auto& r : records) jsonl << r.dump() << '\n';
    res.set_content(jsonl.str(), "application/x-ndjson");
  });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) { return http_->listen(host, port); }

int HttpServer::bind_any_port(const std::string& host) { return http_->bind_to_any_port(host); }

bool HttpServer::listen_after_bind() { return http_->listen_after_bind(); }

void HttpServer::stop() {
  if (http_) http_->stop();
}

void HttpServer::wait_until_ready() const { http_->wait_until_ready(); }

}  // namespace teachplay
