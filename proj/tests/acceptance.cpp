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

// End-to-end acceptance checks. Prints one PASS/FAIL line per check and
// exits non-zero if any check fails. The three training runs dominate the
// runtime (a few minutes on one core).

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "teachplay/coherence.hpp"
#include "teachplay/datasets.hpp"
#include "teachplay/eval.hpp"
#include "teachplay/server.hpp"
#include "teachplay/student.hpp"
#include "teachplay/trainer.hpp"

// After Eigen: the resolver header defines _res.
#include <httplib.h>

using namespace teachplay;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %2d %-22s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0,
                double g = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e, g);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<Passage>& toy_corpus() {
  static const auto corpus =
      load_passages(oracle::data_path("toy_corpus.jsonl"), PassageFormat::PlainJsonl, 130);
  return corpus;
}

// ---------------------------------------------------------------- ROUGE

Outcome rouge_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20260101);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto a = oracle::random_words(rng, 12, 5);
    const auto b = oracle::random_words(rng, 12, 5);
    const TokenSeq ta = oracle::seq(a);
    const TokenSeq tb = oracle::seq(b);
    worst = std::max(worst, std::abs(rouge_n_f1(ta, tb, 1) - oracle::rouge_n(a, b, 1)));
    worst = std::max(worst, std::abs(rouge_n_f1(ta, tb, 2) - oracle::rouge_n(a, b, 2)));
    worst = std::max(worst, std::abs(rouge_l_f1(ta, tb) - oracle::rouge_l(a, b)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 1.0, fmt("200 pairs, max |diff| %.1e, %.3f s", worst, secs)};
}

// ---------------------------------------------------------------- gradients

Outcome gradients() {
  using fixture::random_params;
  using fixture::random_rollout;
  using fixture::random_rows;
  const auto t0 = std::chrono::steady_clock::now();
  double worst_lp = 0.0;
  double worst_mle = 0.0;
  double worst_rl = 0.0;
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    const FeatureRows f = random_rows(rng, 5);
    const PolicyParams p = random_params(rng);
    const std::size_t k = uniform_index(rng, 5);
    const std::function<double(const Features&)> lp = [&](const Features& w) {
      return policy_log_prob(f, w, p.temperature, static_cast<Eigen::Index>(k));
    };
    worst_lp = std::max(worst_lp, oracle::relative_error(log_prob_grad(p, f, k),
                                                         oracle::central_difference<Features>(lp, p.weights)));
    const std::function<double(const Features&)> mle = [&](const Features& w) {
      PolicyParams q = p;
      q.weights = w;
      return mle_loss_and_grad(q, f, k).loss;
    };
    worst_mle = std::max(worst_mle, oracle::relative_error(mle_loss_and_grad(p, f, k).grad,
                                                           oracle::central_difference<Features>(mle, p.weights)));
    const Rollout r = random_rollout(rng, 3);
    const std::function<double(const Features&)> rl = [&](const Features& w) {
      PolicyParams q = p;
      q.weights = w;
      return rl_loss_and_grad(q, r).loss;
    };
    worst_rl = std::max(worst_rl, oracle::relative_error(rl_loss_and_grad(p, r).grad,
                                                         oracle::central_difference<Features>(rl, p.weights)));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_lp < 1e-4 && worst_mle < 1e-4 && worst_rl < 1e-4 && secs < 5.0;
  return {ok, fmt("100 fixtures each, max rel err log_prob %.1e mle %.1e rl %.1e", worst_lp, worst_mle,
                  worst_rl)};
}

// ---------------------------------------------------------------- training runs

struct Run {
  double beta = 0.0;
  TrainResult result;
  double first_cov = 0, first_coh = 0, first_mixed = 0;
  double last_cov = 0, last_coh = 0, last_mixed = 0;
  double max_r_cov = 0;
  std::size_t n_clipped = 0;
};

TrainConfig run_config(double beta) {
  TrainConfig c;
  c.beta = beta;
  c.mle_batches_per_cycle = 0;
  c.rl_batch_size = 1;
  c.learning_rate = 0.01;
  c.steps = 200000;
  c.seed = 1;
  return c;
}

Run train_run(double beta) {
  Run r;
  r.beta = beta;
  r.result = train(run_config(beta), toy_corpus(), {}, LexicalScorer{}, RuleStudent{});
  const auto& rec = r.result.log.records;
  const std::size_t n = rec.size();
  for (std::size_t i = 0; i < 100; ++i) {
    r.first_cov += rec[i].mean_r_cov / 100;
    r.first_coh += rec[i].mean_r_coh / 100;
    r.first_mixed += rec[i].mean_r_mixed / 100;
    r.last_cov += rec[n - 100 + i].mean_r_cov / 100;
    r.last_coh += rec[n - 100 + i].mean_r_coh / 100;
    r.last_mixed += rec[n - 100 + i].mean_r_mixed / 100;
  }
  for (const auto& x : rec) {
    r.max_r_cov = std::max(r.max_r_cov, x.max_r_cov);
    r.n_clipped += x.n_clipped;
  }
  return r;
}

std::map<double, Run> runs;
double training_seconds = 0.0;

void train_all() {
  const auto t0 = std::chrono::steady_clock::now();
  for (double beta : {0.0, 0.7, 1.0}) runs.emplace(beta, train_run(beta));
  training_seconds = seconds_since(t0);
}

bool strictly_between(double x, double a, double b) {
  return (a < x && x < b) || (b < x && x < a);
}

Outcome tradeoff() {
  const Run& r0 = runs.at(0.0);
  const Run& r7 = runs.at(0.7);
  const Run& r1 = runs.at(1.0);
  const bool cov = r1.last_cov > r0.last_cov;
  const bool coh = r0.last_coh > r1.last_coh;
  const bool mid = strictly_between(r7.last_cov, r0.last_cov, r1.last_cov) ||
                   strictly_between(r7.last_coh, r0.last_coh, r1.last_coh);
  const bool fast = training_seconds < 300.0;
  return {cov && coh && mid && fast,
          fmt("final cov/coh  b=0: %.4f/%.4f  b=0.7: %.4f/%.4f  b=1: %.4f/%.4f", r0.last_cov, r0.last_coh,
              r7.last_cov, r7.last_coh, r1.last_cov, r1.last_coh) +
              fmt(", 3 runs %.0f s", training_seconds)};
}

Outcome learning() {
  const Run& r = runs.at(0.7);
  const double gain = r.last_mixed / r.first_mixed - 1.0;
  return {gain >= 0.20, fmt("b=0.7 mixed reward %.4f -> %.4f (%+.1f%%)", r.first_mixed, r.last_mixed, 100 * gain)};
}

Outcome clip_invariant() {
  double max_cov = 0.0;
  for (const auto& [beta, r] : runs) max_cov = std::max(max_cov, r.max_r_cov);
  const std::size_t clipped = runs.at(1.0).n_clipped;
  return {max_cov <= 0.5 && clipped > 0,
          fmt("max logged r_cov %.4f over all runs, %.0f clipped turns at b=1", max_cov,
              static_cast<double>(clipped))};
}

Outcome info_gain_trend() {
  const auto test = split(toy_corpus(), 1).test;
  const EvalReport rep = evaluate(runs.at(1.0).result.params, test, RuleStudent{});
  const auto& agg = rep.aggregate;
  bool ok = true;
  std::string detail = std::to_string(test.size()) + " test passages, IG turn1 > turn3:";
  for (const auto* turns_ptr : {&agg.ig_r1, &agg.ig_r2, &agg.ig_rl}) {
    const auto& turns = *turns_ptr;
    ok = ok && turns.size() == 3 && turns[0] > turns[2];
    detail += fmt(" %.4f>%.4f", turns.front(), turns.back());
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- coherence

Outcome coherence_dataset() {
  std::vector<Dialogue> dialogues;
  for (std::size_t n : {1, 2, 3, 4}) {
    Dialogue d;
    d.dialogue_id = "d" + std::to_string(n);
    d.passage_id = "p";
    for (std::size_t i = 0; i < n; ++i) {
      d.turns.emplace_back(Speaker::Teacher, "teacher line " + std::to_string(i));
      if (i + 1 < n) d.turns.emplace_back(Speaker::Student, "student line " + std::to_string(i));
    }
    dialogues.push_back(d);
  }
  const auto pairs = build_coherence_dataset(dialogues);
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& p : pairs) {
    auto& c = counts[p.dialogue_id];
    (p.label == CoherenceLabel::Coherent ? c.first : c.second)++;
  }
  bool ok = true;
  std::string got;
  for (std::size_t n : {1, 2, 3, 4}) {
    std::size_t incoherent = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) incoherent += j > i ? 1 : 0;
    }
    const auto c = counts["d" + std::to_string(n)];
    ok = ok && c.first == n && c.second == incoherent;
    got += " " + std::to_string(c.first) + "/" + std::to_string(c.second);
  }
  return {ok, "coherent/incoherent per dialogue:" + got};
}

Outcome constant_labels() {
  const double e = score_constant_label(NliLabel::Entailed);
  const double n = score_constant_label(NliLabel::Neutral);
  const double c = score_constant_label(NliLabel::Contradict);
  return {e == 1.0 && n == 0.2 && c == 0.0, fmt("entailed %.1f neutral %.1f contradict %.1f", e, n, c)};
}

Outcome interleave() {
  TrainConfig c;
  c.mle_batches_per_cycle = 3;
  c.rl_batches_per_cycle = 1;
  c.steps = 10;
  const auto anchors = anchors_from_dialogues(load_dialogues(oracle::data_path("toy_dialogues.jsonl")));
  const auto r = train(c, toy_corpus(), anchors, LexicalScorer{}, RuleStudent{});
  std::string trace;
  bool ok = r.trace.size() == 40;
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    trace += static_cast<char>(r.trace[i]);
    ok = ok && r.trace[i] == (i % 4 == 3 ? UpdateKind::Rl : UpdateKind::Mle);
  }
  return {ok, "10 cycles: " + trace};
}

// ---------------------------------------------------------------- determinism

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  oracle::TempDir dir("acceptance_det");
  const std::string corpus = oracle::data_path("toy_corpus.jsonl");
  const std::string dialogues = oracle::data_path("toy_dialogues.jsonl");
  std::ostringstream sink;
  for (const char* name : {"a", "b"}) {
    const std::string out = dir.file(name);
    int rc = cli::run({"train", "--corpus", corpus, "--anchors", dialogues, "--beta", "0.7", "--seed", "5",
                       "--steps", "300", "--lr", "0.05", "--workers", "2", "--out", out},
                      sink, sink);
    rc |= cli::run({"eval", "--checkpoint", out + "/checkpoint.json", "--corpus", corpus, "--seed", "5", "--out",
                    out + "/report"},
                   sink, sink);
    rc |= cli::run({"selfplay", "--checkpoint", out + "/checkpoint.json", "--corpus", corpus, "--decode",
                    "sampled", "--seed", "5", "--out", out + "/selfplay.json"},
                   sink, sink);
    if (rc != 0) return {false, "a subcommand failed: " + sink.str()};
  }
  std::size_t same = 0;
  const std::vector<std::string> files = {"checkpoint.json", "train_log.csv", "report.json", "report.csv",
                                          "selfplay.json"};
  for (const auto& f : files) same += slurp(dir.file("a/" + f)) == slurp(dir.file("b/" + f)) ? 1 : 0;
  return {same == files.size(), std::to_string(same) + "/" + std::to_string(files.size()) +
                                    " output files byte-identical across two runs of train, eval, selfplay"};
}

// ---------------------------------------------------------------- server

// Teacher speech is allowed to quote the passage; everything else in a
// response must not leak it.
json strip_teacher_speech(json j) {
  if (!j.is_object()) return j;
  j.erase("opening_utterance");
  j.erase("teacher_response");
  j.erase("transcript");
  return j;
}

Outcome server_protocol() {
  const auto passages = load_passages(oracle::data_path("eval_passages.jsonl"));
  const Passage& p = passages.front();
  std::size_t eligible = 0;
  for (const auto& s : p.sentences) eligible += maskable_entity(s) ? 1 : 0;
  if (eligible < kSessionQaItems) return {false, "first eval passage has too few maskable sentences"};
  const auto qa = cloze_questions(p, kSessionQaItems, hash_string(p.id));

  oracle::TempDir dir("acceptance_server");
  const std::string log = dir.file("events.jsonl");
  std::vector<std::pair<std::string, PolicyParams>> checkpoints = {{"uniform", PolicyParams{}},
                                                                    {"coverage", runs.at(1.0).result.params}};

  int port_pipe[2];
  if (pipe(port_pipe) != 0) return {false, "pipe failed"};
  const pid_t child = fork();
  if (child == 0) {
    close(port_pipe[0]);
    SessionService svc(passages, checkpoints, {log});
    HttpServer http(svc);
    const int port = http.bind_any_port("127.0.0.1");
    if (write(port_pipe[1], &port, sizeof port) != sizeof port) _exit(1);
    close(port_pipe[1]);
    http.listen_after_bind();
    _exit(0);
  }
  close(port_pipe[1]);
  int port = 0;
  const bool got_port = read(port_pipe[0], &port, sizeof port) == sizeof port;
  close(port_pipe[0]);
  if (!got_port || port <= 0) {
    kill(child, SIGKILL);
    waitpid(child, nullptr, 0);
    return {false, "server did not start"};
  }

  httplib::Client c("127.0.0.1", port);
  c.set_connection_timeout(5);
  c.set_read_timeout(30);
  std::vector<std::string> problems;
  std::vector<json> pre_done;
  auto call = [&](const std::string& method, const std::string& path, const json& body, int expect) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const auto res = method == "GET" ? c.Get(path) : c.Post(path, body.dump(), "application/json");
      if (!res) {
        usleep(20000);
        continue;
      }
      if (res->status != expect) {
        problems.push_back(method + " " + path + " gave " + std::to_string(res->status));
      }
      return res->body.empty() ? json() : json::parse(res->body);
    }
    problems.push_back(method + " " + path + " got no response");
    return json();
  };

  std::vector<std::string> done_ids;
  for (int session = 0; session < 3; ++session) {
    const auto created = call("POST", "/sessions", {{"passage_id", p.id}}, 200);
    pre_done.push_back(created);
    const std::string id = created.value("session_id", "");
    if (session == 2) break;  // left mid-chat when the server dies
    pre_done.push_back(call("POST", "/sessions/" + id + "/utterance", {{"text", "What is that?"}}, 200));
    pre_done.push_back(call("POST", "/sessions/" + id + "/utterance", {{"text", "Tell me more."}}, 200));
    pre_done.push_back(call("POST", "/sessions/" + id + "/utterance", {{"text", "And then?"}}, 409));
    pre_done.push_back(call("GET", "/sessions/" + id, {}, 200));
    const auto task = call("GET", "/sessions/" + id + "/qa", {}, 200);
    pre_done.push_back(task);
    if (task["items"].size() != 5) problems.push_back("QA task has " + std::to_string(task["items"].size()) + " items");
    json answers = json::array();
    for (std::size_t i = 0; i < task["items"].size(); ++i) answers.push_back({{"recoverable", i % 2 == 0}});
    pre_done.push_back(call("POST", "/sessions/" + id + "/qa", {{"answers", answers}}, 200));
    const auto done = call("POST", "/sessions/" + id + "/rating", {{"coherence", 3}, {"readability", 2}, {"overall", 2}}, 200);
    if (done.value("state", "") != "DONE") problems.push_back("rating did not finish the session");
    done_ids.push_back(id);
  }

  std::size_t leaks = 0;
  for (const auto& body : pre_done) {
    const std::string full = body.dump();
    const std::string rest = strip_teacher_speech(body).dump();
    if (full.find(p.text) != std::string::npos) ++leaks;
    for (const auto& q : qa) {
      if (rest.find(q.masked_entity) != std::string::npos) ++leaks;
    }
  }

  const auto exported = c.Get("/results");
  std::vector<json> before;
  if (exported) {
    std::istringstream lines(exported->body);
    for (std::string line; std::getline(lines, line);) before.push_back(json::parse(line));
  }

  kill(child, SIGKILL);
  waitpid(child, nullptr, 0);
  {
    // A write torn by the crash.
    std::ofstream torn(log, std::ios::app | std::ios::binary);
    torn << R"({"type": "rating", "session_id": ")";
  }
  SessionService replayed(passages, checkpoints, {log});
  const auto after = replayed.export_results();
  const bool restored = before.size() == done_ids.size() && after == before;

  std::string detail = fmt("QA items %.0f, leaks %.0f, DONE sessions restored %.0f/%.0f", static_cast<double>(qa.size()),
                           static_cast<double>(leaks), static_cast<double>(after.size()),
                           static_cast<double>(before.size()));
  for (const auto& s : problems) detail += "; " + s;
  return {problems.empty() && leaks == 0 && restored && qa.size() == 5, detail};
}

}  // namespace

int main() {
  report(1, "rouge-oracle", rouge_oracle);
  report(2, "gradients", gradients);
  bool trained = false;
  try {
    train_all();
    trained = true;
  } catch (const std::exception& e) {
    std::printf("training runs failed: %s\n", e.what());
  }
  auto needs_runs = [&](std::function<Outcome()> f) {
    return [trained, f] { return trained ? f() : Outcome{false, "training runs unavailable"}; };
  };
  report(3, "reward-tradeoff", needs_runs(tradeoff));
  report(4, "learning", needs_runs(learning));
  report(5, "coverage-clip", needs_runs(clip_invariant));
  report(6, "information-gain", needs_runs(info_gain_trend));
  report(7, "coherence-dataset", coherence_dataset);
  report(8, "constant-labels", constant_labels);
  report(9, "interleave", interleave);
  report(10, "determinism", determinism);
  report(11, "server-protocol", needs_runs(server_protocol));
  std::printf("%d of 11 checks failed\n", failures);
  return failures == 0 ? 0 : 1;
}
