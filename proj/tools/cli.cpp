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

#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "teachplay/coherence.hpp"
#include "teachplay/datasets.hpp"
#include "teachplay/eval.hpp"
#include "teachplay/rewards.hpp"
#include "teachplay/selfplay.hpp"
#include "teachplay/server.hpp"
#include "teachplay/student.hpp"
#include "teachplay/trainer.hpp"

namespace teachplay::cli {
namespace {

namespace fs = std::filesystem;

bool is_data_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::EmptyFile:
    case ErrorCode::MalformedRow:
    case ErrorCode::MalformedDialogue:
    case ErrorCode::EmptyPassage:
    case ErrorCode::EmptyCorpus:
    case ErrorCode::TooSmall:
    case ErrorCode::PassageMissing:
    case ErrorCode::UnknownPassage:
    case ErrorCode::UnknownCheckpoint:
    case ErrorCode::NoMaskableEntities:
    case ErrorCode::LengthMismatch:
    case ErrorCode::DegenerateVariance:
      return true;
    default:
      return false;
  }
}

struct Common {
  std::string corpus;
  std::string anchors;
  std::string checkpoint;
  std::string out;
  std::string coherence = "lexical";
  std::string mode = "per_turn_teacher";
  std::string student = "rules";
  double beta = 0.7;
  double cov_clip = 0.5;
  std::size_t turns = 3;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::size_t truncate = 130;
};

std::vector<Passage> read_corpus(const Common& c) {
  const auto format =
      fs::path(c.corpus).extension() == ".tsv" ? PassageFormat::Tsv : PassageFormat::PlainJsonl;
  return load_passages(c.corpus, format, c.truncate > 0 ? std::optional(c.truncate) : std::nullopt);
}

std::unique_ptr<Student> make_student(const std::string& spec) {
  if (spec == "rules") return std::make_unique<RuleStudent>();
  if (spec.starts_with("url=") && spec.size() > 4) return std::make_unique<HttpStudent>(spec.substr(4));
  fail(ErrorCode::InvalidArgument, "unknown student '" + spec + "' (expected rules|url=...)");
}

CoherenceBackend backend_of(const std::string& spec) {
  if (spec == "softmax") return CoherenceBackend::SoftmaxClassifier;
  if (spec == "constants") return CoherenceBackend::ConstantLabels;
  return CoherenceBackend::LexicalBaseline;
}

PolicyParams read_policy(const std::string& path) {
  return path.empty() ? PolicyParams{} : load_checkpoint(path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::Io, "cannot write '" + path + "'");
  f << text;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create directory '" + dir + "': " + ec.message());
}

void add_corpus(CLI::App* app, Common& c, bool required) {
  auto* o = app->add_option("--corpus", c.corpus, "Passages (.jsonl, or .tsv id<TAB>text)");
  if (required) o->required();
  app->add_option("--truncate", c.truncate, "Keep the first N tokens of each passage (0 keeps all)")
      ->capture_default_str();
}

void add_reward_flags(CLI::App* app, Common& c) {
  app->add_option("--beta", c.beta, "Coverage weight of the mixed reward")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app->add_option("--cov-clip", c.cov_clip, "Maximum coverage reward")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--mode", c.mode, "Reward attribution: per_turn_teacher|per_turn_both|end_of_conversation")
      ->capture_default_str();
  app->add_option("--coherence", c.coherence, "softmax|constants|lexical|url=http://host:port")
      ->capture_default_str();
}

void add_play_flags(CLI::App* app, Common& c) {
  app->add_option("--turns", c.turns, "Teacher turns per conversation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app->add_option("--student", c.student, "rules|url=http://host:port")->capture_default_str();
}

int cmd_train(const Common& c, TrainConfig cfg, std::size_t checkpoint_every, std::ostream& out,
              std::ostream& err) {
  cfg.beta = c.beta;
  cfg.cov_clip = c.cov_clip;
  cfg.attribution = attribution_mode_from_string(c.mode);
  cfg.coherence_backend = backend_of(c.coherence);
  cfg.n_turns = c.turns;
  cfg.seed = c.seed;
  cfg.workers = std::max<std::size_t>(1, c.workers);
  cfg.init = read_policy(c.checkpoint);
  const auto corpus = read_corpus(c);
  std::vector<AnchorExample> anchors;
  if (!c.anchors.empty()) {
    const auto all = anchors_from_dialogues(load_dialogues(c.anchors));
    std::copy_if(all.begin(), all.end(), std::back_inserter(anchors), [&](const AnchorExample& a) {
      return std::any_of(corpus.begin(), corpus.end(),
                         [&](const Passage& p) { return p.id == a.passage_id; });
    });
    if (anchors.size() < all.size()) {
      err << "note: " << all.size() - anchors.size() << " anchors refer to passages outside --corpus; skipped\n";
    }
  } else if (cfg.mle_batches_per_cycle > 0 && !cfg.explicit_gamma) {
    err << "note: no --anchors given; training with RL updates only\n";
    cfg.mle_batches_per_cycle = 0;
  }
  cfg.validate();
  const auto scorer = make_scorer(c.coherence);
  const auto student = make_student(c.student);
  ensure_dir(c.out);

  const nlohmann::json meta = {{"seed", cfg.seed},
                               {"config", cfg.to_json()},
                               {"corpus", fs::path(c.corpus).filename().string()},
                               {"coherence", scorer->name()},
                               {"student", student->name()}};
  TrainHooks hooks;
  if (checkpoint_every > 0) {
    cfg.checkpoint_every = checkpoint_every;
    hooks.on_checkpoint = [&](std::size_t step, const PolicyParams& p) {
      nlohmann::json m = meta;
      m["step"] = step;
      save_checkpoint((fs::path(c.out) / ("checkpoint_" + std::to_string(step) + ".json")).string(), p, m);
    };
  }
  const TrainResult result = train(cfg, corpus, anchors, *scorer, *student, hooks);
  const std::string ckpt = (fs::path(c.out) / "checkpoint.json").string();
  const std::string log = (fs::path(c.out) / "train_log.csv").string();
  save_checkpoint(ckpt, result.params, meta);
  result.log.write_csv(log);
  out << "checkpoint: " << ckpt << "\nlog: " << log << "\n";
  return kOk;
}

int cmd_selfplay(const Common& c, const std::string& passage_id, const std::string& decode,
                 std::ostream& out) {
  const auto corpus = read_corpus(c);
  const auto it = passage_id.empty()
                      ? corpus.begin()
                      : std::find_if(corpus.begin(), corpus.end(),
                                     [&](const Passage& p) { return p.id == passage_id; });
  if (it == corpus.end()) fail(ErrorCode::UnknownPassage, "unknown passage '" + passage_id + "'");
  DecodeMode mode;
  if (decode == "greedy") {
    mode = DecodeMode::Greedy;
  } else if (decode == "sampled") {
    mode = DecodeMode::Sampled;
  } else {
    fail(ErrorCode::InvalidArgument, "--decode must be greedy or sampled");
  }
  RewardConfig rc{c.beta, c.cov_clip, attribution_mode_from_string(c.mode), backend_of(c.coherence)};
  rc.validate();
  const auto scorer = make_scorer(c.coherence);
  const auto student = make_student(c.student);
  SelfPlayOptions opts;
  opts.n_turns = c.turns;
  const Conversation conv = run_conversation(*it, read_policy(c.checkpoint), *student, mode, c.seed, opts);
  nlohmann::json j = conversation_to_json(conv, attribute_rewards(*it, conv, rc, *scorer));
  j["meta"] = {{"seed", c.seed},
               {"decode", decode},
               {"beta", c.beta},
               {"cov_clip", c.cov_clip},
               {"attribution", c.mode},
               {"coherence", scorer->name()},
               {"student", student->name()}};
  const std::string text = j.dump(2) + "\n";
  if (c.out.empty()) {
    out << text;
  } else {
    write_text(c.out, text);
  }
  return kOk;
}

int cmd_eval(const Common& c, std::size_t qa_questions, std::ostream& out) {
  const PolicyParams params = load_checkpoint(c.checkpoint);
  const auto corpus = read_corpus(c);
  const auto scorer = make_scorer(c.coherence);
  const auto student = make_student(c.student);
  EvalConfig cfg;
  cfg.n_turns = c.turns;
  cfg.seed = c.seed;
  cfg.qa_questions = qa_questions;
  cfg.coherence = scorer.get();
  EvalReport report = evaluate(params, corpus, *student, cfg);
  report.config["checkpoint"] = fs::path(c.checkpoint).filename().string();
  report.config["student"] = student->name();
  const std::string json = report.to_json().dump(2) + "\n";
  if (c.out.empty()) {
    out << json;
  } else {
    write_text(c.out + ".json", json);
    std::ostringstream csv;
    report.write_csv(csv);
    write_text(c.out + ".csv", csv.str());
    out << "report: " << c.out << ".json, " << c.out << ".csv\n";
  }
  return kOk;
}

int cmd_build_coherence(const std::string& dialogues, const std::string& out_path, std::ostream& out) {
  const auto pairs = build_coherence_dataset(load_dialogues(dialogues));
  std::ostringstream jsonl;
  for (const auto& p : pairs) jsonl << to_json(p).dump() << '\n';
  if (out_path.empty()) {
    out << jsonl.str();
  } else {
    write_text(out_path, jsonl.str());
    std::size_t coherent = 0;
    for (const auto& p : pairs) coherent += p.label == CoherenceLabel::Coherent ? 1 : 0;
    out << "coherent: " << coherent << "\nincoherent: " << pairs.size() - coherent << "\n";
  }
  return kOk;
}

int cmd_split(const Common& c, const std::vector<double>& ratios, std::ostream& out) {
  if (ratios.size() != 3) fail(ErrorCode::InvalidArgument, "--ratios takes three values");
  const auto corpus = read_corpus(c);
  const auto s = split(corpus, c.seed, {ratios[0], ratios[1], ratios[2]});
  ensure_dir(c.out);
  for (const auto& [name, part] : {std::pair{"train", &s.train}, {"valid", &s.valid}, {"test", &s.test}}) {
    write_passages_jsonl((fs::path(c.out) / (std::string(name) + ".jsonl")).string(), *part);
    out << name << ": " << part->size() << "\n";
  }
  return kOk;
}

int cmd_serve(const Common& c, const std::vector<std::string>& checkpoints, const std::string& host,
              int port, const std::string& log_path, std::ostream& out) {
  std::vector<std::pair<std::string, PolicyParams>> loaded;
  for (const auto& path : checkpoints) {
    loaded.emplace_back(fs::path(path).stem().string(), load_checkpoint(path));
  }
  if (loaded.empty()) fail(ErrorCode::UnknownCheckpoint, "serve needs at least one --checkpoint");
  SessionService service(read_corpus(c), std::move(loaded), {log_path});
  HttpServer server(service);
  out << "serving on " << host << ":" << port << " (" << service.n_sessions()
      << " sessions replayed from " << log_path << ")" << std::endl;
  if (!server.listen(host, port)) fail(ErrorCode::Io, "cannot listen on port " + std::to_string(port));
  return kOk;
}

std::vector<double> read_ratings(const std::string& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  std::vector<double> values;
  std::string line;
  std::optional<std::size_t> col;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (!col) {
      // First row: a header if the selected field is not a number.
      std::size_t idx = fields.size() - 1;
      if (!column.empty()) {
        const auto it = std::find(fields.begin(), fields.end(), column);
        if (it == fields.end()) fail(ErrorCode::MalformedRow, path + ": no column '" + column + "'");
        col = static_cast<std::size_t>(it - fields.begin());
        continue;
      }
      col = idx;
      char* end = nullptr;
      std::strtod(fields[idx].c_str(), &end);
      if (end == fields[idx].c_str()) continue;
    }
    if (*col >= fields.size()) fail(ErrorCode::MalformedRow, path + ":" + std::to_string(line_no) + ": missing field");
    char* end = nullptr;
    const double v = std::strtod(fields[*col].c_str(), &end);
    if (end == fields[*col].c_str()) {
      fail(ErrorCode::MalformedRow, path + ":" + std::to_string(line_no) + ": not a number");
    }
    values.push_back(v);
  }
  return values;
}

// CLI11 reads config files for the root app only, so a subcommand's --config
// is expanded into flags here. Flags already on the command line win; unknown
// keys become unknown flags and fail the parse.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  if (args.empty()) return args;
  const CLI::App* sub = app.get_subcommand_no_throw(args[0]);
  if (sub == nullptr) return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;

  std::vector<std::string> expanded;
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    const std::string flag = "--" + name;
    const bool given = std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
      return a == flag || a.starts_with(flag + "=");
    });
    if (given) continue;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt != nullptr && opt->get_expected_max() == 0) {
      const std::string v = item.inputs.empty() ? "true" : item.inputs.front();
      if (v == "true" || v == "1" || v == "yes" || v == "on") expanded.push_back(flag);
      continue;
    }
    expanded.push_back(flag);
    expanded.insert(expanded.end(), item.inputs.begin(), item.inputs.end());
  }
  args.insert(args.begin() + 1, expanded.begin(), expanded.end());
  return args;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-play training and evaluation of a passage-grounded teacher bot", "teachplay"};
  app.require_subcommand(1);

  Common c;
  TrainConfig tc;
  std::size_t checkpoint_every = 0;
  std::optional<double> gamma;
  std::string config_path;

  auto* train_cmd = app.add_subcommand("train", "Train a teacher policy");
  train_cmd->add_option("--config", config_path, "key=value config file (flags override it)");
  add_corpus(train_cmd, c, true);
  add_reward_flags(train_cmd, c);
  add_play_flags(train_cmd, c);
  train_cmd->add_option("--anchors", c.anchors, "Reference dialogues (.jsonl) for the MLE anchor");
  train_cmd->add_option("--checkpoint", c.checkpoint, "Initial policy");
  train_cmd->add_option("--steps", tc.steps, "Training cycles")->capture_default_str();
  train_cmd->add_option("--workers", c.workers, "Parallel rollouts")->capture_default_str();
  train_cmd->add_option("--out", c.out, "Output directory")->required();
  train_cmd->add_option("--lr", tc.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--mle-batches", tc.mle_batches_per_cycle, "MLE batches per cycle")
      ->capture_default_str();
  train_cmd->add_option("--rl-batches", tc.rl_batches_per_cycle, "RL batches per cycle")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--mle-batch-size", tc.mle_batch_size)->capture_default_str();
  train_cmd->add_option("--rl-batch-size", tc.rl_batch_size)->capture_default_str();
  train_cmd->add_option("--gamma", gamma, "One blended update per cycle with this RL weight")
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_flag("--weight-by-length", tc.weight_by_length);
  train_cmd->add_flag("--full-greedy-trajectory", tc.full_greedy_trajectory);
  train_cmd->add_option("--checkpoint-every", checkpoint_every, "Save every N cycles (0: off)");

  std::string passage_id;
  std::string decode = "sampled";
  auto* selfplay_cmd = app.add_subcommand("selfplay", "Play one conversation and print it as JSON");
  selfplay_cmd->add_option("--config", config_path, "key=value config file (flags override it)");
  add_corpus(selfplay_cmd, c, true);
  add_reward_flags(selfplay_cmd, c);
  add_play_flags(selfplay_cmd, c);
  selfplay_cmd->add_option("--checkpoint", c.checkpoint, "Policy (default: uniform)");
  selfplay_cmd->add_option("--passage", passage_id, "Passage id (default: first)");
  selfplay_cmd->add_option("--decode", decode, "greedy|sampled")->capture_default_str();
  selfplay_cmd->add_option("--out", c.out, "Write here instead of stdout");

  std::size_t qa_questions = 5;
  auto* eval_cmd = app.add_subcommand("eval", "Objective metrics of a checkpoint");
  eval_cmd->add_option("--config", config_path, "key=value config file (flags override it)");
  add_corpus(eval_cmd, c, true);
  add_play_flags(eval_cmd, c);
  eval_cmd->add_option("--checkpoint", c.checkpoint, "Policy")->required();
  eval_cmd->add_option("--coherence", c.coherence, "softmax|constants|lexical|url=http://host:port")
      ->capture_default_str();
  eval_cmd->add_option("--qa-questions", qa_questions)->capture_default_str();
  eval_cmd->add_option("--out", c.out, "Prefix for <out>.json and <out>.csv (default: JSON to stdout)");

  std::string dialogues;
  auto* coh_cmd = app.add_subcommand("build-coherence", "Coherent/incoherent pairs from dialogues");
  coh_cmd->add_option("--anchors,--dialogues", dialogues, "Dialogues (.jsonl)")->required();
  coh_cmd->add_option("--out", c.out, "Output .jsonl (default: stdout)");

  std::vector<double> ratios = {0.8, 0.1, 0.1};
  auto* split_cmd = app.add_subcommand("split", "Seeded train/valid/test split of a corpus");
  add_corpus(split_cmd, c, true);
  split_cmd->add_option("--seed", c.seed)->capture_default_str();
  split_cmd->add_option("--ratios", ratios, "train valid test")->expected(3);
  split_cmd->add_option("--out", c.out, "Output directory")->required();

  std::vector<std::string> checkpoints;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string log_path = "sessions.jsonl";
  auto* serve_cmd = app.add_subcommand("serve", "Human-evaluation session service");
  add_corpus(serve_cmd, c, false);
  serve_cmd->get_option("--corpus")->envname("TEACHPLAY_CORPUS")->required();
  serve_cmd->add_option("--checkpoint", checkpoints, "Policies, used round-robin")
      ->envname("TEACHPLAY_CHECKPOINT");
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--port", port)->envname("TEACHPLAY_PORT")->capture_default_str();
  serve_cmd->add_option("--log-path", log_path, "Append-only event log")
      ->envname("TEACHPLAY_LOG_PATH")
      ->capture_default_str();

  std::vector<std::string> rating_files;
  std::string column;
  auto* agree_cmd = app.add_subcommand("agreement", "Pearson r between two raters");
  agree_cmd->add_option("files", rating_files, "Two rating CSVs")->required()->expected(2);
  agree_cmd->add_option("--column", column, "Column name (default: last column)");

  try {
    const auto expanded = expand_config(app, args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::FileError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*train_cmd) {
      if (gamma) tc.explicit_gamma = gamma;
      return cmd_train(c, tc, checkpoint_every, out, err);
    }
    if (*selfplay_cmd) return cmd_selfplay(c, passage_id, decode, out);
    if (*eval_cmd) return cmd_eval(c, qa_questions, out);
    if (*coh_cmd) return cmd_build_coherence(dialogues, c.out, out);
    if (*split_cmd) return cmd_split(c, ratios, out);
    if (*serve_cmd) return cmd_serve(c, checkpoints, host, port, log_path, out);
    if (*agree_cmd) {
      const auto a = read_ratings(rating_files[0], column);
      const auto b = read_ratings(rating_files[1], column);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f\n", pearson_agreement(a, b));
      out << buf;
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (e.code() == ErrorCode::InvalidArgument) return kUsage;
    return is_data_error(e.code()) ? kData : kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace teachplay::cli
