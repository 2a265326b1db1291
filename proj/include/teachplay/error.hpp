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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace teachplay {

enum class ErrorCode {
  InvalidArgument,
  Io,
  EmptyPassage,
  EmptyConversation,
  EmptyHistory,
  NoCandidates,
  BackendUnavailable,
  MalformedLogits,
  MalformedDialogue,
  MalformedRow,
  EmptyFile,
  TooSmall,
  PassageMissing,
  IncompleteRollout,
  EmptyCorpus,
  DivergedParameters,
  NoMaskableEntities,
  NoQuestions,
  DegenerateVariance,
  UnknownPassage,
  UnknownCheckpoint,
  UnknownSession,
  SessionClosed,
  EmptyUtterance,
  WrongState,
  LengthMismatch,
  OutOfRange,
  Busy,
};

/// Stable identifier used in logs and HTTP error bodies, e.g. "EmptyPassage".
std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (CLI exit codes, HTTP statuses) can dispatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace teachplay
