// Copyright 2026 The FinRAG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FINRAG_ERROR_HPP_
#define FINRAG_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace finrag {

/// Every failure raised by the library carries one of these codes so callers
/// (the CLI in particular) can map them onto exit codes without string
/// matching.
enum class ErrorCode {
  kInvalidArgument,
  // dataset formatting
  kUnknownLabel,
  kTemplateCountMismatch,
  kEmptyTemplate,
  kMalformedLine,
  // tokenizer
  kEmptyCorpus,
  kVocabTooSmall,
  kUnknownTokenId,
  // tuning core
  kTokenIdOutOfRange,
  kSequenceTooShort,
  kShapeMismatch,
  kNonFiniteGradient,
  kEmptyDataset,
  // corpus store
  kEmptyDocument,
  kStorageFailure,
  kEmptyQuery,
  kNetworkFailure,
  kAuthFailure,
  kMalformedResponse,
  // retrieval
  kBudgetTooSmall,
  // inference backends
  kTimeout,
  kRateLimited,
  kBackendUnavailable,
  // evaluation
  kEmptyMatrix,
  kConfigError,
};

std::string_view ErrorCodeName(ErrorCode code);

/// True for failures that a caller may reasonably retry.
bool IsRetryable(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A JSONL parsing or validation failure tied to a 1-based input line.
class LineError : public Error {
 public:
  LineError(ErrorCode code, std::size_t line_no, const std::string& message)
      : Error(code, "line " + std::to_string(line_no) + ": " + message),
        line_no_(line_no) {}

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

}  // namespace finrag

#endif  // FINRAG_ERROR_HPP_
