#pragma once

#include <stdexcept>
#include <string>

namespace planeval {

// Machine-parseable failure categories. The CLI prints the code name verbatim
// and the HTTP service returns it in error bodies, so names are part of the
// external contract.
enum class ErrorCode {
  // core model validation
  DuplicateMetricId,
  NonPositiveLimit,
  EmptyProtocol,
  InvalidUnit,
  MissingMetric,
  ExtraMetric,
  NonFiniteValue,
  InvalidConfig,
  // scoring
  EmptyInput,
  NonPositiveValue,
  EmptyCohort,
  MemberNotFound,
  // knowledge base
  UnknownProtocol,
  FormatVersionMismatch,
  CorruptFile,
  IoFailure,
  // embedding / retrieval
  EmbeddingProviderFailure,
  DimensionMismatch,
  InsufficientCohort,
  LengthMismatch,
  // tuner
  OutOfBounds,
  SingularKernel,
  // synth
  LexiconExhausted,
  // orchestrator
  BackendFailure,
  TurnLimitExceeded,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const { return code_; }
  const std::string& message() const { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace planeval
