#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rt2v {

enum class ErrorKind {
  kInvalidArgument,
  kMalformedJson,
  kMissingField,
  kInvariantViolation,
  kDimensionMismatch,
  kNotFound,
  kProvider,
  kSchema,
  kDecomposition,
  kPlanRejected,
  kToolTimeout,
  kDivergence,
  kMissingTwin,
  kDanglingReference,
  kDuplicateId,
  kCountMismatch,
  kGeneration,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (CLI exit
// codes, HTTP status mapping, tests) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rt2v
