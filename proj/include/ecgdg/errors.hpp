#pragma once

#include <stdexcept>
#include <string>

namespace ecgdg {

enum class ErrorCode {
  MalformedHeader,
  UnsupportedLeadCount,
  SizeMismatch,
  IoFailure,
  EmptyDataset,
  InvalidCutoff,
  InvalidRate,
  NonFiniteInput,
  ShapeMismatch,
  EmptyTarget,
  NotScalar,
  DetachedLoss,
  NoGradients,
  InvalidConfig,
  OutOfRange,
  EmptySplit,
  DivergedLoss,
  CheckpointMismatch,
  EmptySource,
  LabelMapMismatch,
  UnknownClass,
  UnknownKey,
  UsageError,
};

const char* error_code_name(ErrorCode code);

// Domain error carrying a stable machine-readable code. The CLI renders these
// as "code_name: message" lines on stderr with exit status 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace ecgdg
