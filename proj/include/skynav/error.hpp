#pragma once

#include <stdexcept>
#include <string>

namespace skynav {

enum class ErrorCode {
  NearSingular,
  ZeroVector,
  BehindCamera,
  OutsideValidCircle,
  NoConvergence,
  DimensionMismatch,
  EvenKernel,
  EmptyHistogram,
  NonPositiveElevation,
  MixedEpochs,
  Underdetermined,
  Diverged,
  SingularGeometry,
  Unobservable,
  Parse,
  TimestampMismatch,
  InvalidArgument,
};

const char* to_string(ErrorCode code) noexcept;

/// Thrown by every fallible operation; `code()` identifies the failure mode.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace skynav
