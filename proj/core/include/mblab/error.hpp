#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mblab {

enum class ErrorCode {
  kInvalidArgument,
  kNegativeEntry,
  kRowSumViolation,
  kNotIrreducible,
  kGeneratorConditions,
  kStructureUnsupported,
  kNoConvergence,
  kOverflow,
  kMeanOutOfRange,
  kRewardsNotLatticed,
  kStateSpaceTooLarge,
  kInsufficientSamples,
  kNoUniqueBest,
  kSupportMismatch,
  kTimeout,
  kParse,
  kValidation,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class RowSumError : public Error {
 public:
  RowSumError(int row, double deviation);

  int row() const noexcept { return row_; }
  double deviation() const noexcept { return deviation_; }

 private:
  int row_;
  double deviation_;
};

class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& what, double residual)
      : Error(ErrorCode::kNoConvergence, what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& reason)
      : Error(ErrorCode::kValidation, field + ": " + reason),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mblab
