#include "mblab/error.hpp"

#include <cstdio>

namespace mblab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNegativeEntry: return "NegativeEntry";
    case ErrorCode::kRowSumViolation: return "RowSumViolation";
    case ErrorCode::kNotIrreducible: return "NotIrreducible";
    case ErrorCode::kGeneratorConditions: return "GeneratorConditions";
    case ErrorCode::kStructureUnsupported: return "StructureUnsupported";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kOverflow: return "Overflow";
    case ErrorCode::kMeanOutOfRange: return "MeanOutOfRange";
    case ErrorCode::kRewardsNotLatticed: return "RewardsNotLatticed";
    case ErrorCode::kStateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kNoUniqueBest: return "NoUniqueBest";
    case ErrorCode::kSupportMismatch: return "SupportMismatch";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kValidation: return "ValidationError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string row_sum_message(int row, double deviation) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "row %d sums to 1%+.3g", row, deviation);
  return buf;
}

}  // namespace

RowSumError::RowSumError(int row, double deviation)
    : Error(ErrorCode::kRowSumViolation, row_sum_message(row, deviation)),
      row_(row),
      deviation_(deviation) {}

}  // namespace mblab
