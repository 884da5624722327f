#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace susyflow {

enum class ErrorCode {
  DimensionUnsupported,
  GridTooCoarse,
  BadStencilOrder,
  AxisOutOfRange,
  SyntaxError,
  UnknownIdentifier,
  DivisionByZero,
  DomainMismatch,
  UnknownFlow,
  DimensionMismatch,
  DegreeOverflow,
  MeshMismatch,
  NotTopDegree,
  WidthTooNarrow,
  NegativeTime,
  NonConvergence,
  NotUnimodular,
  TruncationTooSmall,
  NoConvergence,
  BranchAmbiguity,
  IncompleteSpectrum,
  NormalizationFailure,
  StepTooLarge,
  DegenerateIterate,
  ConfigError,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionUnsupported: return "DimensionUnsupported";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::BadStencilOrder: return "BadStencilOrder";
    case ErrorCode::AxisOutOfRange: return "AxisOutOfRange";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::UnknownFlow: return "UnknownFlow";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegreeOverflow: return "DegreeOverflow";
    case ErrorCode::MeshMismatch: return "MeshMismatch";
    case ErrorCode::NotTopDegree: return "NotTopDegree";
    case ErrorCode::WidthTooNarrow: return "WidthTooNarrow";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NotUnimodular: return "NotUnimodular";
    case ErrorCode::TruncationTooSmall: return "TruncationTooSmall";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BranchAmbiguity: return "BranchAmbiguity";
    case ErrorCode::IncompleteSpectrum: return "IncompleteSpectrum";
    case ErrorCode::NormalizationFailure: return "NormalizationFailure";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::DegenerateIterate: return "DegenerateIterate";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Numerical failures map to CLI exit code 3; everything else is a
/// validation problem (exit code 2).
constexpr bool is_numerical_failure(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonConvergence:
    case ErrorCode::NoConvergence:
    case ErrorCode::BranchAmbiguity:
    case ErrorCode::IncompleteSpectrum:
    case ErrorCode::NormalizationFailure:
    case ErrorCode::DivisionByZero:
    case ErrorCode::StepTooLarge:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code), detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// Syntax errors carry the byte offset into the source expression.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& detail)
      : Error(ErrorCode::SyntaxError, detail + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace susyflow
