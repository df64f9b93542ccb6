#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sviarb {

enum class ErrorCode {
  InvalidInput,
  DomainError,
  NoSignChange,
  MaxIterations,
  NoBracketFound,
  InfeasibleStart,
  PriceOutOfRange,
  DegenerateSigma,
  NonPositiveVariance,
  NoFiniteOptimum,
  BracketFailure,
  FukasawaViolated,
  NotInDomain,
  NoConvergedStart,
  InsufficientData,
  InsufficientPairs,
  NonPositiveDiscount,
  EmptySlice,
  ParseError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::NoBracketFound: return "NoBracketFound";
    case ErrorCode::InfeasibleStart: return "InfeasibleStart";
    case ErrorCode::PriceOutOfRange: return "PriceOutOfRange";
    case ErrorCode::DegenerateSigma: return "DegenerateSigma";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::NoFiniteOptimum: return "NoFiniteOptimum";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::FukasawaViolated: return "FukasawaViolated";
    case ErrorCode::NotInDomain: return "NotInDomain";
    case ErrorCode::NoConvergedStart: return "NoConvergedStart";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::NonPositiveDiscount: return "NonPositiveDiscount";
    case ErrorCode::EmptySlice: return "EmptySlice";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` tells callers which
/// contract was broken.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace sviarb
