#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ppdgd {

enum class ErrorCode {
  DimensionMismatch,
  RankDeficient,
  NotStronglyConvex,
  NonCompactOmega,
  InvalidFunction,
  PointOutsideSet,
  InnerSolveDiverged,
  NonFiniteState,
  InitialPointOutsideOmega,
  InvalidConfig,
  OracleFailed,
  EquilibriumUnverified,
  ParseError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NotStronglyConvex: return "NotStronglyConvex";
    case ErrorCode::NonCompactOmega: return "NonCompactOmega";
    case ErrorCode::InvalidFunction: return "InvalidFunction";
    case ErrorCode::PointOutsideSet: return "PointOutsideSet";
    case ErrorCode::InnerSolveDiverged: return "InnerSolveDiverged";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::InitialPointOutsideOmega: return "InitialPointOutsideOmega";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::OracleFailed: return "OracleFailed";
    case ErrorCode::EquilibriumUnverified: return "EquilibriumUnverified";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code; the
/// message is prefixed with the code name.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ppdgd
