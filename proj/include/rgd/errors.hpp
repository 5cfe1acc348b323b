#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rgd {

enum class ErrorCode {
  NotSPD,
  DegenerateVolatility,
  InfeasibleTheta,
  InfeasibleKernel,
  RegimeError,
  GridError,
  StabilityError,
  InvalidArgument,
  ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSPD: return "NotSPD";
    case ErrorCode::DegenerateVolatility: return "DegenerateVolatility";
    case ErrorCode::InfeasibleTheta: return "InfeasibleTheta";
    case ErrorCode::InfeasibleKernel: return "InfeasibleKernel";
    case ErrorCode::RegimeError: return "RegimeError";
    case ErrorCode::GridError: return "GridError";
    case ErrorCode::StabilityError: return "StabilityError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace rgd
