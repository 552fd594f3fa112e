#pragma once

#include <stdexcept>
#include <string>

namespace loadopf {

enum class ErrorCode {
    DuplicateBusId,
    DanglingReference,
    NoSlack,
    Disconnected,
    InvalidParameter,
    VoltageCollapse,
    ZeroVoltage,
    NonConvergence,
    Infeasible,
    EmptySeries,
    RankDeficient,
    TooShort,
    ZeroCurrentNormalization,
    ParseError,
    ValidationError,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code plus a
/// message naming the offending element.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

class NonConvergenceError : public Error {
  public:
    NonConvergenceError(int iterations, double residual, const std::string& message)
        : Error(ErrorCode::NonConvergence, message), iterations_(iterations), residual_(residual) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

  private:
    int iterations_;
    double residual_;
};

}  // namespace loadopf
