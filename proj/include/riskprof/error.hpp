#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace riskprof {

enum class ErrorCode {
    NegativeProbability,
    SumNotOne,
    BelowFloor,
    GridMismatch,
    InvalidGrid,
    InvalidPortfolio,
    DimensionMismatch,
    AverageCaseNotSupported,
    UnsupportedObjective,
    InvariantViolation,
    InfeasibleStart,
    InvalidTolerance,
    BudgetExceeded,
    Infeasible,
    Unbounded,
    NotOnCentLattice,
    InsufficientData,
    NonPositivePrice,
    ParseError,
};

std::string_view to_string(ErrorCode code);

/// Validation errors are the caller's fault (bad input); the rest signal
/// construction bugs or exhausted budgets.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace riskprof
