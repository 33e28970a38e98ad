#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace contract_forge {

enum class ErrorCode {
    PositivityViolation,
    RankDeficient,
    TerminalNode,
    InvalidPenalty,
    InvalidCost,
    NonConvergence,
    Unbounded,
    NotMarkov,
    IncompleteSolution,
    ParseError,
    ValidationError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status.
class ContractError : public std::runtime_error {
public:
    ContractError(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace contract_forge
