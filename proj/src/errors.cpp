#include "contract_forge/errors.hpp"

namespace contract_forge {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::PositivityViolation: return "PositivityViolation";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::TerminalNode: return "TerminalNode";
        case ErrorCode::InvalidPenalty: return "InvalidPenalty";
        case ErrorCode::InvalidCost: return "InvalidCost";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::Unbounded: return "Unbounded";
        case ErrorCode::NotMarkov: return "NotMarkov";
        case ErrorCode::IncompleteSolution: return "IncompleteSolution";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
    }
    return "Unknown";
}

ContractError::ContractError(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw ContractError(code, message); }

}  // namespace contract_forge
