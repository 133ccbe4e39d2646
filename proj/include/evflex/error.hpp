#pragma once

#include <stdexcept>
#include <string>

namespace evflex {

enum class ErrorKind {
    InvalidInput,
    InfeasibleDevice,
    InfeasibleFleet,
    InfeasibleAction,
    TerminalStage,
    IncompleteData,
    ParseError,
    SolverStalled,
    InstanceTooLarge,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::InfeasibleDevice: return "infeasible-device";
        case ErrorKind::InfeasibleFleet: return "infeasible-fleet";
        case ErrorKind::InfeasibleAction: return "infeasible-action";
        case ErrorKind::TerminalStage: return "terminal-stage";
        case ErrorKind::IncompleteData: return "incomplete-data";
        case ErrorKind::ParseError: return "parse-error";
        case ErrorKind::SolverStalled: return "solver-stalled";
        case ErrorKind::InstanceTooLarge: return "instance-too-large";
    }
    return "unknown";
}

/// Every library failure is reported as an Error carrying a machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace evflex
