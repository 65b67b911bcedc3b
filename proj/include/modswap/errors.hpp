#pragma once

#include <stdexcept>
#include <string>

namespace modswap {

// Coded failures raised by container, quiescence, step and strategy
// operations. Tests match on the code, messages carry context.
enum class ErrorCode {
    // model / deployment lifecycle
    UnknownModuleType,
    UnknownDeployment,
    WiringTargetMissing,
    InterfaceMismatch,
    EnvTypeMismatch,
    IllegalLifecycleTransition,
    UnsatisfiedReference,
    ActiveSessionsRemain,
    DeploymentNotStarted,
    // sessions and calls
    UnknownSession,
    SessionClosed,
    UnknownReference,
    // quiescence protocol
    UnknownRegion,
    UnknownMember,
    WrongPhase,
    SimulationExhausted,
    UnmappedBlockedCall,
    // step executors
    NotQuiescent,
    TrackingNotStarted,
    TransformFailed,
    TypeMismatchOnDeclaredMatch,
    StatefulRebindWithoutTransfer,
    NoCounterpartBean,
    AmbiguousCounterpart,
    // strategy engine
    InvalidStrategy,
    MissingInput,
    KindMismatch,
    UnknownExecutor,
    CompatibilityRejected,
    // input handling
    ParseError,
    ValidationError,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::UnknownModuleType: return "UnknownModuleType";
    case ErrorCode::UnknownDeployment: return "UnknownDeployment";
    case ErrorCode::WiringTargetMissing: return "WiringTargetMissing";
    case ErrorCode::InterfaceMismatch: return "InterfaceMismatch";
    case ErrorCode::EnvTypeMismatch: return "EnvTypeMismatch";
    case ErrorCode::IllegalLifecycleTransition: return "IllegalLifecycleTransition";
    case ErrorCode::UnsatisfiedReference: return "UnsatisfiedReference";
    case ErrorCode::ActiveSessionsRemain: return "ActiveSessionsRemain";
    case ErrorCode::DeploymentNotStarted: return "DeploymentNotStarted";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::SessionClosed: return "SessionClosed";
    case ErrorCode::UnknownReference: return "UnknownReference";
    case ErrorCode::UnknownRegion: return "UnknownRegion";
    case ErrorCode::UnknownMember: return "UnknownMember";
    case ErrorCode::WrongPhase: return "WrongPhase";
    case ErrorCode::SimulationExhausted: return "SimulationExhausted";
    case ErrorCode::UnmappedBlockedCall: return "UnmappedBlockedCall";
    case ErrorCode::NotQuiescent: return "NotQuiescent";
    case ErrorCode::TrackingNotStarted: return "TrackingNotStarted";
    case ErrorCode::TransformFailed: return "TransformFailed";
    case ErrorCode::TypeMismatchOnDeclaredMatch: return "TypeMismatchOnDeclaredMatch";
    case ErrorCode::StatefulRebindWithoutTransfer: return "StatefulRebindWithoutTransfer";
    case ErrorCode::NoCounterpartBean: return "NoCounterpartBean";
    case ErrorCode::AmbiguousCounterpart: return "AmbiguousCounterpart";
    case ErrorCode::InvalidStrategy: return "InvalidStrategy";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::UnknownExecutor: return "UnknownExecutor";
    case ErrorCode::CompatibilityRejected: return "CompatibilityRejected";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// Terminal outcome of a failed Call. Unlike Error these are simulation
// results, not exceptions: the run continues and metrics count them.
enum class FailReason {
    None,
    InvalidReference,
    DatastoreLocked,
    UnmappedBlockedCall,
};

inline const char* to_string(FailReason r) {
    switch (r) {
    case FailReason::None: return "None";
    case FailReason::InvalidReference: return "InvalidReference";
    case FailReason::DatastoreLocked: return "DatastoreLocked";
    case FailReason::UnmappedBlockedCall: return "UnmappedBlockedCall";
    }
    return "Unknown";
}

}  // namespace modswap
