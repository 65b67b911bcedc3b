#pragma once

#include <string>
#include <vector>

#include "modswap/value.hpp"

namespace modswap {

enum class TraceKind {
    ModuleDeploy,
    ModuleStart,
    ModuleStop,
    ModuleUndeploy,
    Rewire,
    Redirect,
    SessionOpen,
    SessionQueued,
    SessionClose,
    CallScheduled,
    CallStart,
    CallBlocked,
    CallResumed,
    CallDone,
    CallFailed,
    Rebind,
    Quiescence,
    Step,
    Datastore,
    Transfer,
};

inline const char* to_string(TraceKind k) {
    switch (k) {
    case TraceKind::ModuleDeploy: return "MODULE_DEPLOY";
    case TraceKind::ModuleStart: return "MODULE_START";
    case TraceKind::ModuleStop: return "MODULE_STOP";
    case TraceKind::ModuleUndeploy: return "MODULE_UNDEPLOY";
    case TraceKind::Rewire: return "REWIRE";
    case TraceKind::Redirect: return "REDIRECT";
    case TraceKind::SessionOpen: return "SESSION_OPEN";
    case TraceKind::SessionQueued: return "SESSION_QUEUED";
    case TraceKind::SessionClose: return "SESSION_CLOSE";
    case TraceKind::CallScheduled: return "CALL_SCHEDULED";
    case TraceKind::CallStart: return "CALL_START";
    case TraceKind::CallBlocked: return "CALL_BLOCKED";
    case TraceKind::CallResumed: return "CALL_RESUMED";
    case TraceKind::CallDone: return "CALL_DONE";
    case TraceKind::CallFailed: return "CALL_FAILED";
    case TraceKind::Rebind: return "REBIND";
    case TraceKind::Quiescence: return "QUIESCENCE";
    case TraceKind::Step: return "STEP";
    case TraceKind::Datastore: return "DATASTORE";
    case TraceKind::Transfer: return "TRANSFER";
    }
    return "UNKNOWN";
}

// One observable simulation event. session is empty and call is zero when
// the event concerns neither; detail carries kind-specific key=value pairs.
struct TraceEvent {
    Tick tick = 0;
    TraceKind kind = TraceKind::CallScheduled;
    std::string session;
    CallId call = 0;
    std::string detail;
};

// Renders the fixed line format:
//   tick=<n> kind=<EVENT> session=<id> call=<id> detail=<text>
// The field order never changes so traces can be diffed byte for byte.
inline std::string format_line(const TraceEvent& e) {
    std::string line = "tick=" + std::to_string(e.tick);
    line += " kind=";
    line += to_string(e.kind);
    line += " session=";
    line += e.session.empty() ? "-" : e.session;
    line += " call=";
    line += e.call == 0 ? "-" : std::to_string(e.call);
    line += " detail=";
    line += e.detail;
    return line;
}

inline std::string format_trace(const std::vector<TraceEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        out += format_line(e);
        out += '\n';
    }
    return out;
}

}  // namespace modswap
