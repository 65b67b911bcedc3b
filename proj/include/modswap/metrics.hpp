#pragma once

#include <set>
#include <string>

#include "modswap/runtime.hpp"

namespace modswap {

struct RunMetrics {
    int total_calls = 0;
    int done_calls = 0;
    int failed_calls = 0;
    int blocked_calls = 0;          // calls that waited on a region at least once
    Tick total_blocked_ticks = 0;
    Tick quiescence_duration = 0;   // initiation to release, summed over regions
    int sessions_on_old = 0;        // sessions with completed work on the old deployment
    int sessions_on_new = 0;
    Tick final_tick = 0;

    std::string text() const {
        std::string out;
        out += "totalCalls=" + std::to_string(total_calls) + "\n";
        out += "doneCalls=" + std::to_string(done_calls) + "\n";
        out += "failedCalls=" + std::to_string(failed_calls) + "\n";
        out += "blockedCalls=" + std::to_string(blocked_calls) + "\n";
        out += "totalBlockedTicks=" + std::to_string(total_blocked_ticks) + "\n";
        out += "quiescenceDurationTicks=" + std::to_string(quiescence_duration) + "\n";
        out += "sessionsOnOldModule=" + std::to_string(sessions_on_old) + "\n";
        out += "sessionsOnNewModule=" + std::to_string(sessions_on_new) + "\n";
        out += "finalTick=" + std::to_string(final_tick) + "\n";
        return out;
    }

    friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

inline RunMetrics compute_metrics(const Container& rt, const std::string& old_dep,
                                  const std::string& new_dep) {
    RunMetrics m;
    m.final_tick = rt.now();
    std::set<std::string> on_old, on_new;
    for (const auto& [cid, call] : rt.calls()) {
        ++m.total_calls;
        if (call.status == CallStatus::Done) {
            ++m.done_calls;
            if (call.target_deployment == old_dep) on_old.insert(call.session);
            if (call.target_deployment == new_dep) on_new.insert(call.session);
        }
        if (call.status == CallStatus::Failed) ++m.failed_calls;
        if (call.was_blocked) ++m.blocked_calls;
        m.total_blocked_ticks += call.blocked_ticks;
    }
    m.sessions_on_old = static_cast<int>(on_old.size());
    m.sessions_on_new = static_cast<int>(on_new.size());
    for (const auto& [rid, r] : rt.regions()) {
        if (r.initiated_at < 0) continue;
        Tick end = r.released_at >= 0 ? r.released_at : rt.now();
        m.quiescence_duration += end - r.initiated_at;
    }
    return m;
}

}  // namespace modswap
