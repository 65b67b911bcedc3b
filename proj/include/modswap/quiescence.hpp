#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "modswap/errors.hpp"
#include "modswap/value.hpp"

namespace modswap {

// Phase automaton of a quiescence region:
//   Declared -> Tracking -> Initiated -> Quiescent -> Released
// Transitions are strictly forward; anything else raises WrongPhase.
enum class QuiescencePhase { Declared, Tracking, Initiated, Quiescent, Released };

inline const char* to_string(QuiescencePhase p) {
    switch (p) {
    case QuiescencePhase::Declared: return "Declared";
    case QuiescencePhase::Tracking: return "Tracking";
    case QuiescencePhase::Initiated: return "Initiated";
    case QuiescencePhase::Quiescent: return "Quiescent";
    case QuiescencePhase::Released: return "Released";
    }
    return "Unknown";
}

inline bool quiescence_phase_allows(QuiescencePhase from, QuiescencePhase to) {
    return static_cast<int>(to) == static_cast<int>(from) + 1;
}

// Region membership: whole deployments and/or individual (deployment, bean)
// pairs.
struct RegionMembers {
    std::set<std::string> deployments;
    std::set<std::pair<std::string, std::string>> beans;

    bool contains(const std::string& deployment, const std::string& bean) const {
        return deployments.count(deployment) > 0 || beans.count({deployment, bean}) > 0;
    }

    bool empty() const { return deployments.empty() && beans.empty(); }

    friend bool operator==(const RegionMembers&, const RegionMembers&) = default;
};

// A session lookup that arrived while the region was quiescing; replayed when
// the region is released.
struct QueuedLookup {
    std::string session;
    Tick queued_at = 0;
};

struct QuiescenceRegion {
    std::string id;
    RegionMembers members;
    QuiescencePhase phase = QuiescencePhase::Declared;

    // Stateful instances of member beans collected since startTracking.
    std::set<InstanceId> tracked;

    // Calls blocked by this region, in blocking (FIFO) order.
    std::vector<CallId> blocked;

    std::vector<QueuedLookup> queued_lookups;

    // Admission snapshot taken at initiateQuiescence.
    std::set<CallId> active_at_initiation;
    std::set<std::string> admitted_sessions;

    Tick declared_at = -1;
    Tick tracking_at = -1;
    Tick initiated_at = -1;
    Tick quiescent_at = -1;
    Tick released_at = -1;
};

// Admission rule applied to a call that would enter an initiated region:
// admitted iff some ancestor call was Active when quiescence was initiated,
// or the call's session had an Active call inside the region at that moment.
// Blocking everything else is what guarantees the region can drain.
inline bool admissible_by_snapshot(const QuiescenceRegion& region,
                                   const std::string& session,
                                   const std::vector<CallId>& ancestor_chain) {
    for (CallId ancestor : ancestor_chain)
        if (region.active_at_initiation.count(ancestor)) return true;
    return region.admitted_sessions.count(session) > 0;
}

}  // namespace modswap
