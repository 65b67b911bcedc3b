#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "modswap/errors.hpp"
#include "modswap/model.hpp"
#include "modswap/quiescence.hpp"
#include "modswap/trace.hpp"
#include "modswap/value.hpp"

namespace modswap {

// ==== datastore =============================================================

// Per-deployment key/value store. Aliasing two deployments to one store models
// a database that both module versions use concurrently.
struct Datastore {
    std::string owner;
    std::map<std::string, std::string> entries;
    bool locked = false;
};

// ==== deployments ===========================================================

struct Deployment {
    std::string id;
    std::shared_ptr<const ModuleType> type;
    DeploymentState state = DeploymentState::Deployed;
    // bean -> entry -> value
    std::map<std::string, std::map<std::string, Value>> env;
    // (bean, reference) -> target
    std::map<std::pair<std::string, std::string>, WiringTarget> wirings;
    std::shared_ptr<Datastore> store;
};

struct Wire {
    std::string bean;
    std::string reference;
    WiringTarget target;

    friend bool operator==(const Wire&, const Wire&) = default;
};

// ==== calls =================================================================

struct StateEffect {
    enum class Op { Assign, Add };
    std::string field;
    Op op = Op::Assign;
    Value value = std::int64_t{0};

    friend bool operator==(const StateEffect&, const StateEffect&) = default;
};

struct DbOp {
    enum class Op { Put, Get };
    Op op = Op::Put;
    std::string key;
    std::string value;  // puts only

    friend bool operator==(const DbOp&, const DbOp&) = default;
};

struct NestedCall;

// What a call does: how long it services, which state fields it touches on
// completion, which datastore keys it reads/writes, and which nested calls it
// issues at offsets from its own start.
struct CallSpec {
    std::string op = "op";
    Tick duration = 1;
    std::vector<StateEffect> effects;
    std::vector<DbOp> db_ops;
    std::vector<NestedCall> children;

    friend bool operator==(const CallSpec&, const CallSpec&) = default;
};

struct NestedCall {
    Tick at = 0;          // offset from the parent's start tick
    std::string via;      // reference name on the parent's bean
    CallSpec spec;

    friend bool operator==(const NestedCall&, const NestedCall&) = default;
};

enum class CallStatus { Pending, Blocked, Active, Done, Failed };

inline const char* to_string(CallStatus s) {
    switch (s) {
    case CallStatus::Pending: return "Pending";
    case CallStatus::Blocked: return "Blocked";
    case CallStatus::Active: return "Active";
    case CallStatus::Done: return "Done";
    default: return "Failed";
    }
}

struct Call {
    CallId id = 0;
    std::string session;
    std::string handle;   // session reference handle (top-level calls)
    CallId parent = 0;    // nonzero for nested calls
    std::string via;      // parent-bean reference (nested calls)
    CallSpec spec;

    CallStatus status = CallStatus::Pending;
    FailReason fail_reason = FailReason::None;
    Tick scheduled_at = 0;
    Tick started_at = -1;
    Tick blocked_at = -1;
    Tick finished_at = -1;
    Tick blocked_ticks = 0;
    bool was_blocked = false;

    InstanceId target_instance = 0;
    std::string target_deployment;
    std::string target_bean;
    std::string blocking_region;

    int outstanding_children = 0;
    bool self_done = false;  // own duration elapsed; may still wait for children

    bool terminal() const { return status == CallStatus::Done || status == CallStatus::Failed; }
};

// ==== instances =============================================================

struct BeanInstance {
    InstanceId id = 0;
    std::string deployment;
    std::string bean;
    bool stateful = false;
    std::map<std::string, Value> state;
    std::string session;   // owning session (stateful); empty for pool members
    CallId busy = 0;       // active call, zero when idle
    bool moribund = false; // destroy as soon as the active call finishes
    bool alive = true;
    std::vector<CallId> waiters;  // calls queued on the non-reentrancy rule
};

inline std::string instance_label(const BeanInstance& i) {
    return i.deployment + "." + i.bean + "#" + std::to_string(i.id);
}

// ==== sessions ==============================================================

// Where a session reference points: an exclusive stateful instance, or a
// stateless pool addressed by (deployment, bean).
struct RefBinding {
    InterfaceId interface;
    bool is_instance = false;
    InstanceId instance = 0;
    std::string pool_deployment;
    std::string pool_bean;
};

struct BindTarget {
    bool is_instance = false;
    InstanceId instance = 0;
    std::string deployment;
    std::string bean;
};

enum class SessionStatus { PendingOpen, Open, Closed };

inline const char* to_string(SessionStatus s) {
    switch (s) {
    case SessionStatus::PendingOpen: return "PendingOpen";
    case SessionStatus::Open: return "Open";
    default: return "Closed";
    }
}

struct OpenRequest {
    std::string deployment;
    std::string bean;
    std::string interface_name;
    std::string handle = "main";
};

struct Session {
    std::string id;
    std::string client;
    SessionStatus status = SessionStatus::Open;
    Tick opened_at = -1;
    Tick requested_at = -1;
    std::map<std::string, RefBinding> refs;
    // Stateful instances reached through nested calls, keyed by
    // (deployment, bean); conversational helpers without a reference handle.
    std::map<std::pair<std::string, std::string>, InstanceId> aux_instances;
    OpenRequest request;          // original target of a queued open
    std::string queued_region;
    bool close_when_idle = false;
    int live_calls = 0;
};

struct RebindEntry {
    std::string session;
    std::string handle;
    BindTarget target;
};

// ==== workload actions ======================================================

struct OpenAction {
    std::string session;
    std::string client;
    std::string deployment;
    std::string bean;
    std::string interface_or_reference;
    bool via_reference = false;  // true: resolve through the named reference
    std::string handle = "main";

    friend bool operator==(const OpenAction&, const OpenAction&) = default;
};

struct InvokeAction {
    std::string session;
    std::string handle = "main";
    CallSpec spec;

    friend bool operator==(const InvokeAction&, const InvokeAction&) = default;
};

struct CloseAction {
    std::string session;

    friend bool operator==(const CloseAction&, const CloseAction&) = default;
};

using WorkloadStep = std::variant<OpenAction, InvokeAction, CloseAction>;

// ==== container =============================================================

// Deterministic, single-threaded container runtime. All behaviour is a
// function of the configured model, the scheduled workload and the seed;
// repeated runs produce byte-identical traces.
class Container {
public:
    explicit Container(std::uint64_t seed = 1) : rng_(seed) {}

    ModelRegistry& registry() { return registry_; }
    const ModelRegistry& registry() const { return registry_; }

    Tick now() const { return now_; }

    // Disabling admission blocks every call entering an initiated region,
    // including those needed to finish in-flight work. Exists to demonstrate
    // why the admission rule matters; keep it on for real runs.
    void set_admission_enabled(bool on) { admission_enabled_ = on; }

    // ---- deployment lifecycle ----

    std::string deploy(const std::string& module_type,
                       const std::map<std::string, std::map<std::string, Value>>& env = {},
                       const std::vector<Wire>& wirings = {},
                       const std::string& requested_id = "") {
        auto type = registry_.get(module_type);
        std::string id = requested_id.empty() ? fresh_deployment_id() : requested_id;
        if (deployments_.count(id))
            throw Error(ErrorCode::ValidationError, "deployment id '" + id + "' already in use");

        Deployment dep;
        dep.id = id;
        dep.type = type;
        dep.state = DeploymentState::Deployed;
        dep.store = std::make_shared<Datastore>();
        dep.store->owner = id;

        for (const auto& bean : type->beans) {
            auto& bean_env = dep.env[bean.name];
            for (const auto& entry : bean.env_entries) bean_env[entry.name] = entry.default_value;
        }
        for (const auto& [bean_name, entries] : env) {
            const BeanType* bean = type->find_bean(bean_name);
            if (!bean)
                throw Error(ErrorCode::ValidationError,
                            "env for unknown bean '" + bean_name + "' in deployment '" + id + "'");
            for (const auto& [entry_name, value] : entries) {
                const EnvEntry* decl = bean->find_env(entry_name);
                if (!decl)
                    throw Error(ErrorCode::ValidationError,
                                "unknown env entry '" + entry_name + "' on bean '" + bean_name + "'");
                if (type_of(value) != decl->type)
                    throw Error(ErrorCode::EnvTypeMismatch,
                                "env entry '" + bean_name + "." + entry_name + "' expects " +
                                    to_string(decl->type) + ", got " + to_string(type_of(value)));
                dep.env[bean_name][entry_name] = value;
            }
        }

        deployments_.emplace(id, std::move(dep));
        for (const auto& w : wirings) apply_wire(id, w, /*require_started_target=*/false);

        emit(TraceKind::ModuleDeploy, "", 0, "deployment=" + id + " module=" + module_type);
        return id;
    }

    void start_deployment(const std::string& dep_id) {
        Deployment& dep = deployment_mut(dep_id);
        if (!lifecycle_allows(dep.state, DeploymentState::Started))
            throw Error(ErrorCode::IllegalLifecycleTransition,
                        "cannot start '" + dep_id + "' from state " + to_string(dep.state));
        for (const auto& bean : dep.type->beans)
            for (const auto& ref : bean.references)
                if (!dep.wirings.count({bean.name, ref.name}))
                    throw Error(ErrorCode::UnsatisfiedReference,
                                "reference '" + bean.name + "." + ref.name + "' of deployment '" +
                                    dep_id + "' is not wired");
        dep.state = DeploymentState::Started;
        emit(TraceKind::ModuleStart, "", 0, "deployment=" + dep_id);
    }

    void stop_deployment(const std::string& dep_id, bool also_undeploy = false, bool force = false) {
        Deployment& dep = deployment_mut(dep_id);
        if (!lifecycle_allows(dep.state, DeploymentState::Stopped))
            throw Error(ErrorCode::IllegalLifecycleTransition,
                        "cannot stop '" + dep_id + "' from state " + to_string(dep.state));
        if (!force) {
            int n = obligations(dep_id);
            if (n > 0)
                throw Error(ErrorCode::ActiveSessionsRemain,
                            "deployment '" + dep_id + "' still serves " + std::to_string(n) +
                                " session(s)");
        }
        // Destroying the deployment's instances invalidates in-flight and
        // future calls; with force this is the deliberate Flash behaviour.
        for (auto& [iid, inst] : instances_) {
            if (!inst.alive || inst.deployment != dep_id) continue;
            if (inst.busy != 0) fail_call(inst.busy, FailReason::InvalidReference);
            for (CallId w : inst.waiters) fail_call(w, FailReason::InvalidReference);
            inst.waiters.clear();
            inst.alive = false;
            inst.busy = 0;
        }
        dep.state = DeploymentState::Stopped;
        emit(TraceKind::ModuleStop, "", 0,
             "deployment=" + dep_id + std::string(force ? " forced=true" : ""));
        if (also_undeploy) undeploy(dep_id);
    }

    void undeploy(const std::string& dep_id) {
        Deployment& dep = deployment_mut(dep_id);
        if (!lifecycle_allows(dep.state, DeploymentState::Undeployed))
            throw Error(ErrorCode::IllegalLifecycleTransition,
                        "cannot undeploy '" + dep_id + "' from state " + to_string(dep.state));
        dep.state = DeploymentState::Undeployed;
        emit(TraceKind::ModuleUndeploy, "", 0, "deployment=" + dep_id);
    }

    // Initial wiring of a not-yet-started deployment; unlike rewire it does
    // not require the target to be running and emits no trace.
    void wire(const std::string& dep_id, const std::string& bean, const std::string& reference,
              const WiringTarget& target) {
        apply_wire(dep_id, {bean, reference, target}, /*require_started_target=*/false);
    }

    void rewire(const std::string& dep_id, const std::string& bean, const std::string& reference,
                const WiringTarget& target) {
        Deployment& dep = deployment_mut(dep_id);
        Wire w{bean, reference, target};
        apply_wire(dep_id, w, /*require_started_target=*/true);
        emit(TraceKind::Rewire, "", 0,
             "deployment=" + dep_id + " reference=" + bean + "." + reference + " target=" +
                 to_string(dep.wirings.at({bean, reference})));
    }

    // Future lookups naming `from` resolve against `to`. Existing sessions and
    // bindings are unaffected.
    void install_redirect(const std::string& from, const std::string& to) {
        deployment(from);
        deployment(to);
        redirects_[from] = to;
        emit(TraceKind::Redirect, "", 0, "from=" + from + " to=" + to);
    }

    std::string resolve_redirect(std::string dep_id) const {
        for (int hops = 0; hops < 16; ++hops) {
            auto it = redirects_.find(dep_id);
            if (it == redirects_.end()) return dep_id;
            dep_id = it->second;
        }
        throw Error(ErrorCode::ValidationError, "redirect cycle at '" + dep_id + "'");
    }

    // ---- sessions ----

    struct OpenOutcome {
        bool opened = false;  // false: lookup queued behind a quiescing region
        std::string session;
    };

    OpenOutcome open_session(const std::string& session_id, const std::string& client,
                             const std::string& dep_id, const std::string& bean,
                             const std::string& interface_name, const std::string& handle = "main") {
        if (sessions_.count(session_id))
            throw Error(ErrorCode::ValidationError, "session id '" + session_id + "' already used");
        return open_internal(session_id, client, {dep_id, bean, interface_name, handle});
    }

    OpenOutcome open_session_via(const std::string& session_id, const std::string& client,
                                 const std::string& dep_id, const std::string& bean,
                                 const std::string& reference, const std::string& handle = "main") {
        if (sessions_.count(session_id))
            throw Error(ErrorCode::ValidationError, "session id '" + session_id + "' already used");
        const Deployment& dep = deployment(dep_id);
        if (dep.state != DeploymentState::Started)
            throw Error(ErrorCode::DeploymentNotStarted,
                        "client deployment '" + dep_id + "' is " + to_string(dep.state));
        const BeanType* b = dep.type->find_bean(bean);
        if (!b) throw Error(ErrorCode::ValidationError, "no bean '" + bean + "' in '" + dep_id + "'");
        if (!b->find_reference(reference))
            throw Error(ErrorCode::UnknownReference,
                        "bean '" + bean + "' declares no reference '" + reference + "'");
        auto it = dep.wirings.find({bean, reference});
        if (it == dep.wirings.end())
            throw Error(ErrorCode::UnsatisfiedReference,
                        "reference '" + bean + "." + reference + "' is not wired");
        const WiringTarget& t = it->second;
        return open_internal(session_id, client, {t.deployment, t.bean, t.interface.name, handle});
    }

    void close_session(const std::string& session_id) {
        Session& s = session_mut(session_id);
        if (s.status == SessionStatus::Closed)
            throw Error(ErrorCode::SessionClosed, "session '" + session_id + "' already closed");
        if (s.live_calls > 0 || s.status == SessionStatus::PendingOpen) {
            s.close_when_idle = true;
            return;
        }
        do_close(s);
    }

    void rebind_reference(const std::string& session_id, const std::string& handle,
                          const BindTarget& target) {
        Session& s = session_mut(session_id);
        if (s.status != SessionStatus::Open)
            throw Error(ErrorCode::SessionClosed,
                        "session '" + session_id + "' is " + to_string(s.status));
        auto it = s.refs.find(handle);
        if (it == s.refs.end())
            throw Error(ErrorCode::UnknownReference,
                        "session '" + session_id + "' has no reference '" + handle + "'");
        RefBinding& binding = it->second;

        std::string old_label = binding_trace_label(binding);
        if (target.is_instance) {
            BeanInstance& inst = instance_mut(target.instance);
            if (!inst.alive)
                throw Error(ErrorCode::ValidationError,
                            "cannot bind destroyed instance #" + std::to_string(target.instance));
            const Deployment& dep = deployment(inst.deployment);
            if (dep.state != DeploymentState::Started)
                throw Error(ErrorCode::DeploymentNotStarted,
                            "deployment '" + inst.deployment + "' is " + to_string(dep.state));
            const BeanType* bean = dep.type->find_bean(inst.bean);
            if (!bean || !bean->provides_interface(binding.interface))
                throw Error(ErrorCode::InterfaceMismatch,
                            "instance " + instance_label(inst) + " does not provide " +
                                to_string(binding.interface));
            if (!inst.session.empty() && inst.session != session_id)
                throw Error(ErrorCode::ValidationError,
                            "instance " + instance_label(inst) + " is owned by session '" +
                                inst.session + "'");
            if (binding.is_instance) {
                if (auto* old_inst = find_instance(binding.instance);
                    old_inst && old_inst->busy != 0)
                    throw Error(ErrorCode::ValidationError,
                                "cannot rebind while a call is active on " +
                                    instance_label(*old_inst));
                if (auto* old_inst = find_instance(binding.instance);
                    old_inst && old_inst->session == session_id)
                    old_inst->session.clear();
            }
            inst.session = session_id;
            binding.is_instance = true;
            binding.instance = inst.id;
            binding.pool_deployment.clear();
            binding.pool_bean.clear();
        } else {
            const Deployment& dep = deployment(target.deployment);
            if (dep.state != DeploymentState::Started)
                throw Error(ErrorCode::DeploymentNotStarted,
                            "deployment '" + target.deployment + "' is " + to_string(dep.state));
            const BeanType* bean = dep.type->find_bean(target.bean);
            if (!bean)
                throw Error(ErrorCode::ValidationError,
                            "no bean '" + target.bean + "' in '" + target.deployment + "'");
            if (!bean->provides_interface(binding.interface))
                throw Error(ErrorCode::InterfaceMismatch,
                            "bean '" + target.bean + "' does not provide " +
                                to_string(binding.interface));
            if (binding.is_instance) {
                if (auto* old_inst = find_instance(binding.instance);
                    old_inst && old_inst->busy != 0)
                    throw Error(ErrorCode::ValidationError,
                                "cannot rebind while a call is active on " +
                                    instance_label(*old_inst));
                if (auto* old_inst = find_instance(binding.instance);
                    old_inst && old_inst->session == session_id)
                    old_inst->session.clear();
            }
            binding.is_instance = false;
            binding.instance = 0;
            binding.pool_deployment = target.deployment;
            binding.pool_bean = target.bean;
        }
        emit(TraceKind::Rebind, session_id, 0,
             "reference=" + handle + " old=" + old_label + " new=" + binding_trace_label(binding));
    }

    // ---- scheduling and time ----

    void schedule_action(Tick tick, WorkloadStep action) {
        if (tick < now_)
            throw Error(ErrorCode::ValidationError,
                        "cannot schedule at tick " + std::to_string(tick) + " before now " +
                            std::to_string(now_));
        actions_.push_back(std::move(action));
        push_event({tick, PhaseWorkload, next_seq_++, SimEvent::Kind::Workload, 0, actions_.size() - 1});
    }

    CallId invoke(const std::string& session_id, const std::string& handle, CallSpec spec) {
        return invoke_at(now_, session_id, handle, std::move(spec));
    }

    bool queue_empty() const { return queue_.empty(); }

    Tick next_event_tick() const { return queue_.empty() ? -1 : queue_.begin()->tick; }

    // Processes every event scheduled at or before `tick`.
    std::vector<TraceEvent> advance_to(Tick tick) {
        std::size_t mark = trace_.size();
        while (!queue_.empty() && queue_.begin()->tick <= tick) step_event();
        now_ = std::max(now_, tick);
        return {trace_.begin() + static_cast<std::ptrdiff_t>(mark), trace_.end()};
    }

    // Processes everything ordered before the control phase of `tick`; used by
    // the strategy engine so steps run after completions but before workload
    // actions of the trigger tick.
    void advance_before_control(Tick tick) {
        while (!queue_.empty()) {
            const SimEvent& e = *queue_.begin();
            if (e.tick > tick || (e.tick == tick && e.phase >= PhaseControl)) break;
            step_event();
        }
        now_ = std::max(now_, tick);
    }

    bool advance_one() {
        if (queue_.empty()) return false;
        step_event();
        return true;
    }

    void drain() {
        while (!queue_.empty()) step_event();
    }

    // ---- quiescence protocol ----

    std::string declare_region(RegionMembers members, const std::string& requested_id = "") {
        if (members.empty())
            throw Error(ErrorCode::ValidationError, "a region needs at least one member");
        for (const auto& d : members.deployments)
            if (!deployments_.count(d))
                throw Error(ErrorCode::UnknownMember, "region member deployment '" + d + "' not found");
        for (const auto& [d, b] : members.beans) {
            auto it = deployments_.find(d);
            if (it == deployments_.end())
                throw Error(ErrorCode::UnknownMember, "region member deployment '" + d + "' not found");
            if (!it->second.type->find_bean(b))
                throw Error(ErrorCode::UnknownMember,
                            "region member bean '" + d + "." + b + "' not found");
        }
        std::string id = requested_id.empty() ? "r" + std::to_string(++region_counter_) : requested_id;
        if (regions_.count(id))
            throw Error(ErrorCode::ValidationError, "region id '" + id + "' already in use");
        QuiescenceRegion region;
        region.id = id;
        region.members = std::move(members);
        region.phase = QuiescencePhase::Declared;
        region.declared_at = now_;
        regions_.emplace(id, std::move(region));
        emit(TraceKind::Quiescence, "", 0, "region=" + id + " phase=Declared");
        return id;
    }

    void start_tracking(const std::string& region_id) {
        QuiescenceRegion& r = region_mut(region_id);
        require_phase(r, QuiescencePhase::Tracking);
        r.phase = QuiescencePhase::Tracking;
        r.tracking_at = now_;
        for (const auto& [iid, inst] : instances_)
            if (inst.alive && inst.stateful && r.members.contains(inst.deployment, inst.bean))
                r.tracked.insert(iid);
        emit(TraceKind::Quiescence, "", 0, "region=" + region_id + " phase=Tracking");
    }

    void initiate_quiescence(const std::string& region_id) {
        QuiescenceRegion& r = region_mut(region_id);
        require_phase(r, QuiescencePhase::Initiated);
        r.phase = QuiescencePhase::Initiated;
        r.initiated_at = now_;
        for (const auto& [cid, call] : calls_) {
            if (call.status != CallStatus::Active) continue;
            r.active_at_initiation.insert(cid);
            if (r.members.contains(call.target_deployment, call.target_bean))
                r.admitted_sessions.insert(call.session);
        }
        emit(TraceKind::Quiescence, "", 0, "region=" + region_id + " phase=Initiated");
    }

    // Advances the simulation until no member instance has an Active or
    // admissible pending call. Returns the first quiescent tick. Throws
    // SimulationExhausted if events run out or `max_wait` ticks pass first.
    Tick await_quiescence(const std::string& region_id, Tick max_wait = 1000000) {
        QuiescenceRegion& r = region_mut(region_id);
        if (r.phase == QuiescencePhase::Quiescent) return r.quiescent_at;
        if (r.phase != QuiescencePhase::Initiated)
            throw Error(ErrorCode::WrongPhase,
                        "region '" + region_id + "' is " + to_string(r.phase) +
                            ", expected Initiated");
        const Tick deadline = now_ + max_wait;
        while (true) {
            if (region_quiet(r)) {
                r.phase = QuiescencePhase::Quiescent;
                r.quiescent_at = now_;
                emit(TraceKind::Quiescence, "", 0, "region=" + region_id + " phase=Quiescent");
                return now_;
            }
            if (queue_.empty())
                throw Error(ErrorCode::SimulationExhausted,
                            "region '" + region_id + "' cannot quiesce: no further events");
            if (queue_.begin()->tick > deadline)
                throw Error(ErrorCode::SimulationExhausted,
                            "region '" + region_id + "' not quiescent within " +
                                std::to_string(max_wait) + " ticks");
            step_event();
        }
    }

    void release_region(const std::string& region_id, const std::vector<RebindEntry>& rebinds = {}) {
        QuiescenceRegion& r = region_mut(region_id);
        require_phase(r, QuiescencePhase::Released);
        for (const auto& e : rebinds) rebind_reference(e.session, e.handle, e.target);

        // Refuse the release outright if any blocked call could not resume;
        // no call may be dropped silently.
        for (CallId cid : r.blocked) {
            const Call& call = calls_.at(cid);
            if (call.status != CallStatus::Blocked) continue;
            if (!resumable(call))
                throw Error(ErrorCode::UnmappedBlockedCall,
                            "blocked call " + std::to_string(cid) +
                                " has no valid target after reconfiguration");
        }

        r.phase = QuiescencePhase::Released;
        r.released_at = now_;
        emit(TraceKind::Quiescence, "", 0, "region=" + region_id + " phase=Released");

        // Queued lookups complete first, in arrival order, resolving against
        // the current wirings and redirects.
        auto lookups = std::move(r.queued_lookups);
        r.queued_lookups.clear();
        for (const auto& q : lookups) {
            Session& s = session_mut(q.session);
            if (s.status != SessionStatus::PendingOpen) continue;
            reopen_queued(s);
        }

        // Blocked calls then resume in blocking order.
        auto blocked = std::move(r.blocked);
        r.blocked.clear();
        for (CallId cid : blocked) {
            Call& call = calls_.at(cid);
            if (call.status != CallStatus::Blocked) continue;
            call.blocked_ticks += now_ - call.blocked_at;
            call.status = CallStatus::Pending;
            call.blocking_region.clear();
            emit(TraceKind::CallResumed, call.session, cid, "region=" + region_id);
            try_start(cid);
        }
    }

    // ---- datastore ----

    Datastore& datastore(const std::string& dep_id) { return *deployment_mut(dep_id).store; }
    const Datastore& datastore(const std::string& dep_id) const { return *deployment(dep_id).store; }

    void lock_datastore(const std::string& dep_id) {
        datastore(dep_id).locked = true;
        emit(TraceKind::Datastore, "", 0, "deployment=" + dep_id + " op=lock");
    }

    void unlock_datastore(const std::string& dep_id) {
        datastore(dep_id).locked = false;
        emit(TraceKind::Datastore, "", 0, "deployment=" + dep_id + " op=unlock");
    }

    // Makes `dep_id` use the same underlying store as `target`.
    void alias_datastore(const std::string& dep_id, const std::string& target) {
        deployment_mut(dep_id).store = deployment_mut(target).store;
        emit(TraceKind::Datastore, "", 0, "deployment=" + dep_id + " op=alias target=" + target);
    }

    void install_datastore(const std::string& dep_id, std::map<std::string, std::string> entries) {
        Datastore& s = datastore(dep_id);
        s.entries = std::move(entries);
        emit(TraceKind::Datastore, "", 0,
             "deployment=" + dep_id + " op=install size=" + std::to_string(s.entries.size()));
    }

    // ---- introspection ----

    const std::map<std::string, Deployment>& deployments() const { return deployments_; }

    const Deployment& deployment(const std::string& id) const {
        auto it = deployments_.find(id);
        if (it == deployments_.end())
            throw Error(ErrorCode::UnknownDeployment, "no deployment '" + id + "'");
        return it->second;
    }

    const std::map<std::string, Session>& sessions() const { return sessions_; }

    const Session& session(const std::string& id) const {
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
        return it->second;
    }

    const std::map<InstanceId, BeanInstance>& instances() const { return instances_; }

    const BeanInstance& instance(InstanceId id) const {
        auto it = instances_.find(id);
        if (it == instances_.end())
            throw Error(ErrorCode::ValidationError, "no instance #" + std::to_string(id));
        return it->second;
    }

    const std::map<CallId, Call>& calls() const { return calls_; }

    const std::map<std::string, QuiescenceRegion>& regions() const { return regions_; }

    const QuiescenceRegion& region(const std::string& id) const {
        auto it = regions_.find(id);
        if (it == regions_.end()) throw Error(ErrorCode::UnknownRegion, "no region '" + id + "'");
        return it->second;
    }

    const std::vector<TraceEvent>& trace() const { return trace_; }
    std::string trace_text() const { return format_trace(trace_); }

    void emit_event(TraceKind kind, const std::string& session, CallId call, std::string detail) {
        emit(kind, session, call, std::move(detail));
    }

    // Number of open sessions still attached to the deployment through a
    // binding or a non-terminal call. Stop refuses while this is nonzero
    // unless forced.
    int obligations(const std::string& dep_id) const {
        int n = 0;
        for (const auto& [sid, s] : sessions_) {
            if (s.status == SessionStatus::Closed) continue;
            if (s.status == SessionStatus::PendingOpen) {
                if (resolve_redirect(s.request.deployment) == dep_id) ++n;
                continue;
            }
            if (session_attached(s, dep_id)) ++n;
        }
        return n;
    }

    struct CallCensus {
        int total = 0, done = 0, failed = 0, active = 0, blocked = 0, pending = 0;
    };

    CallCensus census() const {
        CallCensus c;
        for (const auto& [cid, call] : calls_) {
            ++c.total;
            switch (call.status) {
            case CallStatus::Done: ++c.done; break;
            case CallStatus::Failed: ++c.failed; break;
            case CallStatus::Active: ++c.active; break;
            case CallStatus::Blocked: ++c.blocked; break;
            case CallStatus::Pending: ++c.pending; break;
            }
        }
        return c;
    }

    // Drains the queue and resolves anything left hanging: still-blocked calls
    // fail as UnmappedBlockedCall, never-released lookups close their
    // sessions. Afterwards every call is Done or Failed.
    void finalize_run() {
        while (true) {
            drain();
            std::vector<CallId> leftover;
            for (const auto& [cid, call] : calls_)
                if (call.status == CallStatus::Blocked) leftover.push_back(cid);
            if (leftover.empty()) break;
            for (CallId cid : leftover) fail_call(cid, FailReason::UnmappedBlockedCall);
        }
        for (auto& [sid, s] : sessions_) {
            if (s.status != SessionStatus::PendingOpen) continue;
            s.status = SessionStatus::Closed;
            emit(TraceKind::SessionClose, sid, 0, "reason=lookup-never-released");
        }
        drain();
    }

    // ---- step support ----

    // Creates an unbound stateful instance with default field values; used
    // when conversational state is transferred into a new deployment.
    InstanceId materialize_instance(const std::string& dep_id, const std::string& bean_name) {
        const Deployment& dep = deployment(dep_id);
        const BeanType* bean = dep.type->find_bean(bean_name);
        if (!bean)
            throw Error(ErrorCode::ValidationError,
                        "no bean '" + bean_name + "' in deployment '" + dep_id + "'");
        if (bean->kind != BeanKind::Stateful)
            throw Error(ErrorCode::ValidationError,
                        "bean '" + bean_name + "' is stateless; nothing to materialize");
        return create_instance(dep_id, *bean).id;
    }

    void write_instance_field(InstanceId id, const std::string& field, const Value& value) {
        BeanInstance& inst = instance_mut(id);
        auto it = inst.state.find(field);
        if (it == inst.state.end())
            throw Error(ErrorCode::ValidationError,
                        "instance " + instance_label(inst) + " has no field '" + field + "'");
        if (type_of(it->second) != type_of(value))
            throw Error(ErrorCode::TypeMismatchOnDeclaredMatch,
                        "field '" + field + "' of " + instance_label(inst) + " holds " +
                            to_string(type_of(it->second)) + ", got " + to_string(type_of(value)));
        it->second = value;
    }

    // Sessions referring to the instance through a handle, as (session, handle).
    std::vector<std::pair<std::string, std::string>> bindings_to_instance(InstanceId id) const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [sid, s] : sessions_) {
            if (s.status == SessionStatus::Closed) continue;
            for (const auto& [handle, b] : s.refs)
                if (b.is_instance && b.instance == id) out.emplace_back(sid, handle);
        }
        return out;
    }

    void remap_aux_instance(InstanceId old_id, InstanceId new_id) {
        const BeanInstance& ni = instance(new_id);
        for (auto& [sid, s] : sessions_)
            for (auto& [key, iid] : s.aux_instances)
                if (iid == old_id) {
                    s.aux_instances.erase(key);
                    s.aux_instances[{ni.deployment, ni.bean}] = new_id;
                    instance_mut(new_id).session = sid;
                    return;
                }
    }

    // Canonical dump of deployments, sessions, instances, stores, regions and
    // call results. Two runs ending in the same state render identically.
    std::string snapshot_text() const {
        std::string out;
        out += "tick=" + std::to_string(now_) + "\n";
        for (const auto& [id, d] : deployments_) {
            out += "deployment " + id + " module=" + d.type->name + " state=" + to_string(d.state) +
                   "\n";
            for (const auto& [bean, entries] : d.env)
                for (const auto& [name, value] : entries)
                    out += "  env " + bean + "." + name + "=" + to_string(value) + "\n";
            for (const auto& [key, target] : d.wirings)
                out += "  wire " + key.first + "." + key.second + "->" + to_string(target) + "\n";
            out += "  store owner=" + d.store->owner +
                   " locked=" + (d.store->locked ? std::string("true") : std::string("false"));
            for (const auto& [k, v] : d.store->entries) out += " " + k + "=" + v;
            out += "\n";
        }
        for (const auto& [from, to] : redirects_) out += "redirect " + from + "->" + to + "\n";
        for (const auto& [id, s] : sessions_) {
            out += "session " + id + " client=" + s.client + " status=" + to_string(s.status) +
                   " opened=" + std::to_string(s.opened_at) + "\n";
            for (const auto& [handle, b] : s.refs)
                out += "  ref " + handle + "->" + binding_label(b) + " iface=" +
                       to_string(b.interface) + "\n";
        }
        for (const auto& [iid, inst] : instances_) {
            if (!inst.alive) continue;
            out += "instance " + instance_label(inst) +
                   (inst.stateful ? " stateful" : " stateless") +
                   (inst.session.empty() ? "" : " session=" + inst.session);
            for (const auto& [f, v] : inst.state) out += " " + f + "=" + to_string(v);
            out += "\n";
        }
        for (const auto& [rid, r] : regions_) {
            out += "region " + rid + " phase=" + to_string(r.phase) + " members=";
            for (const auto& d : r.members.deployments) out += d + ",";
            for (const auto& [d, b] : r.members.beans) out += d + "." + b + ",";
            out += "\n";
        }
        for (const auto& [cid, call] : calls_) {
            out += "call " + std::to_string(cid) + " session=" + call.session + " status=" +
                   to_string(call.status);
            if (call.status == CallStatus::Failed)
                out += " reason=" + std::string(to_string(call.fail_reason));
            if (!call.target_deployment.empty())
                out += " target=" + call.target_deployment + "." + call.target_bean;
            out += "\n";
        }
        return out;
    }

private:
    // ---- event queue ----

    static constexpr int PhaseComplete = 0;
    static constexpr int PhaseControl = 1;  // reserved for the strategy driver
    static constexpr int PhaseWorkload = 2;
    static constexpr int PhaseStart = 3;

    struct SimEvent {
        Tick tick = 0;
        int phase = 0;
        std::uint64_t seq = 0;
        enum class Kind { CallComplete, Workload, CallStart, ChildIssue } kind = Kind::Workload;
        CallId call = 0;        // subject call, or parent for ChildIssue
        std::size_t index = 0;  // workload action index / child index

        friend bool operator<(const SimEvent& a, const SimEvent& b) {
            return std::tie(a.tick, a.phase, a.seq) < std::tie(b.tick, b.phase, b.seq);
        }
    };

    void push_event(SimEvent e) { queue_.insert(std::move(e)); }

    void step_event() {
        SimEvent e = *queue_.begin();
        queue_.erase(queue_.begin());
        now_ = std::max(now_, e.tick);
        switch (e.kind) {
        case SimEvent::Kind::CallComplete: on_complete(e.call); break;
        case SimEvent::Kind::Workload: run_action(actions_[e.index]); break;
        case SimEvent::Kind::CallStart: try_start(e.call); break;
        case SimEvent::Kind::ChildIssue: issue_child(e.call, e.index); break;
        }
    }

    // ---- workload ----

    void run_action(const WorkloadStep& step) {
        if (const auto* open = std::get_if<OpenAction>(&step)) {
            if (open->via_reference)
                open_session_via(open->session, open->client, open->deployment, open->bean,
                                 open->interface_or_reference, open->handle);
            else
                open_session(open->session, open->client, open->deployment, open->bean,
                             open->interface_or_reference, open->handle);
            return;
        }
        if (const auto* inv = std::get_if<InvokeAction>(&step)) {
            invoke_at(now_, inv->session, inv->handle, inv->spec);
            return;
        }
        close_session(std::get<CloseAction>(step).session);
    }

    CallId invoke_at(Tick tick, const std::string& session_id, const std::string& handle,
                     CallSpec spec) {
        Session& s = session_mut(session_id);
        if (s.status == SessionStatus::Closed)
            throw Error(ErrorCode::SessionClosed, "session '" + session_id + "' is closed");

        Call call;
        call.id = ++call_counter_;
        call.session = session_id;
        call.handle = handle;
        call.spec = std::move(spec);
        call.scheduled_at = tick;
        CallId id = call.id;
        calls_.emplace(id, std::move(call));
        s.live_calls += 1;
        emit(TraceKind::CallScheduled, session_id, id, "op=" + calls_.at(id).spec.op);

        if (s.status == SessionStatus::PendingOpen) {
            // The session's lookup is queued behind a quiescing region; its
            // calls wait with it and replay after the release.
            Call& c = calls_.at(id);
            c.status = CallStatus::Blocked;
            c.blocked_at = tick;
            c.was_blocked = true;
            c.blocking_region = s.queued_region;
            regions_.at(s.queued_region).blocked.push_back(id);
            emit(TraceKind::CallBlocked, session_id, id,
                 "region=" + s.queued_region + " cause=lookup-queued");
            return id;
        }
        push_event({tick, PhaseStart, next_seq_++, SimEvent::Kind::CallStart, id, 0});
        return id;
    }

    // ---- session internals ----

    Container::OpenOutcome open_internal(const std::string& session_id, const std::string& client,
                                         OpenRequest request) {
        std::string dep_id = resolve_redirect(request.deployment);
        const Deployment& dep = deployment(dep_id);
        if (dep.state != DeploymentState::Started)
            throw Error(ErrorCode::DeploymentNotStarted,
                        "deployment '" + dep_id + "' is " + to_string(dep.state));
        const BeanType* bean = dep.type->find_bean(request.bean);
        if (!bean)
            throw Error(ErrorCode::ValidationError,
                        "no bean '" + request.bean + "' in deployment '" + dep_id + "'");
        const InterfaceId* iface = bean->find_provided(request.interface_name);
        if (!iface)
            throw Error(ErrorCode::InterfaceMismatch,
                        "bean '" + request.bean + "' does not provide '" + request.interface_name +
                            "'");

        if (const QuiescenceRegion* r = blocking_region_for(dep_id, request.bean)) {
            Session s;
            s.id = session_id;
            s.client = client;
            s.status = SessionStatus::PendingOpen;
            s.requested_at = now_;
            s.request = request;
            s.request.deployment = dep_id;
            s.queued_region = r->id;
            sessions_[session_id] = std::move(s);
            regions_.at(r->id).queued_lookups.push_back({session_id, now_});
            emit(TraceKind::SessionQueued, session_id, 0,
                 "client=" + client + " target=" + dep_id + "." + request.bean + " region=" + r->id);
            return {false, session_id};
        }

        Session s;
        s.id = session_id;
        s.client = client;
        s.status = SessionStatus::Open;
        s.opened_at = now_;
        s.requested_at = now_;
        s.request = request;

        RefBinding binding;
        binding.interface = *iface;
        if (bean->kind == BeanKind::Stateful) {
            BeanInstance& inst = create_instance(dep_id, *bean);
            inst.session = session_id;
            binding.is_instance = true;
            binding.instance = inst.id;
        } else {
            binding.is_instance = false;
            binding.pool_deployment = dep_id;
            binding.pool_bean = request.bean;
        }
        s.refs[request.handle] = binding;
        sessions_[session_id] = std::move(s);
        emit(TraceKind::SessionOpen, session_id, 0,
             "client=" + client + " target=" + dep_id + "." + request.bean + ":" +
                 request.interface_name + " binding=" + binding_label(binding));
        return {true, session_id};
    }

    // Completes a lookup that was queued behind a released region.
    void reopen_queued(Session& s) {
        OpenRequest request = s.request;
        std::string client = s.client;
        bool close_requested = s.close_when_idle;
        std::string id = s.id;
        Tick first_requested = s.requested_at;
        sessions_.erase(id);  // s is dead past this point
        OpenOutcome outcome = open_internal(id, client, request);
        Session& ns = sessions_.at(id);
        ns.requested_at = std::min(ns.requested_at, first_requested);
        if (close_requested) {
            if (outcome.opened && ns.live_calls == 0)
                do_close(ns);
            else
                ns.close_when_idle = true;
        }
    }

    void do_close(Session& s) {
        for (auto& [handle, b] : s.refs)
            if (b.is_instance) release_owned_instance(b.instance, s.id);
        for (auto& [key, iid] : s.aux_instances) release_owned_instance(iid, s.id);
        s.status = SessionStatus::Closed;
        emit(TraceKind::SessionClose, s.id, 0, "client=" + s.client);
    }

    void release_owned_instance(InstanceId id, const std::string& session_id) {
        BeanInstance* inst = find_instance(id);
        if (!inst || !inst->alive || inst->session != session_id) return;
        if (inst->busy != 0) {
            inst->moribund = true;
            return;
        }
        inst->alive = false;
    }

    // ---- call machinery ----

    void try_start(CallId id) {
        Call& call = calls_.at(id);
        if (call.status != CallStatus::Pending) return;

        struct Target {
            std::string deployment, bean;
            const BeanType* type = nullptr;
            InstanceId instance = 0;  // zero: dispatch to pool / create
        };
        Target target;

        if (call.parent == 0) {
            Session& s = session_mut(call.session);
            auto it = s.refs.find(call.handle);
            if (it == s.refs.end())
                throw Error(ErrorCode::UnknownReference,
                            "session '" + call.session + "' has no reference '" + call.handle + "'");
            const RefBinding& b = it->second;
            if (b.is_instance) {
                BeanInstance* inst = find_instance(b.instance);
                if (!inst || !inst->alive ||
                    deployment(inst->deployment).state != DeploymentState::Started) {
                    fail_call(id, FailReason::InvalidReference);
                    return;
                }
                target = {inst->deployment, inst->bean,
                          deployment(inst->deployment).type->find_bean(inst->bean), inst->id};
            } else {
                auto dit = deployments_.find(b.pool_deployment);
                if (dit == deployments_.end() || dit->second.state != DeploymentState::Started) {
                    fail_call(id, FailReason::InvalidReference);
                    return;
                }
                target = {b.pool_deployment, b.pool_bean,
                          dit->second.type->find_bean(b.pool_bean), 0};
            }
        } else {
            Call& parent = calls_.at(call.parent);
            if (parent.status != CallStatus::Active) {
                fail_call(id, FailReason::InvalidReference);
                return;
            }
            auto resolved = resolve_via(parent.target_deployment, parent.target_bean, call.via);
            if (!resolved) {
                fail_call(id, FailReason::InvalidReference);
                return;
            }
            auto [dep_id, bean_name] = *resolved;
            const Deployment& dep = deployment(dep_id);
            if (dep.state != DeploymentState::Started) {
                fail_call(id, FailReason::InvalidReference);
                return;
            }
            target = {dep_id, bean_name, dep.type->find_bean(bean_name), 0};
            if (target.type && target.type->kind == BeanKind::Stateful) {
                Session& s = session_mut(call.session);
                auto key = std::make_pair(dep_id, bean_name);
                auto ait = s.aux_instances.find(key);
                BeanInstance* inst =
                    ait != s.aux_instances.end() ? find_instance(ait->second) : nullptr;
                if (!inst || !inst->alive) {
                    BeanInstance& fresh = create_instance(dep_id, *target.type);
                    fresh.session = call.session;
                    s.aux_instances[key] = fresh.id;
                    inst = &fresh;
                }
                target.instance = inst->id;
            }
        }

        if (!target.type) {
            fail_call(id, FailReason::InvalidReference);
            return;
        }
        call.target_deployment = target.deployment;
        call.target_bean = target.bean;

        // Admission control: a quiescing region blocks entering calls unless
        // they are needed to finish work that was in flight at initiation.
        if (const QuiescenceRegion* r = blocking_region_for(target.deployment, target.bean)) {
            bool admit = r->phase == QuiescencePhase::Initiated && admission_enabled_ &&
                         admissible_by_snapshot(*r, call.session, ancestor_chain(call));
            if (!admit) {
                call.status = CallStatus::Blocked;
                call.blocked_at = now_;
                call.was_blocked = true;
                call.blocking_region = r->id;
                regions_.at(r->id).blocked.push_back(id);
                emit(TraceKind::CallBlocked, call.session, id,
                     "region=" + r->id + " target=" + target.deployment + "." + target.bean);
                return;
            }
        }

        if (!call.spec.db_ops.empty()) {
            Datastore& store = datastore(target.deployment);
            if (store.locked) {
                fail_call(id, FailReason::DatastoreLocked);
                return;
            }
            for (const auto& op : call.spec.db_ops)
                if (op.op == DbOp::Op::Put) {
                    store.entries[op.key] = op.value;
                    emit(TraceKind::Datastore, call.session, id,
                         "deployment=" + target.deployment + " op=put key=" + op.key);
                }
        }

        BeanInstance* inst = nullptr;
        if (target.instance != 0) {
            inst = &instance_mut(target.instance);
            if (inst->busy != 0) {
                // Non-reentrant: wait until the instance frees, lowest id first.
                call.target_instance = inst->id;
                inst->waiters.push_back(id);
                std::sort(inst->waiters.begin(), inst->waiters.end());
                return;
            }
        } else {
            inst = &pick_pool_instance(target.deployment, *target.type);
        }

        begin_service(call, *inst);
    }

    void begin_service(Call& call, BeanInstance& inst) {
        call.status = CallStatus::Active;
        call.started_at = now_;
        call.target_instance = inst.id;
        call.target_deployment = inst.deployment;
        call.target_bean = inst.bean;
        call.outstanding_children = static_cast<int>(call.spec.children.size());
        call.self_done = false;
        inst.busy = call.id;
        emit(TraceKind::CallStart, call.session, call.id,
             "target=" + instance_label(inst) + " op=" + call.spec.op);
        for (std::size_t i = 0; i < call.spec.children.size(); ++i)
            push_event({now_ + call.spec.children[i].at, PhaseStart, next_seq_++,
                        SimEvent::Kind::ChildIssue, call.id, i});
        push_event({now_ + call.spec.duration, PhaseComplete, next_seq_++,
                    SimEvent::Kind::CallComplete, call.id, 0});
    }

    void issue_child(CallId parent_id, std::size_t child_index) {
        Call& parent = calls_.at(parent_id);
        if (parent.status != CallStatus::Active) return;  // parent already gone
        const NestedCall& child_spec = parent.spec.children[child_index];

        Call call;
        call.id = ++call_counter_;
        call.session = parent.session;
        call.parent = parent_id;
        call.via = child_spec.via;
        call.spec = child_spec.spec;
        call.scheduled_at = now_;
        CallId id = call.id;
        calls_.emplace(id, std::move(call));
        session_mut(parent.session).live_calls += 1;
        emit(TraceKind::CallScheduled, parent.session, id,
             "op=" + calls_.at(id).spec.op + " parent=" + std::to_string(parent_id));
        try_start(id);
    }

    void on_complete(CallId id) {
        Call& call = calls_.at(id);
        if (call.status != CallStatus::Active) return;
        if (call.outstanding_children > 0) {
            call.self_done = true;  // synchronous children still running
            return;
        }
        finish_done(call);
    }

    void finish_done(Call& call) {
        call.status = CallStatus::Done;
        call.finished_at = now_;
        apply_effects(call);
        emit(TraceKind::CallDone, call.session, call.id, "");
        detach_from_instance(call);
        after_terminal(call);
    }

    void fail_call(CallId id, FailReason reason) {
        Call& call = calls_.at(id);
        if (call.terminal()) return;
        call.status = CallStatus::Failed;
        call.fail_reason = reason;
        call.finished_at = now_;
        emit(TraceKind::CallFailed, call.session, id, "reason=" + std::string(to_string(reason)));
        detach_from_instance(call);
        after_terminal(call);
    }

    void detach_from_instance(Call& call) {
        if (call.target_instance == 0) return;
        BeanInstance* inst = find_instance(call.target_instance);
        if (!inst || inst->busy != call.id) {
            // Still parked in a waiter queue: remove without touching busy.
            if (inst)
                inst->waiters.erase(
                    std::remove(inst->waiters.begin(), inst->waiters.end(), call.id),
                    inst->waiters.end());
            return;
        }
        inst->busy = 0;
        if (inst->moribund) {
            for (CallId w : inst->waiters) fail_call(w, FailReason::InvalidReference);
            inst->waiters.clear();
            inst->alive = false;
            return;
        }
        if (!inst->waiters.empty()) {
            CallId next = inst->waiters.front();
            inst->waiters.erase(inst->waiters.begin());
            try_start(next);
        }
    }

    void after_terminal(Call& call) {
        if (call.parent != 0) {
            Call& parent = calls_.at(call.parent);
            if (parent.status == CallStatus::Active) {
                parent.outstanding_children -= 1;
                if (parent.outstanding_children == 0 && parent.self_done) finish_done(parent);
            }
        }
        Session& s = session_mut(call.session);
        s.live_calls -= 1;
        if (s.close_when_idle && s.live_calls == 0 && s.status == SessionStatus::Open) do_close(s);
    }

    void apply_effects(const Call& call) {
        if (call.spec.effects.empty()) return;
        BeanInstance* inst = find_instance(call.target_instance);
        if (!inst || !inst->stateful) return;  // state effects only exist on stateful targets
        for (const auto& e : call.spec.effects) {
            auto it = inst->state.find(e.field);
            if (it == inst->state.end())
                throw Error(ErrorCode::ValidationError,
                            "effect names unknown field '" + e.field + "' on " +
                                instance_label(*inst));
            if (e.op == StateEffect::Op::Add) {
                auto* cur = std::get_if<std::int64_t>(&it->second);
                const auto* delta = std::get_if<std::int64_t>(&e.value);
                if (!cur || !delta)
                    throw Error(ErrorCode::ValidationError,
                                "additive effect on non-int field '" + e.field + "'");
                *cur += *delta;
            } else {
                if (type_of(it->second) != type_of(e.value))
                    throw Error(ErrorCode::ValidationError,
                                "effect type mismatch on field '" + e.field + "'");
                it->second = e.value;
            }
        }
    }

    // ---- resolution helpers ----

    std::optional<std::pair<std::string, std::string>> resolve_via(
        const std::string& dep_id, const std::string& bean, const std::string& reference) const {
        auto dit = deployments_.find(dep_id);
        if (dit == deployments_.end()) return std::nullopt;
        auto wit = dit->second.wirings.find({bean, reference});
        if (wit == dit->second.wirings.end()) return std::nullopt;
        return std::make_pair(wit->second.deployment, wit->second.bean);
    }

    std::vector<CallId> ancestor_chain(const Call& call) const {
        std::vector<CallId> chain;
        CallId cursor = call.parent;
        while (cursor != 0) {
            chain.push_back(cursor);
            cursor = calls_.at(cursor).parent;
        }
        return chain;
    }

    // Region that would block a call/lookup into (deployment, bean) right now.
    const QuiescenceRegion* blocking_region_for(const std::string& dep_id,
                                                const std::string& bean) const {
        for (const auto& [rid, r] : regions_) {
            if (r.phase != QuiescencePhase::Initiated && r.phase != QuiescencePhase::Quiescent)
                continue;
            if (r.members.contains(dep_id, bean)) return &r;
        }
        return nullptr;
    }

    bool session_attached(const Session& s, const std::string& dep_id) const {
        for (const auto& [handle, b] : s.refs) {
            if (b.is_instance) {
                const BeanInstance* inst = find_instance(b.instance);
                if (inst && inst->alive && inst->deployment == dep_id) return true;
            } else if (b.pool_deployment == dep_id) {
                return true;
            }
        }
        for (const auto& [key, iid] : s.aux_instances) {
            const BeanInstance* inst = find_instance(iid);
            if (inst && inst->alive && inst->deployment == dep_id) return true;
        }
        for (const auto& [cid, call] : calls_)
            if (call.session == s.id && !call.terminal() && call.status != CallStatus::Blocked &&
                call.target_deployment == dep_id)
                return true;
        return false;
    }

    bool resumable(const Call& call) const {
        const Session& s = session(call.session);
        if (s.status == SessionStatus::Closed) return false;
        if (s.status == SessionStatus::PendingOpen) {
            std::string dep_id = resolve_redirect(s.request.deployment);
            auto it = deployments_.find(dep_id);
            if (it == deployments_.end() || it->second.state != DeploymentState::Started)
                return false;
            const BeanType* bean = it->second.type->find_bean(s.request.bean);
            return bean && bean->find_provided(s.request.interface_name);
        }
        if (call.parent != 0) {
            const Call& parent = calls_.at(call.parent);
            if (parent.status != CallStatus::Active) return false;
            auto resolved = resolve_via(parent.target_deployment, parent.target_bean, call.via);
            if (!resolved) return false;
            auto it = deployments_.find(resolved->first);
            return it != deployments_.end() && it->second.state == DeploymentState::Started;
        }
        auto it = s.refs.find(call.handle);
        if (it == s.refs.end()) return false;
        const RefBinding& b = it->second;
        if (b.is_instance) {
            const BeanInstance* inst = find_instance(b.instance);
            if (!inst || !inst->alive) return false;
            auto dit = deployments_.find(inst->deployment);
            return dit != deployments_.end() && dit->second.state == DeploymentState::Started;
        }
        auto dit = deployments_.find(b.pool_deployment);
        return dit != deployments_.end() && dit->second.state == DeploymentState::Started;
    }

    // ---- quiescence detection ----

    // True when no member instance has an Active call and no admissible call
    // is pending, waiting or already issued. Blocked calls do not count (they
    // stay blocked until the release), and neither do workload actions that
    // have not happened yet: conversations are interrupted at quiescence, not
    // drained, so a later invoke of an admitted session either arrives before
    // quiescence and extends the wait or freezes until the release.
    bool region_quiet(const QuiescenceRegion& r) const {
        for (const auto& [cid, call] : calls_) {
            if (call.status == CallStatus::Active &&
                r.members.contains(call.target_deployment, call.target_bean))
                return false;
            if (call.status == CallStatus::Pending && !call.target_deployment.empty() &&
                r.members.contains(call.target_deployment, call.target_bean) &&
                admissible_by_snapshot(r, call.session, ancestor_chain(call)))
                return false;
        }
        for (const auto& e : queue_) {
            switch (e.kind) {
            case SimEvent::Kind::CallStart: {
                const Call& call = calls_.at(e.call);
                if (call.status != CallStatus::Pending) break;
                auto target = prospective_target(call);
                if (target && r.members.contains(target->first, target->second) &&
                    admissible_by_snapshot(r, call.session, ancestor_chain(call)))
                    return false;
                break;
            }
            case SimEvent::Kind::ChildIssue: {
                const Call& parent = calls_.at(e.call);
                if (parent.status != CallStatus::Active) break;
                const NestedCall& spec = parent.spec.children[e.index];
                auto target = resolve_via(parent.target_deployment, parent.target_bean, spec.via);
                if (!target || !r.members.contains(target->first, target->second)) break;
                std::vector<CallId> chain = ancestor_chain(parent);
                chain.insert(chain.begin(), parent.id);
                if (admissible_by_snapshot(r, parent.session, chain)) return false;
                break;
            }
            case SimEvent::Kind::Workload: break;
            case SimEvent::Kind::CallComplete: break;
            }
        }
        return true;
    }

    std::optional<std::pair<std::string, std::string>> prospective_target(const Call& call) const {
        if (call.parent != 0) {
            const Call& parent = calls_.at(call.parent);
            if (parent.status != CallStatus::Active) return std::nullopt;
            return resolve_via(parent.target_deployment, parent.target_bean, call.via);
        }
        auto sit = sessions_.find(call.session);
        if (sit == sessions_.end() || sit->second.status != SessionStatus::Open)
            return std::nullopt;
        auto bit = sit->second.refs.find(call.handle);
        if (bit == sit->second.refs.end()) return std::nullopt;
        return binding_target(bit->second);
    }

    std::optional<std::pair<std::string, std::string>> binding_target(const RefBinding& b) const {
        if (b.is_instance) {
            const BeanInstance* inst = find_instance(b.instance);
            if (!inst || !inst->alive) return std::nullopt;
            return std::make_pair(inst->deployment, inst->bean);
        }
        return std::make_pair(b.pool_deployment, b.pool_bean);
    }

    // ---- instances ----

    BeanInstance& create_instance(const std::string& dep_id, const BeanType& bean) {
        BeanInstance inst;
        inst.id = ++instance_counter_;
        inst.deployment = dep_id;
        inst.bean = bean.name;
        inst.stateful = bean.kind == BeanKind::Stateful;
        for (const auto& f : bean.state_fields) inst.state[f.name] = default_value(f.type);
        InstanceId id = inst.id;
        instances_.emplace(id, std::move(inst));
        BeanInstance& ref = instances_.at(id);
        if (ref.stateful)
            for (auto& [rid, r] : regions_)
                if (r.phase != QuiescencePhase::Declared && r.phase != QuiescencePhase::Released &&
                    r.members.contains(dep_id, bean.name))
                    r.tracked.insert(id);
        return ref;
    }

    BeanInstance& pick_pool_instance(const std::string& dep_id, const BeanType& bean) {
        std::vector<InstanceId> free;
        for (auto& [iid, inst] : instances_)
            if (inst.alive && !inst.stateful && inst.deployment == dep_id &&
                inst.bean == bean.name && inst.busy == 0)
                free.push_back(iid);
        if (!free.empty()) {
            // A fresh instance may always serve a call; the pool is unbounded.
            std::size_t choice = rng_() % (free.size() + 1);
            if (choice < free.size()) return instances_.at(free[choice]);
        }
        return create_instance(dep_id, bean);
    }

    BeanInstance* find_instance(InstanceId id) {
        auto it = instances_.find(id);
        return it == instances_.end() ? nullptr : &it->second;
    }

    const BeanInstance* find_instance(InstanceId id) const {
        auto it = instances_.find(id);
        return it == instances_.end() ? nullptr : &it->second;
    }

    BeanInstance& instance_mut(InstanceId id) {
        auto it = instances_.find(id);
        if (it == instances_.end())
            throw Error(ErrorCode::ValidationError, "no instance #" + std::to_string(id));
        return it->second;
    }

    // ---- misc helpers ----

    void apply_wire(const std::string& dep_id, const Wire& w, bool require_started_target) {
        Deployment& dep = deployment_mut(dep_id);
        const BeanType* bean = dep.type->find_bean(w.bean);
        if (!bean)
            throw Error(ErrorCode::ValidationError,
                        "no bean '" + w.bean + "' in deployment '" + dep_id + "'");
        const ReferenceDecl* ref = bean->find_reference(w.reference);
        if (!ref)
            throw Error(ErrorCode::UnknownReference,
                        "bean '" + w.bean + "' declares no reference '" + w.reference + "'");
        auto tit = deployments_.find(w.target.deployment);
        if (tit == deployments_.end() || !tit->second.type->find_bean(w.target.bean))
            throw Error(ErrorCode::WiringTargetMissing,
                        "wiring target " + w.target.deployment + "." + w.target.bean +
                            " does not exist");
        if (require_started_target && tit->second.state != DeploymentState::Started)
            throw Error(ErrorCode::WiringTargetMissing,
                        "wiring target deployment '" + w.target.deployment + "' is " +
                            to_string(tit->second.state));
        const BeanType* target_bean = tit->second.type->find_bean(w.target.bean);
        if (!target_bean->provides_interface(ref->target))
            throw Error(ErrorCode::InterfaceMismatch,
                        "target " + w.target.deployment + "." + w.target.bean +
                            " does not provide " + to_string(ref->target));
        WiringTarget resolved = w.target;
        resolved.interface = ref->target;
        dep.wirings[{w.bean, w.reference}] = resolved;
    }

    Deployment& deployment_mut(const std::string& id) {
        auto it = deployments_.find(id);
        if (it == deployments_.end())
            throw Error(ErrorCode::UnknownDeployment, "no deployment '" + id + "'");
        return it->second;
    }

    Session& session_mut(const std::string& id) {
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
        return it->second;
    }

    QuiescenceRegion& region_mut(const std::string& id) {
        auto it = regions_.find(id);
        if (it == regions_.end()) throw Error(ErrorCode::UnknownRegion, "no region '" + id + "'");
        return it->second;
    }

    static void require_phase(const QuiescenceRegion& r, QuiescencePhase next) {
        if (!quiescence_phase_allows(r.phase, next))
            throw Error(ErrorCode::WrongPhase,
                        "region '" + r.id + "' is " + to_string(r.phase) + ", cannot enter " +
                            to_string(next));
    }

    std::string fresh_deployment_id() {
        while (true) {
            std::string id = "d" + std::to_string(++deployment_counter_);
            if (!deployments_.count(id)) return id;
        }
    }

    static std::string binding_label(const RefBinding& b) {
        if (b.is_instance) return "#" + std::to_string(b.instance);
        return b.pool_deployment + "." + b.pool_bean + "(pool)";
    }

    // Trace lines spell out where an instance lives so they read on their own;
    // snapshots keep the short form because instance lines sit alongside.
    std::string binding_trace_label(const RefBinding& b) const {
        if (b.is_instance)
            if (const BeanInstance* inst = find_instance(b.instance))
                return instance_label(*inst);
        return binding_label(b);
    }

    void emit(TraceKind kind, const std::string& session, CallId call, std::string detail) {
        trace_.push_back({now_, kind, session, call, std::move(detail)});
    }

    ModelRegistry registry_;
    std::map<std::string, Deployment> deployments_;
    std::map<std::string, std::string> redirects_;
    std::map<std::string, Session> sessions_;
    std::map<InstanceId, BeanInstance> instances_;
    std::map<CallId, Call> calls_;
    std::map<std::string, QuiescenceRegion> regions_;
    std::vector<WorkloadStep> actions_;
    std::set<SimEvent> queue_;
    std::vector<TraceEvent> trace_;
    std::mt19937_64 rng_;
    Tick now_ = 0;
    bool admission_enabled_ = true;
    CallId call_counter_ = 0;
    InstanceId instance_counter_ = 0;
    std::uint64_t next_seq_ = 0;
    int region_counter_ = 0;
    int deployment_counter_ = 0;
};

}  // namespace modswap
