#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "modswap/compat.hpp"
#include "modswap/errors.hpp"
#include "modswap/model.hpp"
#include "modswap/runtime.hpp"
#include "modswap/value.hpp"

namespace modswap {

// ==== step identifiers ======================================================

enum class StepId { a, b, c, d, e, f, g, h, i, j, k, l, m, n, o };

inline const char* to_string(StepId id) {
    static const char* names[] = {"a", "b", "c", "d", "e", "f", "g", "h",
                                  "i", "j", "k", "l", "m", "n", "o"};
    return names[static_cast<int>(id)];
}

inline std::optional<StepId> parse_step_id(const std::string& text) {
    if (text.size() != 1 || text[0] < 'a' || text[0] > 'o') return std::nullopt;
    return static_cast<StepId>(text[0] - 'a');
}

inline const std::vector<StepId>& all_steps() {
    static const std::vector<StepId> steps = [] {
        std::vector<StepId> v;
        for (int i = 0; i < 15; ++i) v.push_back(static_cast<StepId>(i));
        return v;
    }();
    return steps;
}

// Hard ordering requirements between steps. An edge u -> v applies whenever
// both steps appear in a strategy; requirements on absent steps lapse.
inline const std::map<StepId, std::set<StepId>>& dependency_table() {
    using S = StepId;
    static const std::map<StepId, std::set<StepId>> table = {
        {S::a, {}},
        {S::b, {}},
        {S::c, {S::b}},
        {S::d, {S::b}},
        {S::e, {S::d}},
        {S::f, {S::c, S::e}},
        {S::g, {S::e, S::f}},
        {S::h, {S::g}},
        {S::i, {S::a}},
        {S::j, {S::f, S::h, S::i}},
        {S::k, {S::j}},
        {S::l, {S::h, S::i}},
        {S::m, {S::h, S::i}},
        {S::n, {S::d, S::h, S::k, S::l, S::m}},
        {S::o, {S::g, S::k, S::l, S::m}},
    };
    return table;
}

// ==== typed ports ===========================================================

enum class PortKind {
    DeploymentId,
    ModuleTypeId,
    RegionId,
    StateBundle,
    RefMap,
    InstanceMap,
    DatastoreSnapshot,
    Config,
    TickStamp,
};

inline const char* to_string(PortKind k) {
    switch (k) {
    case PortKind::DeploymentId: return "DeploymentId";
    case PortKind::ModuleTypeId: return "ModuleTypeId";
    case PortKind::RegionId: return "RegionId";
    case PortKind::StateBundle: return "StateBundle";
    case PortKind::RefMap: return "RefMap";
    case PortKind::InstanceMap: return "InstanceMap";
    case PortKind::DatastoreSnapshot: return "DatastoreSnapshot";
    case PortKind::Config: return "Config";
    default: return "TickStamp";
    }
}

struct DeploymentRef {
    std::string id;
};

struct ModuleRef {
    std::string name;
};

struct RegionRef {
    std::string id;
};

// Conversational state lifted out of tracked instances, keyed by instance id.
struct StateBundle {
    struct Entry {
        std::string deployment;
        std::string bean;
        std::map<std::string, Value> fields;
    };
    std::map<InstanceId, Entry> entries;
};

struct InstanceMap {
    std::map<InstanceId, InstanceId> mapping;  // old instance -> new instance
};

struct RefMap {
    std::vector<RebindEntry> entries;
};

struct DatastoreSnapshot {
    std::map<std::string, std::string> entries;
};

using ConfigMap = std::map<std::string, std::string>;

struct TickStamp {
    Tick at = 0;
};

using PortValue = std::variant<DeploymentRef, ModuleRef, RegionRef, StateBundle, RefMap,
                               InstanceMap, DatastoreSnapshot, ConfigMap, TickStamp>;

inline PortKind kind_of(const PortValue& v) {
    switch (v.index()) {
    case 0: return PortKind::DeploymentId;
    case 1: return PortKind::ModuleTypeId;
    case 2: return PortKind::RegionId;
    case 3: return PortKind::StateBundle;
    case 4: return PortKind::RefMap;
    case 5: return PortKind::InstanceMap;
    case 6: return PortKind::DatastoreSnapshot;
    case 7: return PortKind::Config;
    default: return PortKind::TickStamp;
    }
}

// ==== signatures ============================================================

struct PortDecl {
    std::string name;
    PortKind kind;
    bool optional = false;
};

struct StepSignature {
    StepId id = StepId::a;
    std::string title;
    std::vector<PortDecl> inputs;
    std::vector<PortDecl> outputs;

    const PortDecl* find_input(const std::string& name) const {
        for (const auto& p : inputs)
            if (p.name == name) return &p;
        return nullptr;
    }
    const PortDecl* find_output(const std::string& name) const {
        for (const auto& p : outputs)
            if (p.name == name) return &p;
        return nullptr;
    }
};

inline const std::map<StepId, StepSignature>& step_signatures() {
    using K = PortKind;
    static const std::map<StepId, StepSignature> sigs = [] {
        std::map<StepId, StepSignature> m;
        auto add = [&](StepId id, std::string title, std::vector<PortDecl> in,
                       std::vector<PortDecl> out) {
            m[id] = StepSignature{id, std::move(title), std::move(in), std::move(out)};
        };
        add(StepId::a, "deploy replacement",
            {{"old", K::DeploymentId}, {"module", K::ModuleTypeId}, {"config", K::Config, true}},
            {{"newDeployment", K::DeploymentId}});
        add(StepId::b, "declare region",
            {{"old", K::DeploymentId}, {"config", K::Config, true}},
            {{"region", K::RegionId}});
        add(StepId::c, "start tracking", {{"region", K::RegionId}}, {{"tracking", K::TickStamp}});
        add(StepId::d, "initiate quiescence", {{"region", K::RegionId}},
            {{"initiated", K::TickStamp}});
        add(StepId::e, "await quiescence",
            {{"region", K::RegionId}, {"initiated", K::TickStamp}, {"config", K::Config, true}},
            {{"quiescentAt", K::TickStamp}});
        add(StepId::f, "extract conversational state",
            {{"region", K::RegionId}, {"tracking", K::TickStamp}, {"quiescent", K::TickStamp}},
            {{"bundle", K::StateBundle}});
        add(StepId::g, "snapshot datastore",
            {{"old", K::DeploymentId}, {"quiescent", K::TickStamp}, {"bundle", K::StateBundle}},
            {{"snapshot", K::DatastoreSnapshot}});
        add(StepId::h, "transform datastore",
            {{"snapshot", K::DatastoreSnapshot}, {"config", K::Config, true}},
            {{"transformed", K::DatastoreSnapshot}});
        add(StepId::i, "start replacement", {{"deployment", K::DeploymentId}},
            {{"started", K::DeploymentId}});
        add(StepId::j, "transfer state",
            {{"bundle", K::StateBundle},
             {"target", K::DeploymentId},
             {"transformed", K::DatastoreSnapshot, true},
             {"config", K::Config, true}},
            {{"instances", K::InstanceMap}});
        add(StepId::k, "rebind transferred sessions", {{"instances", K::InstanceMap}},
            {{"rebinds", K::RefMap}});
        add(StepId::l, "rewire and redirect",
            {{"old", K::DeploymentId},
             {"target", K::DeploymentId},
             {"transformed", K::DatastoreSnapshot, true}},
            {{"rewired", K::TickStamp}});
        add(StepId::m, "rebind remaining references",
            {{"old", K::DeploymentId},
             {"target", K::DeploymentId},
             {"transformed", K::DatastoreSnapshot, true},
             {"config", K::Config, true}},
            {{"rebound", K::RefMap}});
        add(StepId::n, "release region",
            {{"region", K::RegionId},
             {"initiated", K::TickStamp},
             {"rewired", K::TickStamp},
             {"transformed", K::DatastoreSnapshot, true},
             {"rebinds", K::RefMap, true},
             {"rebound", K::RefMap, true}},
            {{"released", K::TickStamp}});
        add(StepId::o, "retire old deployment",
            {{"old", K::DeploymentId},
             {"rewired", K::TickStamp},
             {"snapshot", K::DatastoreSnapshot, true},
             {"rebinds", K::RefMap, true},
             {"rebound", K::RefMap, true},
             {"config", K::Config, true}},
            {{"retired", K::TickStamp}});
        return m;
    }();
    return sigs;
}

// ==== transforms ============================================================

// Rewrites extracted state for one instance into the field layout of the new
// bean; returned fields must exist on the new bean with matching types.
using StateTransform =
    std::function<std::map<std::string, Value>(const StateBundle::Entry&, const BeanType&)>;

using StoreTransform =
    std::function<std::map<std::string, std::string>(const std::map<std::string, std::string>&)>;

class TransformRegistry {
public:
    void add_state(const std::string& name, StateTransform fn) { state_[name] = std::move(fn); }
    void add_store(const std::string& name, StoreTransform fn) { store_[name] = std::move(fn); }

    const StateTransform* find_state(const std::string& name) const {
        auto it = state_.find(name);
        return it == state_.end() ? nullptr : &it->second;
    }
    const StoreTransform* find_store(const std::string& name) const {
        auto it = store_.find(name);
        return it == store_.end() ? nullptr : &it->second;
    }

private:
    std::map<std::string, StateTransform> state_;
    std::map<std::string, StoreTransform> store_;
};

// ==== executor plumbing =====================================================

struct StepContext {
    Container& rt;
    std::map<std::string, PortValue> inputs;
    ConfigMap config;
    const TransformRegistry* transforms = nullptr;

    bool has(const std::string& name) const { return inputs.count(name) != 0; }

    template <typename T>
    const T& get(const std::string& name) const {
        auto it = inputs.find(name);
        if (it == inputs.end())
            throw Error(ErrorCode::MissingInput, "input '" + name + "' was not provided");
        const T* v = std::get_if<T>(&it->second);
        if (!v)
            throw Error(ErrorCode::KindMismatch,
                        "input '" + name + "' holds " +
                            std::string(to_string(kind_of(it->second))));
        return *v;
    }

    std::string config_str(const std::string& key, const std::string& fallback = "") const {
        auto it = config.find(key);
        return it == config.end() ? fallback : it->second;
    }

    bool config_bool(const std::string& key, bool fallback = false) const {
        auto it = config.find(key);
        if (it == config.end()) return fallback;
        return it->second == "true" || it->second == "1";
    }

    Tick config_tick(const std::string& key, Tick fallback) const {
        auto it = config.find(key);
        if (it == config.end()) return fallback;
        return std::stoll(it->second);
    }
};

using StepExecutor = std::function<std::map<std::string, PortValue>(StepContext&)>;

class ExecutorRegistry {
public:
    static ExecutorRegistry with_defaults();

    void set(StepId id, StepExecutor fn) { executors_[id] = std::move(fn); }

    bool has(StepId id) const { return executors_.count(id) != 0; }

    const StepExecutor& get(StepId id) const {
        auto it = executors_.find(id);
        if (it == executors_.end())
            throw Error(ErrorCode::UnknownExecutor,
                        "no executor for step '" + std::string(to_string(id)) + "'");
        return it->second;
    }

private:
    std::map<StepId, StepExecutor> executors_;
};

// ==== shared executor helpers ==============================================

namespace detail {

inline std::map<std::string, std::string> counterparts_for(const Container& rt,
                                                           const std::string& old_dep,
                                                           const ModuleType& new_type) {
    auto usable = client_referenced_interfaces(rt, old_dep);
    return counterpart_map(*rt.deployment(old_dep).type, new_type, usable, nullptr);
}

inline std::string counterpart_or_throw(const std::map<std::string, std::string>& map,
                                        const std::string& old_bean) {
    auto it = map.find(old_bean);
    if (it == map.end())
        throw Error(ErrorCode::NoCounterpartBean,
                    "no counterpart for bean '" + old_bean + "' in the replacement module");
    return it->second;
}

inline std::set<std::string> region_deployments(const Container& rt, const std::string& region_id) {
    std::set<std::string> deps = rt.region(region_id).members.deployments;
    for (const auto& [d, b] : rt.region(region_id).members.beans) deps.insert(d);
    return deps;
}

}  // namespace detail

// ==== default executors =====================================================

// Step a: deploy the replacement module. Environment values and wirings are
// derived from the old deployment through bean counterparts; references whose
// old target lies inside the replaced deployment remap to the counterpart
// bean of the new one. Config may pin the id ("id"), add wirings
// ("wire.<bean>.<ref>" = "dep.bean"), override env
// ("env.<bean>.<entry>" = literal) and share the old datastore
// ("aliasDatastore" = true).
inline std::map<std::string, PortValue> run_step_a(StepContext& ctx) {
    const std::string old_id = ctx.get<DeploymentRef>("old").id;
    const std::string module = ctx.get<ModuleRef>("module").name;
    Container& rt = ctx.rt;
    const Deployment& old_dep = rt.deployment(old_id);
    auto new_type = rt.registry().get(module);
    auto counterparts = detail::counterparts_for(rt, old_id, *new_type);

    // Unique old source per new bean, for env/wiring derivation.
    std::map<std::string, std::string> new_to_old;
    std::set<std::string> clashed;
    for (const auto& [o, n] : counterparts) {
        if (new_to_old.count(n))
            clashed.insert(n);
        else
            new_to_old[n] = o;
    }
    for (const auto& n : clashed) new_to_old.erase(n);

    std::map<std::string, std::map<std::string, Value>> env;
    for (const auto& nb : new_type->beans) {
        auto src = new_to_old.find(nb.name);
        for (const auto& entry : nb.env_entries) {
            Value v = entry.default_value;
            if (src != new_to_old.end()) {
                const auto& old_env = old_dep.env.at(src->second);
                auto oit = old_env.find(entry.name);
                if (oit != old_env.end() && type_of(oit->second) == entry.type) v = oit->second;
            }
            std::string override_key = "env." + nb.name + "." + entry.name;
            if (auto cit = ctx.config.find(override_key); cit != ctx.config.end()) {
                auto parsed = parse_value(entry.type, cit->second);
                if (!parsed)
                    throw Error(ErrorCode::EnvTypeMismatch,
                                "config '" + override_key + "' is not a " +
                                    std::string(to_string(entry.type)));
                v = *parsed;
            }
            env[nb.name][entry.name] = v;
        }
    }

    std::string new_id = rt.deploy(module, env, {}, ctx.config_str("id"));

    // Shared-store replacement: the new deployment works against the old
    // one's datastore, so no snapshot/transform pass is needed.
    if (ctx.config_bool("aliasDatastore", false)) rt.alias_datastore(new_id, old_id);

    for (const auto& nb : new_type->beans) {
        for (const auto& ref : nb.references) {
            std::string override_key = "wire." + nb.name + "." + ref.name;
            if (auto cit = ctx.config.find(override_key); cit != ctx.config.end()) {
                auto dot = cit->second.find('.');
                if (dot == std::string::npos)
                    throw Error(ErrorCode::ValidationError,
                                "config '" + override_key + "' must look like dep.bean");
                WiringTarget t{cit->second.substr(0, dot), cit->second.substr(dot + 1),
                               ref.target};
                rt.wire(new_id, nb.name, ref.name, t);
                continue;
            }
            auto target = derive_wiring(rt, old_id, counterparts, nb.name, ref, new_id);
            if (target) rt.wire(new_id, nb.name, ref.name, *target);
        }
    }
    return {{"newDeployment", DeploymentRef{new_id}}};
}

// Step b: declare the quiescence region around the deployment being replaced.
// Config "members" may widen it: comma-separated deployment ids or dep.bean
// pairs.
inline std::map<std::string, PortValue> run_step_b(StepContext& ctx) {
    const std::string old_id = ctx.get<DeploymentRef>("old").id;
    RegionMembers members;
    std::string extra = ctx.config_str("members");
    if (extra.empty()) {
        members.deployments.insert(old_id);
    } else {
        std::size_t pos = 0;
        while (pos <= extra.size()) {
            std::size_t comma = extra.find(',', pos);
            std::string item = extra.substr(pos, comma == std::string::npos ? std::string::npos
                                                                            : comma - pos);
            if (!item.empty()) {
                auto dot = item.find('.');
                if (dot == std::string::npos)
                    members.deployments.insert(item);
                else
                    members.beans.insert({item.substr(0, dot), item.substr(dot + 1)});
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        members.deployments.insert(old_id);
    }
    std::string region = ctx.rt.declare_region(std::move(members), ctx.config_str("id"));
    return {{"region", RegionRef{region}}};
}

inline std::map<std::string, PortValue> run_step_c(StepContext& ctx) {
    ctx.rt.start_tracking(ctx.get<RegionRef>("region").id);
    return {{"tracking", TickStamp{ctx.rt.now()}}};
}

inline std::map<std::string, PortValue> run_step_d(StepContext& ctx) {
    ctx.rt.initiate_quiescence(ctx.get<RegionRef>("region").id);
    return {{"initiated", TickStamp{ctx.rt.now()}}};
}

// Step e: run the simulation forward until the region is quiescent. Config
// "maxWaitTicks" bounds the wait.
inline std::map<std::string, PortValue> run_step_e(StepContext& ctx) {
    Tick at = ctx.rt.await_quiescence(ctx.get<RegionRef>("region").id,
                                      ctx.config_tick("maxWaitTicks", 1000000));
    return {{"quiescentAt", TickStamp{at}}};
}

// Step f: lift the conversational state of every tracked instance.
inline std::map<std::string, PortValue> run_step_f(StepContext& ctx) {
    const std::string region_id = ctx.get<RegionRef>("region").id;
    const QuiescenceRegion& region = ctx.rt.region(region_id);
    if (region.tracking_at < 0)
        throw Error(ErrorCode::TrackingNotStarted,
                    "region '" + region_id + "' never started tracking");
    if (region.phase != QuiescencePhase::Quiescent)
        throw Error(ErrorCode::NotQuiescent,
                    "region '" + region_id + "' is " + to_string(region.phase));
    StateBundle bundle;
    for (InstanceId iid : region.tracked) {
        auto it = ctx.rt.instances().find(iid);
        if (it == ctx.rt.instances().end() || !it->second.alive) continue;
        const BeanInstance& inst = it->second;
        bundle.entries[iid] = {inst.deployment, inst.bean, inst.state};
    }
    return {{"bundle", std::move(bundle)}};
}

// Step g: take a consistent snapshot of the old deployment's datastore and
// lock it against further writes until the handover completes.
inline std::map<std::string, PortValue> run_step_g(StepContext& ctx) {
    const std::string old_id = ctx.get<DeploymentRef>("old").id;
    ctx.get<StateBundle>("bundle");  // pairs the snapshot with extracted state
    DatastoreSnapshot snap{ctx.rt.datastore(old_id).entries};
    ctx.rt.lock_datastore(old_id);
    return {{"snapshot", std::move(snap)}};
}

// Step h: rewrite the snapshot for the new schema. Config "transform" names a
// registered rewrite; default is identity.
inline std::map<std::string, PortValue> run_step_h(StepContext& ctx) {
    DatastoreSnapshot snap = ctx.get<DatastoreSnapshot>("snapshot");
    std::string name = ctx.config_str("transform");
    if (!name.empty()) {
        const StoreTransform* fn =
            ctx.transforms ? ctx.transforms->find_store(name) : nullptr;
        if (!fn)
            throw Error(ErrorCode::TransformFailed, "no datastore transform named '" + name + "'");
        try {
            snap.entries = (*fn)(snap.entries);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw Error(ErrorCode::TransformFailed, e.what());
        }
    }
    return {{"transformed", std::move(snap)}};
}

inline std::map<std::string, PortValue> run_step_i(StepContext& ctx) {
    const std::string id = ctx.get<DeploymentRef>("deployment").id;
    ctx.rt.start_deployment(id);
    return {{"started", DeploymentRef{id}}};
}

// Step j: recreate each extracted instance inside the new deployment. Fields
// copy by matching name and type; everything else takes its declared default.
// Config "transform" names a registered state rewrite; "match.<bean>.<new>" =
// "<old>" declares an explicit field correspondence, which fails loudly on
// type conflict.
inline std::map<std::string, PortValue> run_step_j(StepContext& ctx) {
    const StateBundle& bundle = ctx.get<StateBundle>("bundle");
    const std::string target = ctx.get<DeploymentRef>("target").id;
    Container& rt = ctx.rt;
    auto new_type = rt.deployment(target).type;

    InstanceMap out;
    std::map<std::string, std::map<std::string, std::string>> counterparts_by_dep;
    for (const auto& [old_iid, entry] : bundle.entries) {
        auto& cmap = counterparts_by_dep[entry.deployment];
        if (cmap.empty()) cmap = detail::counterparts_for(rt, entry.deployment, *new_type);
        std::string new_bean_name = detail::counterpart_or_throw(cmap, entry.bean);
        const BeanType* new_bean = new_type->find_bean(new_bean_name);

        std::map<std::string, Value> fields;
        std::string transform_name = ctx.config_str("transform");
        if (!transform_name.empty()) {
            const StateTransform* fn =
                ctx.transforms ? ctx.transforms->find_state(transform_name) : nullptr;
            if (!fn)
                throw Error(ErrorCode::TransformFailed,
                            "no state transform named '" + transform_name + "'");
            try {
                fields = (*fn)(entry, *new_bean);
            } catch (const Error&) {
                throw;
            } catch (const std::exception& e) {
                throw Error(ErrorCode::TransformFailed, e.what());
            }
            for (const auto& [name, value] : fields) {
                const StateField* decl = new_bean->find_field(name);
                if (!decl || decl->type != type_of(value))
                    throw Error(ErrorCode::TransformFailed,
                                "transform '" + transform_name + "' produced field '" + name +
                                    "' not matching the schema of bean '" + new_bean_name + "'");
            }
        } else {
            for (const auto& nf : new_bean->state_fields) {
                std::string declared =
                    ctx.config_str("match." + new_bean_name + "." + nf.name);
                if (!declared.empty()) {
                    auto oit = entry.fields.find(declared);
                    if (oit == entry.fields.end())
                        throw Error(ErrorCode::TypeMismatchOnDeclaredMatch,
                                    "declared match '" + declared + "' -> '" + nf.name +
                                        "' names a missing old field");
                    if (type_of(oit->second) != nf.type)
                        throw Error(ErrorCode::TypeMismatchOnDeclaredMatch,
                                    "declared match '" + declared + "' -> '" + nf.name +
                                        "' crosses types");
                    fields[nf.name] = oit->second;
                    continue;
                }
                auto oit = entry.fields.find(nf.name);
                if (oit != entry.fields.end() && type_of(oit->second) == nf.type)
                    fields[nf.name] = oit->second;
            }
        }

        InstanceId new_iid = rt.materialize_instance(target, new_bean_name);
        for (const auto& [name, value] : fields) rt.write_instance_field(new_iid, name, value);
        rt.emit_event(TraceKind::Transfer, "", 0,
                      "from=" + entry.deployment + "." + entry.bean + "#" +
                          std::to_string(old_iid) + " to=" + target + "." + new_bean_name + "#" +
                          std::to_string(new_iid) + " fields=" + std::to_string(fields.size()));
        out.mapping[old_iid] = new_iid;
    }
    return {{"instances", std::move(out)}};
}

// Step k: point every session at its transferred instance.
inline std::map<std::string, PortValue> run_step_k(StepContext& ctx) {
    const InstanceMap& map = ctx.get<InstanceMap>("instances");
    RefMap applied;
    for (const auto& [old_iid, new_iid] : map.mapping) {
        for (const auto& [session, handle] : ctx.rt.bindings_to_instance(old_iid)) {
            BindTarget t;
            t.is_instance = true;
            t.instance = new_iid;
            ctx.rt.rebind_reference(session, handle, t);
            applied.entries.push_back({session, handle, t});
        }
        ctx.rt.remap_aux_instance(old_iid, new_iid);
    }
    return {{"rebinds", std::move(applied)}};
}

// Step l: move the surrounding wiring onto the new deployment, install its
// datastore contents when a transformed snapshot is supplied, and redirect
// future lookups of the old name.
inline std::map<std::string, PortValue> run_step_l(StepContext& ctx) {
    const std::string old_id = ctx.get<DeploymentRef>("old").id;
    const std::string target = ctx.get<DeploymentRef>("target").id;
    Container& rt = ctx.rt;
    auto new_type = rt.deployment(target).type;
    auto counterparts = detail::counterparts_for(rt, old_id, *new_type);

    if (ctx.has("transformed"))
        rt.install_datastore(target, ctx.get<DatastoreSnapshot>("transformed").entries);

    std::vector<std::tuple<std::string, std::string, std::string, WiringTarget>> pending;
    for (const auto& [dep_id, dep] : rt.deployments()) {
        if (dep_id == old_id || dep_id == target) continue;
        for (const auto& [key, wt] : dep.wirings) {
            if (wt.deployment != old_id) continue;
            WiringTarget moved = wt;
            moved.deployment = target;
            moved.bean = detail::counterpart_or_throw(counterparts, wt.bean);
            pending.emplace_back(dep_id, key.first, key.second, moved);
        }
    }
    for (const auto& [dep_id, bean, ref, moved] : pending) rt.rewire(dep_id, bean, ref, moved);
    rt.install_redirect(old_id, target);
    return {{"rewired", TickStamp{rt.now()}}};
}

// Step m: rebind session references that still point at the old deployment.
// Pool references always move. Conversational references are skipped in
// non-interrupt mode (they drain with the old deployment) and are an error in
// interrupt mode or when config "rebindStateful" asks to force them, because
// moving one without a transfer discards state.
inline std::map<std::string, PortValue> run_step_m(StepContext& ctx) {
    const std::string old_id = ctx.get<DeploymentRef>("old").id;
    const std::string target = ctx.get<DeploymentRef>("target").id;
    const std::string mode = ctx.config_str("mode", "noninterrupt");
    const bool force_stateful = ctx.config_bool("rebindStateful", false);
    Container& rt = ctx.rt;
    auto new_type = rt.deployment(target).type;
    auto counterparts = detail::counterparts_for(rt, old_id, *new_type);

    RefMap applied;
    std::vector<std::tuple<std::string, std::string, BindTarget>> moves;
    for (const auto& [sid, s] : rt.sessions()) {
        if (s.status != SessionStatus::Open) continue;
        for (const auto& [handle, b] : s.refs) {
            if (b.is_instance) {
                auto iit = rt.instances().find(b.instance);
                if (iit == rt.instances().end() || !iit->second.alive ||
                    iit->second.deployment != old_id)
                    continue;
                if (mode == "interrupt" || force_stateful)
                    throw Error(ErrorCode::StatefulRebindWithoutTransfer,
                                "session '" + sid + "' reference '" + handle +
                                    "' still holds conversational instance " +
                                    instance_label(iit->second));
                continue;  // non-interrupt: drains with the old deployment
            }
            if (b.pool_deployment != old_id) continue;
            BindTarget t;
            t.is_instance = false;
            t.deployment = target;
            t.bean = detail::counterpart_or_throw(counterparts, b.pool_bean);
            moves.emplace_back(sid, handle, t);
        }
    }
    for (const auto& [sid, handle, t] : moves) {
        rt.rebind_reference(sid, handle, t);
        applied.entries.push_back({sid, handle, t});
    }
    return {{"rebound", std::move(applied)}};
}

// Step n: unlock member datastores and lift the region, resuming queued
// lookups and blocked calls against the rewired topology.
inline std::map<std::string, PortValue> run_step_n(StepContext& ctx) {
    const std::string region_id = ctx.get<RegionRef>("region").id;
    Container& rt = ctx.rt;
    if (rt.region(region_id).phase != QuiescencePhase::Quiescent)
        throw Error(ErrorCode::NotQuiescent,
                    "region '" + region_id + "' is " + to_string(rt.region(region_id).phase));
    for (const auto& dep : detail::region_deployments(rt, region_id))
        if (rt.datastore(dep).locked) rt.unlock_datastore(dep);
    rt.release_region(region_id);
    return {{"released", TickStamp{rt.now()}}};
}

// Step o: retire the old deployment. Default mode drains: the simulation runs
// forward until no session depends on it, then it stops and undeploys. Config
// "force" stops immediately, failing whatever is still in flight; config
// "drainBoundTicks" bounds the drain.
inline std::map<std::string, PortValue> run_step_o(StepContext& ctx) {
    const std::string old_id = ctx.get<DeploymentRef>("old").id;
    Container& rt = ctx.rt;
    if (ctx.config_bool("force", false)) {
        rt.stop_deployment(old_id, /*also_undeploy=*/true, /*force=*/true);
        return {{"retired", TickStamp{rt.now()}}};
    }
    const Tick bound = ctx.config_tick("drainBoundTicks", 1000000);
    const Tick started = rt.now();
    while (rt.obligations(old_id) > 0) {
        if (rt.queue_empty())
            throw Error(ErrorCode::ActiveSessionsRemain,
                        "deployment '" + old_id + "' cannot drain: sessions outlive the workload");
        if (rt.now() - started > bound)
            throw Error(ErrorCode::ActiveSessionsRemain,
                        "deployment '" + old_id + "' did not drain within " +
                            std::to_string(bound) + " ticks");
        rt.advance_one();
    }
    rt.stop_deployment(old_id, /*also_undeploy=*/true, /*force=*/false);
    return {{"retired", TickStamp{rt.now()}}};
}

inline ExecutorRegistry ExecutorRegistry::with_defaults() {
    ExecutorRegistry reg;
    reg.set(StepId::a, run_step_a);
    reg.set(StepId::b, run_step_b);
    reg.set(StepId::c, run_step_c);
    reg.set(StepId::d, run_step_d);
    reg.set(StepId::e, run_step_e);
    reg.set(StepId::f, run_step_f);
    reg.set(StepId::g, run_step_g);
    reg.set(StepId::h, run_step_h);
    reg.set(StepId::i, run_step_i);
    reg.set(StepId::j, run_step_j);
    reg.set(StepId::k, run_step_k);
    reg.set(StepId::l, run_step_l);
    reg.set(StepId::m, run_step_m);
    reg.set(StepId::n, run_step_n);
    reg.set(StepId::o, run_step_o);
    return reg;
}

}  // namespace modswap
