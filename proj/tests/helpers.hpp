#pragma once

// Shared builders and small utilities for the test suite.

#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "modswap/modswap.hpp"

namespace testutil {

using namespace modswap;

inline std::optional<ErrorCode> error_code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string scenario_path(const std::string& name) {
    return std::string(MODSWAP_SCENARIO_DIR) + "/" + name;
}

inline ScenarioSpec load_scenario(const std::string& name) {
    return parse_scenario_text(read_file(scenario_path(name)));
}

inline RunOverrides scenario_overrides() {
    RunOverrides o;
    o.scenario_dir = MODSWAP_SCENARIO_DIR;
    return o;
}

// ---- cart fixture: the module pair used across runtime/step tests ----------

inline BeanType bean(std::string name, BeanKind kind, std::vector<InterfaceId> provides,
                     std::vector<ReferenceDecl> refs = {}, std::vector<StateField> fields = {},
                     std::vector<EnvEntry> env = {}) {
    BeanType b;
    b.name = std::move(name);
    b.kind = kind;
    b.provides = std::move(provides);
    b.references = std::move(refs);
    b.state_fields = std::move(fields);
    b.env_entries = std::move(env);
    return b;
}

inline ModuleType order_v1() {
    ModuleType m;
    m.name = "OrderV1";
    m.beans.push_back(bean("Cart", BeanKind::Stateful, {{"ICart", "cart1"}},
                           {{"catalogRef", {"ICatalog", "cat1"}}},
                           {{"count", ValueType::Int}, {"total", ValueType::Int}},
                           {{"taxRate", ValueType::Int, std::int64_t{12}}}));
    m.beans.push_back(bean("Catalog", BeanKind::Stateless, {{"ICatalog", "cat1"}}));
    return m;
}

inline ModuleType order_v2() {
    ModuleType m;
    m.name = "OrderV2";
    m.beans.push_back(bean("Cart", BeanKind::Stateful, {{"ICart", "cart1"}},
                           {{"catalogRef", {"ICatalog", "cat1"}}},
                           {{"count", ValueType::Int},
                            {"total", ValueType::Int},
                            {"discount", ValueType::Int}},
                           {{"taxRate", ValueType::Int, std::int64_t{12}}}));
    m.beans.push_back(bean("Catalog", BeanKind::Stateless, {{"ICatalog", "cat1"}}));
    return m;
}

// Deploys and starts OrderV1 as dep1, wiring the cart to its own catalog.
inline std::string stage_order_v1(Container& rt) {
    rt.registry().register_module(order_v1());
    std::string id = rt.deploy("OrderV1", {}, {}, "dep1");
    rt.wire(id, "Cart", "catalogRef", {id, "Catalog", {"ICatalog", "cat1"}});
    rt.start_deployment(id);
    return id;
}

inline CallSpec call(Tick duration, std::vector<StateEffect> effects = {},
                     std::vector<DbOp> db_ops = {}, std::vector<NestedCall> children = {}) {
    CallSpec c;
    c.duration = duration;
    c.effects = std::move(effects);
    c.db_ops = std::move(db_ops);
    c.children = std::move(children);
    return c;
}

inline StateEffect add(std::string field, std::int64_t delta) {
    return {std::move(field), StateEffect::Op::Add, delta};
}

inline StateEffect assign(std::string field, Value v) {
    return {std::move(field), StateEffect::Op::Assign, std::move(v)};
}

// Ids of trace events of one kind, in order, filtered to non-empty details.
inline std::vector<std::string> trace_details(const Container& rt, TraceKind kind) {
    std::vector<std::string> out;
    for (const auto& e : rt.trace())
        if (e.kind == kind) out.push_back(e.detail);
    return out;
}

// Sequence of step ids that completed, read back from a rendered trace.
inline std::vector<std::string> completed_steps(const std::string& trace_text) {
    std::vector<std::string> out;
    std::istringstream in(trace_text);
    std::string line;
    while (std::getline(in, line)) {
        auto kind_pos = line.find("kind=STEP ");
        if (kind_pos == std::string::npos) continue;
        if (line.find("status=ok") == std::string::npos) continue;
        auto id_pos = line.find("detail=id=");
        if (id_pos == std::string::npos) continue;
        out.push_back(line.substr(id_pos + 10, 1));
    }
    return out;
}

}  // namespace testutil
