#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "modswap/errors.hpp"
#include "modswap/value.hpp"

namespace modswap {

// An interface is identified by name plus a contract tag; two declarations
// denote the same interface only if both parts match.
struct InterfaceId {
    std::string name;
    std::string contract;

    friend bool operator==(const InterfaceId&, const InterfaceId&) = default;
    friend auto operator<=>(const InterfaceId&, const InterfaceId&) = default;
};

inline std::string to_string(const InterfaceId& i) {
    return i.name + ":" + i.contract;
}

// A named reference a bean holds to some interface; satisfied by wiring it
// to a concrete provider at deployment time.
struct ReferenceDecl {
    std::string name;
    InterfaceId target;

    friend bool operator==(const ReferenceDecl&, const ReferenceDecl&) = default;
};

struct EnvEntry {
    std::string name;
    ValueType type = ValueType::Int;
    Value default_value = std::int64_t{0};

    friend bool operator==(const EnvEntry&, const EnvEntry&) = default;
};

struct StateField {
    std::string name;
    ValueType type = ValueType::Int;

    friend bool operator==(const StateField&, const StateField&) = default;
    friend auto operator<=>(const StateField&, const StateField&) = default;
};

enum class BeanKind { Stateless, Stateful };

inline const char* to_string(BeanKind k) {
    return k == BeanKind::Stateful ? "stateful" : "stateless";
}

struct BeanType {
    std::string name;
    BeanKind kind = BeanKind::Stateless;
    std::vector<InterfaceId> provides;
    std::vector<ReferenceDecl> references;
    std::vector<EnvEntry> env_entries;
    std::vector<StateField> state_fields;  // empty unless stateful

    bool provides_interface(const InterfaceId& iface) const {
        return std::find(provides.begin(), provides.end(), iface) != provides.end();
    }

    const InterfaceId* find_provided(const std::string& iface_name) const {
        for (const auto& i : provides)
            if (i.name == iface_name) return &i;
        return nullptr;
    }

    const ReferenceDecl* find_reference(const std::string& ref_name) const {
        for (const auto& r : references)
            if (r.name == ref_name) return &r;
        return nullptr;
    }

    const EnvEntry* find_env(const std::string& entry_name) const {
        for (const auto& e : env_entries)
            if (e.name == entry_name) return &e;
        return nullptr;
    }

    const StateField* find_field(const std::string& field_name) const {
        for (const auto& f : state_fields)
            if (f.name == field_name) return &f;
        return nullptr;
    }

    friend bool operator==(const BeanType&, const BeanType&) = default;
};

struct ModuleType {
    std::string name;
    std::string version = "1";
    std::vector<BeanType> beans;

    const BeanType* find_bean(const std::string& bean_name) const {
        for (const auto& b : beans)
            if (b.name == bean_name) return &b;
        return nullptr;
    }

    // All beans of this module providing the given interface.
    std::vector<const BeanType*> providers_of(const InterfaceId& iface) const {
        std::vector<const BeanType*> out;
        for (const auto& b : beans)
            if (b.provides_interface(iface)) out.push_back(&b);
        return out;
    }

    friend bool operator==(const ModuleType&, const ModuleType&) = default;
};

// Holds registered module types. Types are immutable once registered; an
// interface name maps to exactly one contract tag across the registry.
class ModelRegistry {
public:
    std::shared_ptr<const ModuleType> register_module(ModuleType m) {
        validate(m);
        if (modules_.count(m.name))
            throw Error(ErrorCode::ValidationError,
                        "module type '" + m.name + "' already registered");
        for (const auto& bean : m.beans)
            for (const auto& iface : bean.provides) {
                auto it = interface_contracts_.find(iface.name);
                if (it != interface_contracts_.end() && it->second != iface.contract)
                    throw Error(ErrorCode::ValidationError,
                                "interface '" + iface.name + "' already registered with contract '" +
                                    it->second + "', conflicting with '" + iface.contract + "'");
            }
        auto ptr = std::make_shared<const ModuleType>(std::move(m));
        for (const auto& bean : ptr->beans)
            for (const auto& iface : bean.provides)
                interface_contracts_.emplace(iface.name, iface.contract);
        modules_.emplace(ptr->name, ptr);
        return ptr;
    }

    std::shared_ptr<const ModuleType> find(const std::string& name) const {
        auto it = modules_.find(name);
        return it == modules_.end() ? nullptr : it->second;
    }

    std::shared_ptr<const ModuleType> get(const std::string& name) const {
        if (auto m = find(name)) return m;
        throw Error(ErrorCode::UnknownModuleType, "no module type named '" + name + "'");
    }

    std::vector<std::string> module_names() const {
        std::vector<std::string> out;
        for (const auto& [name, ptr] : modules_) out.push_back(name);
        return out;
    }

private:
    static void validate(const ModuleType& m) {
        if (m.name.empty())
            throw Error(ErrorCode::ValidationError, "module type needs a name");
        if (m.beans.empty())
            throw Error(ErrorCode::ValidationError,
                        "module type '" + m.name + "' declares no beans");
        std::set<std::string> bean_names;
        for (const auto& b : m.beans) {
            if (!bean_names.insert(b.name).second)
                throw Error(ErrorCode::ValidationError,
                            "duplicate bean '" + b.name + "' in module '" + m.name + "'");
            if (b.kind == BeanKind::Stateless && !b.state_fields.empty())
                throw Error(ErrorCode::ValidationError,
                            "stateless bean '" + b.name + "' must not declare state fields");
            std::set<std::string> refs, envs, fields;
            for (const auto& r : b.references)
                if (!refs.insert(r.name).second)
                    throw Error(ErrorCode::ValidationError,
                                "duplicate reference '" + r.name + "' on bean '" + b.name + "'");
            for (const auto& e : b.env_entries) {
                if (!envs.insert(e.name).second)
                    throw Error(ErrorCode::ValidationError,
                                "duplicate env entry '" + e.name + "' on bean '" + b.name + "'");
                if (type_of(e.default_value) != e.type)
                    throw Error(ErrorCode::EnvTypeMismatch,
                                "default for env entry '" + e.name + "' on bean '" + b.name +
                                    "' is not of declared type " + to_string(e.type));
            }
            for (const auto& f : b.state_fields)
                if (!fields.insert(f.name).second)
                    throw Error(ErrorCode::ValidationError,
                                "duplicate state field '" + f.name + "' on bean '" + b.name + "'");
        }
    }

    std::map<std::string, std::shared_ptr<const ModuleType>> modules_;
    std::map<std::string, std::string> interface_contracts_;
};

// ==== deployment lifecycle ====

enum class DeploymentState { Deployed, Started, Stopped, Undeployed };

inline const char* to_string(DeploymentState s) {
    switch (s) {
    case DeploymentState::Deployed: return "Deployed";
    case DeploymentState::Started: return "Started";
    case DeploymentState::Stopped: return "Stopped";
    default: return "Undeployed";
    }
}

// Deployed -> Started -> Stopped -> {Started, Undeployed}. Everything else
// is rejected with IllegalLifecycleTransition.
inline bool lifecycle_allows(DeploymentState from, DeploymentState to) {
    switch (from) {
    case DeploymentState::Deployed: return to == DeploymentState::Started;
    case DeploymentState::Started: return to == DeploymentState::Stopped;
    case DeploymentState::Stopped:
        return to == DeploymentState::Started || to == DeploymentState::Undeployed;
    case DeploymentState::Undeployed: return false;
    }
    return false;
}

// Where a reference points: a bean inside some deployment, qualified by the
// interface the wiring is made for.
struct WiringTarget {
    std::string deployment;
    std::string bean;
    InterfaceId interface;

    friend bool operator==(const WiringTarget&, const WiringTarget&) = default;
};

inline std::string to_string(const WiringTarget& w) {
    return w.deployment + "." + w.bean + ":" + w.interface.name;
}

}  // namespace modswap
