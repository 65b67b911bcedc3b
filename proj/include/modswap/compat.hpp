#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "modswap/errors.hpp"
#include "modswap/model.hpp"
#include "modswap/runtime.hpp"

namespace modswap {

// Interfaces of a deployment that outside parties currently depend on: wiring
// targets from other deployments plus the bindings of open (or queued)
// sessions. Replacement must keep these available.
inline std::set<InterfaceId> client_referenced_interfaces(const Container& rt,
                                                          const std::string& dep_id) {
    std::set<InterfaceId> out;
    for (const auto& [other_id, other] : rt.deployments()) {
        if (other_id == dep_id) continue;
        for (const auto& [key, target] : other.wirings)
            if (target.deployment == dep_id) out.insert(target.interface);
    }
    const Deployment& dep = rt.deployment(dep_id);
    for (const auto& [sid, s] : rt.sessions()) {
        if (s.status == SessionStatus::Closed) continue;
        if (s.status == SessionStatus::PendingOpen) {
            if (s.request.deployment != dep_id) continue;
            if (const BeanType* bean = dep.type->find_bean(s.request.bean))
                if (const InterfaceId* iface = bean->find_provided(s.request.interface_name))
                    out.insert(*iface);
            continue;
        }
        for (const auto& [handle, b] : s.refs) {
            if (b.is_instance) {
                auto it = rt.instances().find(b.instance);
                if (it != rt.instances().end() && it->second.alive &&
                    it->second.deployment == dep_id)
                    out.insert(b.interface);
            } else if (b.pool_deployment == dep_id) {
                out.insert(b.interface);
            }
        }
    }
    return out;
}

struct CompatViolation {
    std::string restriction;  // R1..R5, or "counterpart"
    ErrorCode code = ErrorCode::CompatibilityRejected;
    std::string subject;
    std::string detail;
};

struct FieldMatch {
    std::string field;
    bool copied = false;           // name+type matched an old field
    bool type_conflict = false;    // name matched but types differ
    ValueType old_type = ValueType::Int;
    ValueType new_type = ValueType::Int;
};

struct CompatReport {
    bool ok = false;
    std::string old_deployment;
    std::string new_module;
    std::set<InterfaceId> client_referenced;
    std::set<InterfaceId> usable;  // client-referenced minus R1 failures
    std::map<std::string, std::string> counterparts;  // old bean -> new bean
    // old stateful bean -> plan over the new bean's fields
    std::map<std::string, std::vector<FieldMatch>> field_plan;
    std::vector<CompatViolation> violations;

    std::string text() const {
        std::string out;
        out += "replace " + old_deployment + " with module " + new_module + "\n";
        out += "client-referenced:";
        for (const auto& i : client_referenced) out += " " + to_string(i);
        out += "\n";
        for (const auto& [o, n] : counterparts) out += "counterpart " + o + " -> " + n + "\n";
        for (const char* r : {"R1", "R2", "R3", "R4", "R5"}) {
            bool bad = false;
            for (const auto& v : violations)
                if (v.restriction == r) {
                    out += std::string(r) + " violation: " + v.subject +
                           (v.detail.empty() ? "" : " (" + v.detail + ")") + "\n";
                    bad = true;
                }
            if (!bad) out += std::string(r) + " ok\n";
        }
        for (const auto& v : violations)
            if (v.restriction == "counterpart")
                out += "counterpart problem: " + v.subject +
                       (v.detail.empty() ? "" : " (" + v.detail + ")") + "\n";
        out += ok ? "result: compatible\n" : "result: rejected\n";
        return out;
    }
};

inline std::set<InterfaceId> provides_set(const BeanType& bean) {
    return {bean.provides.begin(), bean.provides.end()};
}

inline bool covers(const BeanType& bean, const std::set<InterfaceId>& wanted) {
    for (const auto& i : wanted)
        if (!bean.provides_interface(i)) return false;
    return true;
}

// Picks the new-module bean that continues each old bean's role. Preference
// order: unique bean covering the old bean's client-referenced interfaces,
// then unique bean covering everything the old bean provides, then the bean
// with the same name.
inline std::optional<std::string> resolve_counterpart(const BeanType& old_bean,
                                                      const ModuleType& new_type,
                                                      const std::set<InterfaceId>& usable,
                                                      std::vector<CompatViolation>* problems) {
    std::set<InterfaceId> cr_of_bean;
    for (const auto& i : old_bean.provides)
        if (usable.count(i)) cr_of_bean.insert(i);

    std::vector<const BeanType*> candidates;
    for (const auto& nb : new_type.beans)
        if (cr_of_bean.empty() || covers(nb, cr_of_bean)) candidates.push_back(&nb);

    if (candidates.empty()) {
        if (problems)
            problems->push_back({"counterpart", ErrorCode::NoCounterpartBean, old_bean.name,
                                 "no bean in " + new_type.name + " covers its client-referenced "
                                 "interfaces"});
        return std::nullopt;
    }
    if (candidates.size() > 1) {
        std::vector<const BeanType*> narrowed;
        auto all = provides_set(old_bean);
        for (const BeanType* c : candidates)
            if (covers(*c, all)) narrowed.push_back(c);
        if (narrowed.size() == 1) return narrowed.front()->name;
        const auto& pool = narrowed.empty() ? candidates : narrowed;
        for (const BeanType* c : pool)
            if (c->name == old_bean.name) return c->name;
        if (pool.size() > 1) {
            if (problems)
                problems->push_back({"counterpart", ErrorCode::AmbiguousCounterpart, old_bean.name,
                                     std::to_string(pool.size()) + " candidate beans in " +
                                         new_type.name});
            return std::nullopt;
        }
        return pool.front()->name;
    }
    return candidates.front()->name;
}

inline std::map<std::string, std::string> counterpart_map(const ModuleType& old_type,
                                                          const ModuleType& new_type,
                                                          const std::set<InterfaceId>& usable,
                                                          std::vector<CompatViolation>* problems) {
    std::map<std::string, std::string> out;
    for (const auto& ob : old_type.beans)
        if (auto c = resolve_counterpart(ob, new_type, usable, problems)) out[ob.name] = *c;
    return out;
}

// The wiring each new-module bean reference would receive, derived from the
// old deployment: same-named references keep their old target, except targets
// inside the replaced deployment, which remap to the counterpart bean of the
// replacement. Returns nothing for genuinely new references.
inline std::optional<WiringTarget> derive_wiring(const Container& rt, const std::string& old_dep_id,
                                                 const std::map<std::string, std::string>& old_to_new,
                                                 const std::string& new_bean,
                                                 const ReferenceDecl& ref,
                                                 const std::string& new_dep_id) {
    const Deployment& old_dep = rt.deployment(old_dep_id);
    std::string old_bean;
    for (const auto& [o, n] : old_to_new)
        if (n == new_bean) {
            if (!old_bean.empty()) return std::nullopt;  // many-to-one: no unique source
            old_bean = o;
        }
    if (old_bean.empty()) return std::nullopt;
    const BeanType* ob = old_dep.type->find_bean(old_bean);
    if (!ob || !ob->find_reference(ref.name)) return std::nullopt;
    auto wit = old_dep.wirings.find({old_bean, ref.name});
    if (wit == old_dep.wirings.end()) return std::nullopt;
    WiringTarget target = wit->second;
    if (target.deployment == old_dep_id) {
        auto cit = old_to_new.find(target.bean);
        if (cit == old_to_new.end()) return std::nullopt;
        target.deployment = new_dep_id;
        target.bean = cit->second;
    }
    return target;
}

// Evaluates the module-replacement restrictions for swapping the module of
// `old_dep` with `new_type`, against the container's current clients.
inline CompatReport check_compatibility(const Container& rt, const std::string& old_dep,
                                        const ModuleType& new_type) {
    CompatReport report;
    report.old_deployment = old_dep;
    report.new_module = new_type.name;
    const ModuleType& old_type = *rt.deployment(old_dep).type;
    report.client_referenced = client_referenced_interfaces(rt, old_dep);

    // R1: every client-referenced interface must exist in the new module with
    // the same contract.
    for (const auto& iface : report.client_referenced) {
        bool found = false, name_found = false;
        for (const auto& nb : new_type.beans)
            for (const auto& p : nb.provides) {
                if (p.name != iface.name) continue;
                name_found = true;
                if (p.contract == iface.contract) found = true;
            }
        if (found) {
            report.usable.insert(iface);
        } else {
            report.violations.push_back(
                {"R1", ErrorCode::CompatibilityRejected, to_string(iface),
                 name_found ? "contract changed" : "interface missing from " + new_type.name});
        }
    }

    // R2: interfaces clients rely on must route unambiguously in both
    // versions: exactly one provider each.
    for (const auto& iface : report.usable) {
        auto old_p = old_type.providers_of(iface);
        auto new_p = new_type.providers_of(iface);
        if (old_p.size() != 1)
            report.violations.push_back({"R2", ErrorCode::CompatibilityRejected, to_string(iface),
                                         std::to_string(old_p.size()) + " providers in " +
                                             old_type.name});
        if (new_p.size() != 1)
            report.violations.push_back({"R2", ErrorCode::CompatibilityRejected, to_string(iface),
                                         std::to_string(new_p.size()) + " providers in " +
                                             new_type.name});
    }

    report.counterparts =
        counterpart_map(old_type, new_type, report.usable, &report.violations);

    // R3: beans serving clients must have all their references satisfiable
    // after the swap, following derived wirings transitively through the new
    // module.
    {
        std::set<std::string> agenda;
        for (const auto& iface : report.usable)
            for (const auto& nb : new_type.beans)
                if (nb.provides_interface(iface)) agenda.insert(nb.name);
        std::set<std::string> seen;
        while (!agenda.empty()) {
            std::string bean_name = *agenda.begin();
            agenda.erase(agenda.begin());
            if (!seen.insert(bean_name).second) continue;
            const BeanType* nb = new_type.find_bean(bean_name);
            for (const auto& ref : nb->references) {
                auto target = derive_wiring(rt, old_dep, report.counterparts, bean_name,
                                            ref, "(new)");
                if (!target) {
                    auto fallback = new_type.providers_of(ref.target);
                    if (fallback.size() == 1) {
                        // Satisfiable inside the new module itself.
                        agenda.insert(fallback.front()->name);
                        continue;
                    }
                    report.violations.push_back({"R3", ErrorCode::CompatibilityRejected,
                                                 bean_name + "." + ref.name,
                                                 "no derivable provider for " +
                                                     to_string(ref.target)});
                    continue;
                }
                if (target->deployment == "(new)") {
                    agenda.insert(target->bean);
                } else {
                    auto dit = rt.deployments().find(target->deployment);
                    if (dit == rt.deployments().end() ||
                        dit->second.state == DeploymentState::Undeployed ||
                        !dit->second.type->find_bean(target->bean))
                        report.violations.push_back({"R3", ErrorCode::CompatibilityRejected,
                                                     bean_name + "." + ref.name,
                                                     "derived target " + to_string(*target) +
                                                         " is gone"});
                }
            }
        }
    }

    // R4: each old bean's client-referenced interfaces must be jointly
    // served by a single new bean, so its sessions can follow one target.
    for (const auto& ob : old_type.beans) {
        std::set<InterfaceId> wanted;
        for (const auto& i : ob.provides)
            if (report.usable.count(i)) wanted.insert(i);
        if (wanted.empty()) continue;
        bool any = false;
        for (const auto& nb : new_type.beans)
            if (covers(nb, wanted)) any = true;
        if (!any)
            report.violations.push_back({"R4", ErrorCode::CompatibilityRejected, ob.name,
                                         "no single new bean covers its client-referenced "
                                         "interfaces"});
    }

    // R5: conversational state must be able to continue: stateful beans need a
    // stateful counterpart sharing at least one (name, type)-compatible field.
    for (const auto& ob : old_type.beans) {
        if (ob.kind != BeanKind::Stateful) continue;
        auto cit = report.counterparts.find(ob.name);
        if (cit == report.counterparts.end()) continue;  // reported as counterpart problem
        const BeanType* nb = new_type.find_bean(cit->second);
        if (nb->kind != BeanKind::Stateful) {
            report.violations.push_back({"R5", ErrorCode::CompatibilityRejected, ob.name,
                                         "counterpart " + nb->name + " is stateless"});
            continue;
        }
        std::vector<FieldMatch> plan;
        int copied = 0;
        for (const auto& nf : nb->state_fields) {
            FieldMatch fm;
            fm.field = nf.name;
            fm.new_type = nf.type;
            if (const StateField* of = ob.find_field(nf.name)) {
                fm.old_type = of->type;
                if (of->type == nf.type) {
                    fm.copied = true;
                    ++copied;
                } else {
                    fm.type_conflict = true;
                }
            }
            plan.push_back(fm);
        }
        report.field_plan[ob.name] = std::move(plan);
        if (!ob.state_fields.empty() && copied == 0)
            report.violations.push_back({"R5", ErrorCode::CompatibilityRejected, ob.name,
                                         "no field of counterpart " + nb->name +
                                             " matches by name and type"});
    }

    report.ok = report.violations.empty();
    return report;
}

}  // namespace modswap
