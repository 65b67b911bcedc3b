#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "modswap/errors.hpp"
#include "modswap/steps.hpp"

namespace modswap {

// ==== strategy model ========================================================

struct Mapping {
    enum class Source { StrategyInput, StepOutput };
    Source source = Source::StrategyInput;
    std::string input;  // strategy input name, when source is StrategyInput
    StepId step = StepId::a;
    std::string output;  // producing port, when source is StepOutput

    static Mapping from_input(std::string name) {
        Mapping m;
        m.source = Source::StrategyInput;
        m.input = std::move(name);
        return m;
    }
    static Mapping from_step(StepId step, std::string output) {
        Mapping m;
        m.source = Source::StepOutput;
        m.step = step;
        m.output = std::move(output);
        return m;
    }

    friend bool operator==(const Mapping&, const Mapping&) = default;
};

struct StepUse {
    StepId id = StepId::a;
    std::map<std::string, Mapping> bindings;  // step input name -> source
    ConfigMap literal_config;                 // static settings for this use

    friend bool operator==(const StepUse&, const StepUse&) = default;
};

struct StrategyInput {
    std::string name;
    PortKind kind = PortKind::DeploymentId;

    friend bool operator==(const StrategyInput&, const StrategyInput&) = default;
};

struct Strategy {
    std::string name;
    std::vector<StrategyInput> inputs;
    std::vector<StepUse> steps;  // declared execution order

    const StrategyInput* find_input(const std::string& n) const {
        for (const auto& i : inputs)
            if (i.name == n) return &i;
        return nullptr;
    }

    const StepUse* find_step(StepId id) const {
        for (const auto& s : steps)
            if (s.id == id) return &s;
        return nullptr;
    }

    std::vector<StepId> order() const {
        std::vector<StepId> out;
        for (const auto& s : steps) out.push_back(s.id);
        return out;
    }

    friend bool operator==(const Strategy&, const Strategy&) = default;
};

// ==== validation ============================================================

struct StrategyValidation {
    bool ok = false;
    std::vector<std::string> problems;
    // Ordering constraints actually in force: hard requirements between
    // present steps plus data-flow edges from the mappings.
    std::set<std::pair<StepId, StepId>> edges;
};

// A strategy is valid when: each step appears at most once; every mapping
// resolves to a declared strategy input or an output of another used step
// with the right port kind; every non-optional input is bound; and the
// declared order respects every ordering constraint (which also rules out
// cycles).
inline StrategyValidation validate_strategy(const Strategy& strategy) {
    StrategyValidation result;
    auto& problems = result.problems;
    const auto& sigs = step_signatures();

    std::map<StepId, std::size_t> position;
    for (std::size_t idx = 0; idx < strategy.steps.size(); ++idx) {
        StepId id = strategy.steps[idx].id;
        if (position.count(id))
            problems.push_back("step '" + std::string(to_string(id)) + "' appears more than once");
        else
            position[id] = idx;
    }
    if (strategy.steps.empty()) problems.push_back("strategy has no steps");

    for (const auto& use : strategy.steps) {
        const StepSignature& sig = sigs.at(use.id);
        const std::string label = "step '" + std::string(to_string(use.id)) + "'";

        for (const auto& [input_name, mapping] : use.bindings) {
            const PortDecl* port = sig.find_input(input_name);
            if (!port) {
                problems.push_back(label + " has no input '" + input_name + "'");
                continue;
            }
            if (mapping.source == Mapping::Source::StrategyInput) {
                const StrategyInput* si = strategy.find_input(mapping.input);
                if (!si) {
                    problems.push_back(label + " input '" + input_name +
                                       "' maps to undeclared strategy input '" + mapping.input +
                                       "'");
                } else if (si->kind != port->kind) {
                    problems.push_back(label + " input '" + input_name + "' expects " +
                                       to_string(port->kind) + " but strategy input '" +
                                       mapping.input + "' is " + to_string(si->kind));
                }
                continue;
            }
            const StepUse* producer = strategy.find_step(mapping.step);
            if (!producer) {
                problems.push_back(label + " input '" + input_name + "' maps to absent step '" +
                                   std::string(to_string(mapping.step)) + "'");
                continue;
            }
            const PortDecl* out = sigs.at(mapping.step).find_output(mapping.output);
            if (!out) {
                problems.push_back(label + " input '" + input_name + "' maps to '" +
                                   std::string(to_string(mapping.step)) + "." + mapping.output +
                                   "', which is not an output of that step");
                continue;
            }
            if (out->kind != port->kind) {
                problems.push_back(label + " input '" + input_name + "' expects " +
                                   to_string(port->kind) + " but '" +
                                   std::string(to_string(mapping.step)) + "." + mapping.output +
                                   "' is " + to_string(out->kind));
                continue;
            }
            if (mapping.step == use.id) {
                problems.push_back(label + " feeds itself through input '" + input_name + "'");
                continue;
            }
            result.edges.insert({mapping.step, use.id});
        }

        for (const auto& port : sig.inputs) {
            if (port.optional || use.bindings.count(port.name)) continue;
            problems.push_back(label + " is missing required input '" + port.name + "'");
        }
    }

    const auto& table = dependency_table();
    for (const auto& use : strategy.steps)
        for (StepId before : table.at(use.id))
            if (position.count(before)) result.edges.insert({before, use.id});

    for (const auto& [before, after] : result.edges) {
        auto bit = position.find(before);
        auto ait = position.find(after);
        if (bit == position.end() || ait == position.end()) continue;  // reported above
        if (bit->second >= ait->second)
            problems.push_back("declared order places '" + std::string(to_string(after)) +
                               "' before its prerequisite '" + std::string(to_string(before)) +
                               "'");
    }

    result.ok = problems.empty();
    return result;
}

inline void require_valid(const Strategy& strategy) {
    StrategyValidation v = validate_strategy(strategy);
    if (v.ok) return;
    std::string msg = "strategy '" + strategy.name + "' is invalid:";
    for (const auto& p : v.problems) msg += "\n  - " + p;
    throw Error(ErrorCode::InvalidStrategy, msg);
}

// ==== builtin strategies ====================================================

enum class BuiltinStrategy { Flash, NonInterrupt, Interrupt, InterruptNonInterrupt };

inline const char* to_string(BuiltinStrategy s) {
    switch (s) {
    case BuiltinStrategy::Flash: return "F";
    case BuiltinStrategy::NonInterrupt: return "NI";
    case BuiltinStrategy::Interrupt: return "I";
    default: return "INI";
    }
}

inline std::optional<BuiltinStrategy> parse_builtin_strategy(const std::string& text) {
    if (text == "F" || text == "flash") return BuiltinStrategy::Flash;
    if (text == "NI" || text == "noninterrupt") return BuiltinStrategy::NonInterrupt;
    if (text == "I" || text == "interrupt") return BuiltinStrategy::Interrupt;
    if (text == "INI" || text == "interrupt-noninterrupt")
        return BuiltinStrategy::InterruptNonInterrupt;
    return std::nullopt;
}

// Every builtin takes exactly two inputs: the deployment being replaced and
// the module type replacing it.
inline constexpr const char* kReplacedInput = "replaced";
inline constexpr const char* kReplacementInput = "replacement";

namespace detail {

inline StepUse use(StepId id, std::map<std::string, Mapping> bindings, ConfigMap config = {}) {
    StepUse u;
    u.id = id;
    u.bindings = std::move(bindings);
    u.literal_config = std::move(config);
    return u;
}

inline Mapping in_replaced() { return Mapping::from_input(kReplacedInput); }
inline Mapping in_replacement() { return Mapping::from_input(kReplacementInput); }

}  // namespace detail

inline Strategy builtin_strategy(BuiltinStrategy which) {
    using S = StepId;
    using detail::in_replaced;
    using detail::in_replacement;
    using detail::use;
    auto out = Mapping::from_step;

    Strategy st;
    st.name = to_string(which);
    st.inputs = {{kReplacedInput, PortKind::DeploymentId},
                 {kReplacementInput, PortKind::ModuleTypeId}};

    switch (which) {
    case BuiltinStrategy::Flash:
        st.steps = {
            use(S::a, {{"old", in_replaced()}, {"module", in_replacement()}}),
            use(S::i, {{"deployment", out(S::a, "newDeployment")}}),
            use(S::l, {{"old", in_replaced()}, {"target", out(S::i, "started")}}),
            use(S::o, {{"old", in_replaced()}, {"rewired", out(S::l, "rewired")}},
                {{"force", "true"}}),
        };
        break;

    case BuiltinStrategy::NonInterrupt:
        st.steps = {
            use(S::a, {{"old", in_replaced()}, {"module", in_replacement()}}),
            use(S::i, {{"deployment", out(S::a, "newDeployment")}}),
            use(S::l, {{"old", in_replaced()}, {"target", out(S::i, "started")}}),
            use(S::m, {{"old", in_replaced()}, {"target", out(S::i, "started")}},
                {{"mode", "noninterrupt"}}),
            use(S::o,
                {{"old", in_replaced()},
                 {"rewired", out(S::l, "rewired")},
                 {"rebound", out(S::m, "rebound")}}),
        };
        break;

    case BuiltinStrategy::Interrupt:
        st.steps = {
            use(S::a, {{"old", in_replaced()}, {"module", in_replacement()}}),
            use(S::b, {{"old", in_replaced()}}),
            use(S::c, {{"region", out(S::b, "region")}}),
            use(S::d, {{"region", out(S::b, "region")}}),
            use(S::e, {{"region", out(S::b, "region")}, {"initiated", out(S::d, "initiated")}}),
            use(S::f,
                {{"region", out(S::b, "region")},
                 {"tracking", out(S::c, "tracking")},
                 {"quiescent", out(S::e, "quiescentAt")}}),
            use(S::g,
                {{"old", in_replaced()},
                 {"quiescent", out(S::e, "quiescentAt")},
                 {"bundle", out(S::f, "bundle")}}),
            use(S::h, {{"snapshot", out(S::g, "snapshot")}}),
            use(S::i, {{"deployment", out(S::a, "newDeployment")}}),
            use(S::j,
                {{"bundle", out(S::f, "bundle")},
                 {"target", out(S::i, "started")},
                 {"transformed", out(S::h, "transformed")}}),
            use(S::k, {{"instances", out(S::j, "instances")}}),
            use(S::l,
                {{"old", in_replaced()},
                 {"target", out(S::i, "started")},
                 {"transformed", out(S::h, "transformed")}}),
            use(S::m,
                {{"old", in_replaced()},
                 {"target", out(S::i, "started")},
                 {"transformed", out(S::h, "transformed")}},
                {{"mode", "interrupt"}}),
            use(S::n,
                {{"region", out(S::b, "region")},
                 {"initiated", out(S::d, "initiated")},
                 {"rewired", out(S::l, "rewired")},
                 {"transformed", out(S::h, "transformed")},
                 {"rebinds", out(S::k, "rebinds")},
                 {"rebound", out(S::m, "rebound")}}),
            use(S::o,
                {{"old", in_replaced()},
                 {"rewired", out(S::l, "rewired")},
                 {"snapshot", out(S::g, "snapshot")},
                 {"rebinds", out(S::k, "rebinds")},
                 {"rebound", out(S::m, "rebound")}}),
        };
        break;

    case BuiltinStrategy::InterruptNonInterrupt:
        // The replacement goes live (and takes over new lookups) before the
        // region quiesces, so only sessions already on the old deployment
        // ever wait. Both versions share one datastore.
        st.steps = {
            use(S::a, {{"old", in_replaced()}, {"module", in_replacement()}},
                {{"aliasDatastore", "true"}}),
            use(S::b, {{"old", in_replaced()}}),
            use(S::c, {{"region", out(S::b, "region")}}),
            use(S::i, {{"deployment", out(S::a, "newDeployment")}}),
            use(S::l, {{"old", in_replaced()}, {"target", out(S::i, "started")}}),
            use(S::d, {{"region", out(S::b, "region")}}),
            use(S::e, {{"region", out(S::b, "region")}, {"initiated", out(S::d, "initiated")}}),
            use(S::f,
                {{"region", out(S::b, "region")},
                 {"tracking", out(S::c, "tracking")},
                 {"quiescent", out(S::e, "quiescentAt")}}),
            use(S::j, {{"bundle", out(S::f, "bundle")}, {"target", out(S::i, "started")}}),
            use(S::k, {{"instances", out(S::j, "instances")}}),
            use(S::m, {{"old", in_replaced()}, {"target", out(S::i, "started")}},
                {{"mode", "interrupt"}}),
            use(S::n,
                {{"region", out(S::b, "region")},
                 {"initiated", out(S::d, "initiated")},
                 {"rewired", out(S::l, "rewired")},
                 {"rebinds", out(S::k, "rebinds")},
                 {"rebound", out(S::m, "rebound")}}),
            use(S::o,
                {{"old", in_replaced()},
                 {"rewired", out(S::l, "rewired")},
                 {"rebinds", out(S::k, "rebinds")},
                 {"rebound", out(S::m, "rebound")}}),
        };
        break;
    }
    return st;
}

// ==== textual form ==========================================================

// Line-oriented format:
//   strategy <name>
//   input <name> <PortKind>
//   step <id> <input>=$<strategyInput> <input>=<step>.<output> config.<key>=<value> ...
// Blank lines and lines starting with '#' are ignored.
inline Strategy parse_strategy_text(const std::string& text) {
    Strategy st;
    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    bool named = false;
    while (std::getline(stream, line)) {
        ++line_no;
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (!trimmed.empty() && trimmed.back() == '\r') trimmed.pop_back();
        trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
        if (trimmed.empty() || trimmed[0] == '#') continue;

        std::istringstream words(trimmed);
        std::string word;
        words >> word;
        auto fail = [&](const std::string& why) -> Error {
            return Error(ErrorCode::ParseError,
                         "strategy line " + std::to_string(line_no) + ": " + why);
        };

        if (word == "strategy") {
            if (!(words >> st.name)) throw fail("expected a name");
            named = true;
            continue;
        }
        if (word == "input") {
            StrategyInput input;
            std::string kind;
            if (!(words >> input.name >> kind)) throw fail("expected '<name> <kind>'");
            bool known = false;
            for (int k = 0; k <= static_cast<int>(PortKind::TickStamp); ++k)
                if (kind == to_string(static_cast<PortKind>(k))) {
                    input.kind = static_cast<PortKind>(k);
                    known = true;
                }
            if (!known) throw fail("unknown port kind '" + kind + "'");
            st.inputs.push_back(std::move(input));
            continue;
        }
        if (word == "step") {
            std::string id_text;
            if (!(words >> id_text)) throw fail("expected a step id");
            auto id = parse_step_id(id_text);
            if (!id) throw fail("unknown step '" + id_text + "'");
            StepUse use;
            use.id = *id;
            while (words >> word) {
                auto eq = word.find('=');
                if (eq == std::string::npos) throw fail("expected key=value, got '" + word + "'");
                std::string key = word.substr(0, eq);
                std::string value = word.substr(eq + 1);
                if (key.rfind("config.", 0) == 0) {
                    use.literal_config[key.substr(7)] = value;
                    continue;
                }
                if (!value.empty() && value[0] == '$') {
                    use.bindings[key] = Mapping::from_input(value.substr(1));
                    continue;
                }
                auto dot = value.find('.');
                if (dot == std::string::npos)
                    throw fail("binding '" + word + "' must be $input or step.output");
                auto src = parse_step_id(value.substr(0, dot));
                if (!src) throw fail("unknown producing step in '" + word + "'");
                use.bindings[key] = Mapping::from_step(*src, value.substr(dot + 1));
            }
            st.steps.push_back(std::move(use));
            continue;
        }
        throw fail("unknown directive '" + word + "'");
    }
    if (!named) throw Error(ErrorCode::ParseError, "strategy text has no 'strategy <name>' line");
    return st;
}

inline std::string format_strategy(const Strategy& st) {
    std::string out = "strategy " + st.name + "\n";
    for (const auto& i : st.inputs)
        out += "input " + i.name + " " + to_string(i.kind) + "\n";
    for (const auto& use : st.steps) {
        out += "step " + std::string(to_string(use.id));
        for (const auto& [name, m] : use.bindings) {
            out += " " + name + "=";
            if (m.source == Mapping::Source::StrategyInput)
                out += "$" + m.input;
            else
                out += std::string(to_string(m.step)) + "." + m.output;
        }
        for (const auto& [k, v] : use.literal_config) out += " config." + k + "=" + v;
        out += "\n";
    }
    return out;
}

}  // namespace modswap
