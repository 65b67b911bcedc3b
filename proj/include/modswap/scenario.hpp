#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "modswap/errors.hpp"
#include "modswap/model.hpp"
#include "modswap/runtime.hpp"
#include "modswap/strategy.hpp"
#include "modswap/value.hpp"

namespace modswap {

// ==== scenario model ========================================================

struct DeploySpec {
    std::string id;
    std::string module;
    std::map<std::string, std::map<std::string, Value>> env;
    std::vector<Wire> wires;

    friend bool operator==(const DeploySpec&, const DeploySpec&) = default;
};

struct TimedAction {
    Tick tick = 0;
    WorkloadStep action;

    friend bool operator==(const TimedAction&, const TimedAction&) = default;
};

struct StrategyChoice {
    enum class Kind { Builtin, File };
    Kind kind = Kind::Builtin;
    BuiltinStrategy builtin = BuiltinStrategy::Interrupt;
    std::string file;  // resolved relative to the scenario file

    friend bool operator==(const StrategyChoice&, const StrategyChoice&) = default;
};

// A self-contained experiment: module definitions, initial deployments, one
// replacement to perform, a trigger tick, and a timed client workload.
struct ScenarioSpec {
    std::string name;
    std::uint64_t seed = 1;
    std::vector<ModuleType> modules;
    std::vector<DeploySpec> deployments;
    std::string replace_deployment;
    std::string replacement_module;
    StrategyChoice strategy;
    Tick trigger = 0;
    std::vector<TimedAction> workload;

    friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

// ==== parsing ===============================================================

namespace scenario_detail {

inline std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream stream(line);
    std::string word;
    while (stream >> word) out.push_back(word);
    return out;
}

inline std::pair<std::string, std::string> split_kv(const std::string& token, int line_no) {
    auto eq = token.find('=');
    if (eq == std::string::npos)
        throw Error(ErrorCode::ParseError, "scenario line " + std::to_string(line_no) +
                                               ": expected key=value, got '" + token + "'");
    return {token.substr(0, eq), token.substr(eq + 1)};
}

inline std::pair<std::string, std::string> split_dot(const std::string& text, int line_no) {
    auto dot = text.find('.');
    if (dot == std::string::npos)
        throw Error(ErrorCode::ParseError, "scenario line " + std::to_string(line_no) +
                                               ": expected a.b, got '" + text + "'");
    return {text.substr(0, dot), text.substr(dot + 1)};
}

inline ValueType parse_type_or_throw(const std::string& text, int line_no) {
    auto t = parse_value_type(text);
    if (!t)
        throw Error(ErrorCode::ParseError, "scenario line " + std::to_string(line_no) +
                                               ": unknown type '" + text + "'");
    return *t;
}

inline Tick parse_tick(const std::string& text, int line_no) {
    try {
        return std::stoll(text);
    } catch (...) {
        throw Error(ErrorCode::ParseError,
                    "scenario line " + std::to_string(line_no) + ": bad tick '" + text + "'");
    }
}

// Applies one option token to a call spec; returns false if unrecognized.
inline bool apply_call_option(CallSpec& spec, const std::string& key, const std::string& value,
                              int line_no) {
    if (key == "dur") {
        spec.duration = parse_tick(value, line_no);
        if (spec.duration < 1)
            throw Error(ErrorCode::ParseError,
                        "scenario line " + std::to_string(line_no) + ": dur must be >= 1");
        return true;
    }
    if (key == "op") {
        spec.op = value;
        return true;
    }
    return false;
}

inline StateEffect parse_effect(const std::string& token, int line_no) {
    StateEffect e;
    auto plus = token.find("+=");
    if (plus != std::string::npos) {
        e.field = token.substr(0, plus);
        e.op = StateEffect::Op::Add;
        try {
            e.value = static_cast<std::int64_t>(std::stoll(token.substr(plus + 2)));
        } catch (...) {
            throw Error(ErrorCode::ParseError, "scenario line " + std::to_string(line_no) +
                                                   ": '+=' needs an integer in '" + token + "'");
        }
        return e;
    }
    auto [field, literal] = split_kv(token, line_no);
    e.field = field;
    e.op = StateEffect::Op::Assign;
    e.value = parse_literal(literal);
    return e;
}

}  // namespace scenario_detail

// Line-oriented scenario format; indentation is significant only for `child`
// lines, which nest under the preceding invoke (two spaces per level by
// convention, any increase works). '#' starts a comment line.
inline ScenarioSpec parse_scenario_text(const std::string& text) {
    using namespace scenario_detail;
    ScenarioSpec spec;
    bool named = false;

    ModuleType* module = nullptr;
    BeanType* bean = nullptr;
    DeploySpec* deploy = nullptr;
    // Stack of (indent, spec) for nested call parsing; bottom is the invoke.
    std::vector<std::pair<int, CallSpec*>> child_stack;

    std::istringstream stream(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(stream, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        int indent = 0;
        while (indent < static_cast<int>(raw.size()) && raw[indent] == ' ') ++indent;
        std::string line = raw.substr(indent);
        if (line.empty() || line[0] == '#') continue;
        auto tokens = tokenize(line);
        const std::string& head = tokens[0];
        auto fail = [&](const std::string& why) -> Error {
            return Error(ErrorCode::ParseError,
                         "scenario line " + std::to_string(line_no) + ": " + why);
        };

        auto leave_blocks = [&] {
            module = nullptr;
            bean = nullptr;
            deploy = nullptr;
        };
        auto parse_call_body = [&](CallSpec& cs, std::size_t start) {
            for (std::size_t t = start; t < tokens.size(); ++t) {
                const std::string& tok = tokens[t];
                if (tok == "effect") {
                    if (++t >= tokens.size()) throw fail("'effect' needs a field expression");
                    cs.effects.push_back(parse_effect(tokens[t], line_no));
                    continue;
                }
                if (tok == "put") {
                    if (++t >= tokens.size()) throw fail("'put' needs key=value");
                    auto [k, v] = split_kv(tokens[t], line_no);
                    cs.db_ops.push_back({DbOp::Op::Put, k, v});
                    continue;
                }
                if (tok == "get") {
                    if (++t >= tokens.size()) throw fail("'get' needs a key");
                    cs.db_ops.push_back({DbOp::Op::Get, tokens[t], ""});
                    continue;
                }
                auto [k, v] = split_kv(tok, line_no);
                if (!apply_call_option(cs, k, v, line_no))
                    throw fail("unknown call option '" + k + "'");
            }
        };

        if (head == "child") {
            if (child_stack.empty()) throw fail("'child' without a preceding invoke");
            while (child_stack.size() > 1 && child_stack.back().first >= indent)
                child_stack.pop_back();
            if (indent <= child_stack.front().first)
                throw fail("'child' must be indented under its invoke");
            NestedCall nested;
            bool have_via = false;
            std::size_t t = 1;
            CallSpec& cs = nested.spec;
            for (; t < tokens.size(); ++t) {
                auto [k, v] = split_kv(tokens[t], line_no);
                if (k == "at") {
                    nested.at = parse_tick(v, line_no);
                } else if (k == "via") {
                    nested.via = v;
                    have_via = true;
                } else {
                    break;
                }
            }
            if (!have_via) throw fail("'child' needs via=<reference>");
            // Remaining tokens are ordinary call options.
            {
                std::vector<std::string> tail(tokens.begin() + static_cast<std::ptrdiff_t>(t),
                                              tokens.end());
                std::vector<std::string> rebuilt = {"child"};
                rebuilt.insert(rebuilt.end(), tail.begin(), tail.end());
                tokens = rebuilt;
                parse_call_body(cs, 1);
            }
            CallSpec* parent = child_stack.back().second;
            parent->children.push_back(std::move(nested));
            child_stack.emplace_back(indent, &parent->children.back().spec);
            continue;
        }
        child_stack.clear();

        if (head == "scenario") {
            if (tokens.size() != 2) throw fail("usage: scenario <name>");
            spec.name = tokens[1];
            named = true;
            leave_blocks();
            continue;
        }
        if (head == "seed") {
            if (tokens.size() != 2) throw fail("usage: seed <n>");
            spec.seed = static_cast<std::uint64_t>(parse_tick(tokens[1], line_no));
            leave_blocks();
            continue;
        }
        if (head == "module") {
            if (tokens.size() != 2) throw fail("usage: module <name>");
            spec.modules.push_back(ModuleType{tokens[1], "1", {}});
            module = &spec.modules.back();
            bean = nullptr;
            deploy = nullptr;
            continue;
        }
        if (head == "bean") {
            if (!module) throw fail("'bean' outside a module block");
            if (tokens.size() != 3 || (tokens[2] != "stateful" && tokens[2] != "stateless"))
                throw fail("usage: bean <name> stateful|stateless");
            BeanType b;
            b.name = tokens[1];
            b.kind = tokens[2] == "stateful" ? BeanKind::Stateful : BeanKind::Stateless;
            module->beans.push_back(std::move(b));
            bean = &module->beans.back();
            continue;
        }
        if (head == "provides") {
            if (!bean) throw fail("'provides' outside a bean block");
            if (tokens.size() != 3) throw fail("usage: provides <iface> contract=<c>");
            auto [k, v] = split_kv(tokens[2], line_no);
            if (k != "contract") throw fail("usage: provides <iface> contract=<c>");
            bean->provides.push_back({tokens[1], v});
            continue;
        }
        if (head == "reference") {
            if (!bean) throw fail("'reference' outside a bean block");
            if (tokens.size() != 4) throw fail("usage: reference <name> <iface> contract=<c>");
            auto [k, v] = split_kv(tokens[3], line_no);
            if (k != "contract") throw fail("usage: reference <name> <iface> contract=<c>");
            bean->references.push_back({tokens[1], {tokens[2], v}});
            continue;
        }
        if (head == "env" && bean) {
            if (tokens.size() < 3) throw fail("usage: env <name> <type> [default=<v>]");
            EnvEntry entry;
            entry.name = tokens[1];
            entry.type = parse_type_or_throw(tokens[2], line_no);
            entry.default_value = default_value(entry.type);
            if (tokens.size() == 4) {
                auto [k, v] = split_kv(tokens[3], line_no);
                if (k != "default") throw fail("usage: env <name> <type> [default=<v>]");
                auto parsed = parse_value(entry.type, v);
                if (!parsed) throw fail("default '" + v + "' is not a " + to_string(entry.type));
                entry.default_value = *parsed;
            }
            bean->env_entries.push_back(std::move(entry));
            continue;
        }
        if (head == "state") {
            if (!bean) throw fail("'state' outside a bean block");
            if (tokens.size() != 3) throw fail("usage: state <name> <type>");
            bean->state_fields.push_back({tokens[1], parse_type_or_throw(tokens[2], line_no)});
            continue;
        }
        if (head == "deploy") {
            if (tokens.size() != 3) throw fail("usage: deploy <id> <module>");
            spec.deployments.push_back(DeploySpec{tokens[1], tokens[2], {}, {}});
            deploy = &spec.deployments.back();
            module = nullptr;
            bean = nullptr;
            continue;
        }
        if (head == "env" && deploy) {
            if (tokens.size() != 2) throw fail("usage: env <bean>.<entry>=<literal>");
            auto [path, literal] = split_kv(tokens[1], line_no);
            auto [bean_name, entry] = split_dot(path, line_no);
            deploy->env[bean_name][entry] = parse_literal(literal);
            continue;
        }
        if (head == "wire") {
            if (!deploy) throw fail("'wire' outside a deploy block");
            if (tokens.size() != 2) throw fail("usage: wire <bean>.<ref>=<dep>.<bean>");
            auto [path, target] = split_kv(tokens[1], line_no);
            auto [bean_name, ref] = split_dot(path, line_no);
            auto [tdep, tbean] = split_dot(target, line_no);
            // Interface resolves from the reference declaration at deploy time.
            deploy->wires.push_back({bean_name, ref, {tdep, tbean, {}}});
            continue;
        }
        if (head == "replace") {
            if (tokens.size() != 3) throw fail("usage: replace <deployment> <module>");
            spec.replace_deployment = tokens[1];
            spec.replacement_module = tokens[2];
            leave_blocks();
            continue;
        }
        if (head == "strategy") {
            if (tokens.size() != 2) throw fail("usage: strategy F|NI|I|INI or strategy file=<p>");
            if (tokens[1].rfind("file=", 0) == 0) {
                spec.strategy.kind = StrategyChoice::Kind::File;
                spec.strategy.file = tokens[1].substr(5);
            } else {
                auto b = parse_builtin_strategy(tokens[1]);
                if (!b) throw fail("unknown strategy '" + tokens[1] + "'");
                spec.strategy.kind = StrategyChoice::Kind::Builtin;
                spec.strategy.builtin = *b;
            }
            leave_blocks();
            continue;
        }
        if (head == "trigger") {
            if (tokens.size() != 2) throw fail("usage: trigger <tick>");
            spec.trigger = parse_tick(tokens[1], line_no);
            leave_blocks();
            continue;
        }
        if (head == "at") {
            leave_blocks();
            if (tokens.size() < 3) throw fail("usage: at <tick> open|invoke|close ...");
            Tick tick = parse_tick(tokens[1], line_no);
            const std::string& verb = tokens[2];
            if (verb == "open") {
                if (tokens.size() < 4) throw fail("usage: at <tick> open <session> ...");
                OpenAction a;
                a.session = tokens[3];
                for (std::size_t t = 4; t < tokens.size(); ++t) {
                    auto [k, v] = split_kv(tokens[t], line_no);
                    if (k == "client") {
                        a.client = v;
                    } else if (k == "target") {
                        auto [d, b] = split_dot(v, line_no);
                        a.deployment = d;
                        a.bean = b;
                        a.via_reference = false;
                    } else if (k == "iface") {
                        a.interface_or_reference = v;
                    } else if (k == "via") {
                        // dep.bean.ref: resolve through that wired reference
                        auto first = v.find('.');
                        auto last = v.rfind('.');
                        if (first == std::string::npos || first == last)
                            throw fail("via needs dep.bean.ref");
                        a.deployment = v.substr(0, first);
                        a.bean = v.substr(first + 1, last - first - 1);
                        a.interface_or_reference = v.substr(last + 1);
                        a.via_reference = true;
                    } else if (k == "handle") {
                        a.handle = v;
                    } else {
                        throw fail("unknown open option '" + k + "'");
                    }
                }
                if (a.deployment.empty()) throw fail("open needs target= or via=");
                if (!a.via_reference && a.interface_or_reference.empty())
                    throw fail("open needs iface=");
                spec.workload.push_back({tick, a});
                continue;
            }
            if (verb == "invoke") {
                if (tokens.size() < 4) throw fail("usage: at <tick> invoke <session> ...");
                InvokeAction a;
                a.session = tokens[3];
                // handle= may appear anywhere among the call options
                std::vector<std::string> rest(tokens.begin() + 4, tokens.end());
                std::vector<std::string> body = {"invoke"};
                for (const auto& tok : rest) {
                    auto eq = tok.find('=');
                    if (eq != std::string::npos && tok.substr(0, eq) == "handle") {
                        a.handle = tok.substr(eq + 1);
                        continue;
                    }
                    body.push_back(tok);
                }
                tokens = body;
                {
                    CallSpec& cs = a.spec;
                    for (std::size_t u = 1; u < tokens.size(); ++u) {
                        const std::string& tok = tokens[u];
                        if (tok == "effect") {
                            if (++u >= tokens.size())
                                throw fail("'effect' needs a field expression");
                            cs.effects.push_back(parse_effect(tokens[u], line_no));
                            continue;
                        }
                        if (tok == "put") {
                            if (++u >= tokens.size()) throw fail("'put' needs key=value");
                            auto [k, v] = split_kv(tokens[u], line_no);
                            cs.db_ops.push_back({DbOp::Op::Put, k, v});
                            continue;
                        }
                        if (tok == "get") {
                            if (++u >= tokens.size()) throw fail("'get' needs a key");
                            cs.db_ops.push_back({DbOp::Op::Get, tokens[u], ""});
                            continue;
                        }
                        auto [k, v] = split_kv(tok, line_no);
                        if (!apply_call_option(cs, k, v, line_no))
                            throw fail("unknown call option '" + k + "'");
                    }
                }
                spec.workload.push_back({tick, a});
                child_stack.emplace_back(
                    indent, &std::get<InvokeAction>(spec.workload.back().action).spec);
                continue;
            }
            if (verb == "close") {
                if (tokens.size() != 4) throw fail("usage: at <tick> close <session>");
                spec.workload.push_back({tick, CloseAction{tokens[3]}});
                continue;
            }
            throw fail("unknown workload verb '" + verb + "'");
        }
        throw fail("unknown directive '" + head + "'");
    }

    if (!named) throw Error(ErrorCode::ParseError, "scenario text has no 'scenario <name>' line");
    return spec;
}

// ==== serialization =========================================================

namespace scenario_detail {

inline void format_call_options(std::string& out, const CallSpec& cs) {
    out += " dur=" + std::to_string(cs.duration);
    if (cs.op != "op") out += " op=" + cs.op;
    for (const auto& e : cs.effects) {
        if (e.op == StateEffect::Op::Add)
            out += " effect " + e.field + "+=" + to_string(e.value);
        else
            out += " effect " + e.field + "=" + to_literal(e.value);
    }
    for (const auto& d : cs.db_ops) {
        if (d.op == DbOp::Op::Put)
            out += " put " + d.key + "=" + d.value;
        else
            out += " get " + d.key;
    }
}

inline void format_children(std::string& out, const CallSpec& cs, int indent) {
    for (const auto& child : cs.children) {
        out += std::string(static_cast<std::size_t>(indent), ' ') + "child at=" +
               std::to_string(child.at) + " via=" + child.via;
        format_call_options(out, child.spec);
        out += "\n";
        format_children(out, child.spec, indent + 2);
    }
}

}  // namespace scenario_detail

inline std::string format_scenario(const ScenarioSpec& spec) {
    using namespace scenario_detail;
    std::string out = "scenario " + spec.name + "\n";
    out += "seed " + std::to_string(spec.seed) + "\n";
    for (const auto& m : spec.modules) {
        out += "\nmodule " + m.name + "\n";
        for (const auto& b : m.beans) {
            out += "  bean " + b.name + (b.kind == BeanKind::Stateful ? " stateful" : " stateless") +
                   "\n";
            for (const auto& p : b.provides)
                out += "    provides " + p.name + " contract=" + p.contract + "\n";
            for (const auto& r : b.references)
                out += "    reference " + r.name + " " + r.target.name +
                       " contract=" + r.target.contract + "\n";
            for (const auto& e : b.env_entries)
                out += "    env " + e.name + " " + to_string(e.type) +
                       " default=" + to_literal(e.default_value) + "\n";
            for (const auto& f : b.state_fields)
                out += "    state " + f.name + " " + to_string(f.type) + "\n";
        }
    }
    for (const auto& d : spec.deployments) {
        out += "\ndeploy " + d.id + " " + d.module + "\n";
        for (const auto& [bean, entries] : d.env)
            for (const auto& [entry, value] : entries)
                out += "  env " + bean + "." + entry + "=" + to_literal(value) + "\n";
        for (const auto& w : d.wires)
            out += "  wire " + w.bean + "." + w.reference + "=" + w.target.deployment + "." +
                   w.target.bean + "\n";
    }
    out += "\n";
    if (!spec.replace_deployment.empty())
        out += "replace " + spec.replace_deployment + " " + spec.replacement_module + "\n";
    if (spec.strategy.kind == StrategyChoice::Kind::File)
        out += "strategy file=" + spec.strategy.file + "\n";
    else
        out += "strategy " + std::string(to_string(spec.strategy.builtin)) + "\n";
    out += "trigger " + std::to_string(spec.trigger) + "\n\n";
    for (const auto& item : spec.workload) {
        out += "at " + std::to_string(item.tick) + " ";
        if (const auto* open = std::get_if<OpenAction>(&item.action)) {
            out += "open " + open->session + " client=" + open->client;
            if (open->via_reference)
                out += " via=" + open->deployment + "." + open->bean + "." +
                       open->interface_or_reference;
            else
                out += " target=" + open->deployment + "." + open->bean +
                       " iface=" + open->interface_or_reference;
            if (open->handle != "main") out += " handle=" + open->handle;
            out += "\n";
        } else if (const auto* inv = std::get_if<InvokeAction>(&item.action)) {
            out += "invoke " + inv->session;
            if (inv->handle != "main") out += " handle=" + inv->handle;
            format_call_options(out, inv->spec);
            out += "\n";
            format_children(out, inv->spec, 2);
        } else {
            out += "close " + std::get<CloseAction>(item.action).session + "\n";
        }
    }
    return out;
}

}  // namespace modswap
