#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modswap/compat.hpp"
#include "modswap/errors.hpp"
#include "modswap/runtime.hpp"
#include "modswap/steps.hpp"
#include "modswap/strategy.hpp"

namespace modswap {

struct ExecutionOptions {
    // Evaluate the module-replacement restrictions before running any step
    // and refuse on violation. Requires the strategy to take a DeploymentId
    // and a ModuleTypeId input.
    bool check_compatibility = true;
};

struct StepRecord {
    StepId id = StepId::a;
    Tick started_at = 0;
    Tick finished_at = 0;
    std::map<std::string, PortValue> outputs;
};

struct ExecutionReport {
    std::string strategy;
    std::string old_deployment;
    std::string new_deployment;
    Tick triggered_at = 0;
    Tick finished_at = 0;
    std::vector<StepRecord> steps;
    std::optional<CompatReport> compat;

    std::string text() const {
        std::string out;
        out += "strategy=" + strategy + "\n";
        out += "old=" + old_deployment + " new=" + new_deployment + "\n";
        out += "triggered=" + std::to_string(triggered_at) +
               " finished=" + std::to_string(finished_at) + "\n";
        for (const auto& s : steps)
            out += "step " + std::string(to_string(s.id)) + " start=" +
                   std::to_string(s.started_at) + " end=" + std::to_string(s.finished_at) + "\n";
        return out;
    }
};

// Runs reconfiguration strategies against a container. The engine validates
// the strategy, optionally enforces module compatibility, then executes the
// steps in declared order, wiring outputs to inputs per the mappings.
class Engine {
public:
    explicit Engine(Container& rt) : rt_(rt), executors_(ExecutorRegistry::with_defaults()) {}

    Engine(Container& rt, ExecutorRegistry executors, TransformRegistry transforms)
        : rt_(rt), executors_(std::move(executors)), transforms_(std::move(transforms)) {}

    ExecutorRegistry& executors() { return executors_; }
    TransformRegistry& transforms() { return transforms_; }

    ExecutionReport execute(const Strategy& strategy,
                            const std::map<std::string, PortValue>& inputs,
                            const ExecutionOptions& options = {}) {
        require_valid(strategy);
        for (const auto& decl : strategy.inputs) {
            auto it = inputs.find(decl.name);
            if (it == inputs.end())
                throw Error(ErrorCode::MissingInput,
                            "strategy input '" + decl.name + "' was not supplied");
            if (kind_of(it->second) != decl.kind)
                throw Error(ErrorCode::KindMismatch,
                            "strategy input '" + decl.name + "' expects " +
                                std::string(to_string(decl.kind)) + ", got " +
                                to_string(kind_of(it->second)));
        }
        for (const auto& [name, value] : inputs)
            if (!strategy.find_input(name))
                throw Error(ErrorCode::MissingInput,
                            "'" + name + "' is not an input of strategy '" + strategy.name + "'");

        ExecutionReport report;
        report.strategy = strategy.name;
        report.triggered_at = rt_.now();

        // Identify the replaced deployment and replacement module when the
        // strategy follows the two-input convention.
        const std::string* old_dep = nullptr;
        const std::string* new_module = nullptr;
        for (const auto& decl : strategy.inputs) {
            const PortValue& v = inputs.at(decl.name);
            if (const auto* d = std::get_if<DeploymentRef>(&v); d && !old_dep) old_dep = &d->id;
            if (const auto* m = std::get_if<ModuleRef>(&v); m && !new_module)
                new_module = &m->name;
        }
        if (old_dep) report.old_deployment = *old_dep;

        if (options.check_compatibility && old_dep && new_module) {
            CompatReport compat =
                check_compatibility(rt_, *old_dep, *rt_.registry().get(*new_module));
            report.compat = compat;
            if (!compat.ok) {
                std::string msg = "module '" + *new_module + "' cannot replace deployment '" +
                                  *old_dep + "':";
                for (const auto& v : compat.violations)
                    msg += "\n  - " + v.restriction + " " + v.subject +
                           (v.detail.empty() ? "" : ": " + v.detail);
                throw Error(ErrorCode::CompatibilityRejected, msg);
            }
        }

        std::map<StepId, std::map<std::string, PortValue>> produced;
        for (const auto& use : strategy.steps) {
            StepRecord record;
            record.id = use.id;
            record.started_at = rt_.now();
            rt_.emit_event(TraceKind::Step, "", 0,
                           "id=" + std::string(to_string(use.id)) + " strategy=" + strategy.name +
                               " status=begin");

            StepContext ctx{rt_, {}, {}, &transforms_};
            const StepSignature& sig = step_signatures().at(use.id);
            for (const auto& [input_name, mapping] : use.bindings) {
                if (mapping.source == Mapping::Source::StrategyInput)
                    ctx.inputs.emplace(input_name, inputs.at(mapping.input));
                else
                    ctx.inputs.emplace(input_name, produced.at(mapping.step).at(mapping.output));
            }
            if (const PortDecl* cfg = sig.find_input("config"); cfg && ctx.has("config"))
                ctx.config = ctx.get<ConfigMap>("config");
            for (const auto& [k, v] : use.literal_config) ctx.config[k] = v;

            std::map<std::string, PortValue> outputs;
            try {
                outputs = executors_.get(use.id)(ctx);
            } catch (const Error& e) {
                rt_.emit_event(TraceKind::Step, "", 0,
                               "id=" + std::string(to_string(use.id)) + " strategy=" +
                                   strategy.name + " status=error code=" + to_string(e.code()));
                throw;
            }
            for (const auto& decl : sig.outputs) {
                auto oit = outputs.find(decl.name);
                if (oit == outputs.end())
                    throw Error(ErrorCode::ValidationError,
                                "executor for step '" + std::string(to_string(use.id)) +
                                    "' produced no output '" + decl.name + "'");
                if (kind_of(oit->second) != decl.kind)
                    throw Error(ErrorCode::KindMismatch,
                                "executor for step '" + std::string(to_string(use.id)) +
                                    "' produced output '" + decl.name + "' of kind " +
                                    to_string(kind_of(oit->second)) + ", declared " +
                                    to_string(decl.kind));
            }
            record.finished_at = rt_.now();
            record.outputs = outputs;
            rt_.emit_event(TraceKind::Step, "", 0,
                           "id=" + std::string(to_string(use.id)) + " strategy=" + strategy.name +
                               " status=ok");
            if (use.id == StepId::a) {
                if (const auto* d = std::get_if<DeploymentRef>(&outputs.at("newDeployment")))
                    report.new_deployment = d->id;
            }
            produced[use.id] = std::move(outputs);
            report.steps.push_back(std::move(record));
        }
        report.finished_at = rt_.now();
        return report;
    }

private:
    Container& rt_;
    ExecutorRegistry executors_;
    TransformRegistry transforms_;
};

}  // namespace modswap
