#pragma once

#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "modswap/engine.hpp"
#include "modswap/errors.hpp"
#include "modswap/metrics.hpp"
#include "modswap/runtime.hpp"
#include "modswap/scenario.hpp"
#include "modswap/strategy.hpp"

namespace modswap {

struct RunOverrides {
    std::optional<std::string> strategy;  // builtin tag, replaces the scenario's choice
    std::optional<std::uint64_t> seed;
    bool admission_enabled = true;
    // Base directory for resolving `strategy file=` references.
    std::string scenario_dir = ".";
};

struct RunResult {
    std::string scenario;
    std::string strategy;
    std::uint64_t seed = 1;
    bool ok = false;
    ErrorCode error_code = ErrorCode::ValidationError;
    std::string error;
    RunMetrics metrics;
    std::string trace_text;
    std::string snapshot_text;
    std::string report_text;
    std::string compat_text;
};

inline Strategy load_scenario_strategy(const ScenarioSpec& spec, const RunOverrides& overrides) {
    if (overrides.strategy) {
        auto b = parse_builtin_strategy(*overrides.strategy);
        if (!b)
            throw Error(ErrorCode::ParseError,
                        "unknown strategy override '" + *overrides.strategy + "'");
        return builtin_strategy(*b);
    }
    if (spec.strategy.kind == StrategyChoice::Kind::Builtin)
        return builtin_strategy(spec.strategy.builtin);
    std::filesystem::path path = std::filesystem::path(overrides.scenario_dir) / spec.strategy.file;
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::ParseError, "cannot read strategy file '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_strategy_text(text);
}

// Builds the container a scenario describes: modules registered, deployments
// created, wired (after all exist, so forward references work) and started,
// workload scheduled.
inline void stage_scenario(Container& rt, const ScenarioSpec& spec) {
    for (const auto& m : spec.modules) rt.registry().register_module(m);
    for (const auto& d : spec.deployments) rt.deploy(d.module, d.env, {}, d.id);
    for (const auto& d : spec.deployments)
        for (const auto& w : d.wires) rt.wire(d.id, w.bean, w.reference, w.target);
    for (const auto& d : spec.deployments) rt.start_deployment(d.id);
    for (const auto& item : spec.workload) rt.schedule_action(item.tick, item.action);
}

inline std::map<std::string, PortValue> strategy_inputs_for(const Strategy& strategy,
                                                            const ScenarioSpec& spec) {
    std::map<std::string, PortValue> inputs;
    for (const auto& decl : strategy.inputs) {
        if (decl.kind == PortKind::DeploymentId)
            inputs.emplace(decl.name, DeploymentRef{spec.replace_deployment});
        else if (decl.kind == PortKind::ModuleTypeId)
            inputs.emplace(decl.name, ModuleRef{spec.replacement_module});
        else
            throw Error(ErrorCode::MissingInput,
                        "scenario cannot supply strategy input '" + decl.name + "' of kind " +
                            std::string(to_string(decl.kind)));
    }
    return inputs;
}

inline RunResult run_scenario(const ScenarioSpec& spec, const RunOverrides& overrides = {}) {
    RunResult result;
    result.scenario = spec.name;
    result.seed = overrides.seed.value_or(spec.seed);

    Container rt(result.seed);
    rt.set_admission_enabled(overrides.admission_enabled);
    std::string new_deployment;
    try {
        Strategy strategy = load_scenario_strategy(spec, overrides);
        result.strategy = strategy.name;
        stage_scenario(rt, spec);
        rt.advance_before_control(spec.trigger);
        if (!spec.replace_deployment.empty()) {
            Engine engine(rt);
            ExecutionReport report =
                engine.execute(strategy, strategy_inputs_for(strategy, spec));
            new_deployment = report.new_deployment;
            result.report_text = report.text();
            if (report.compat) result.compat_text = report.compat->text();
        }
        rt.finalize_run();
        result.ok = true;
    } catch (const Error& e) {
        result.ok = false;
        result.error_code = e.code();
        result.error = e.what();
        // A rejected replacement still deserves its report; the gate throws
        // before any step runs, so the container state it judged is intact.
        if (e.code() == ErrorCode::CompatibilityRejected && !spec.replace_deployment.empty()) {
            try {
                result.compat_text =
                    check_compatibility(rt, spec.replace_deployment,
                                        *rt.registry().get(spec.replacement_module))
                        .text();
            } catch (...) {
            }
        }
        try {
            rt.finalize_run();
        } catch (...) {
        }
    } catch (const std::exception& e) {
        result.ok = false;
        result.error_code = ErrorCode::ValidationError;
        result.error = e.what();
    }
    result.metrics = compute_metrics(rt, spec.replace_deployment, new_deployment);
    result.trace_text = rt.trace_text();
    result.snapshot_text = rt.snapshot_text();
    return result;
}

// Runs the same scenario once per strategy, each in its own container on its
// own thread; results come back in argument order.
inline std::vector<RunResult> compare_strategies(const ScenarioSpec& spec,
                                                 const std::vector<std::string>& strategies,
                                                 const RunOverrides& base = {}) {
    std::vector<std::future<RunResult>> futures;
    futures.reserve(strategies.size());
    for (const auto& name : strategies) {
        futures.push_back(std::async(std::launch::async, [&spec, &base, name] {
            RunOverrides o = base;
            o.strategy = name;
            return run_scenario(spec, o);
        }));
    }
    std::vector<RunResult> results;
    results.reserve(futures.size());
    for (auto& f : futures) results.push_back(f.get());
    return results;
}

inline void write_run_artifacts(const std::filesystem::path& dir, const RunResult& result) {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& content) {
        std::ofstream out(dir / name, std::ios::binary);
        out << content;
    };
    put("trace.txt", result.trace_text);
    put("metrics.txt", result.metrics.text());
    put("snapshot.txt", result.snapshot_text);
    std::string report = result.report_text;
    if (!result.ok)
        report += "error=" + std::string(to_string(result.error_code)) + "\n" + result.error + "\n";
    put("report.txt", report);
    if (!result.compat_text.empty()) put("compat.txt", result.compat_text);
}

}  // namespace modswap
