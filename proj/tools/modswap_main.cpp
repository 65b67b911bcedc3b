// Command-line front end: run scenarios, validate strategy files, check
// module compatibility, and compare strategies side by side.
//
// Exit codes: 0 success, 1 execution failure, 2 validation or compatibility
// rejection, 3 parse error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "modswap/modswap.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitExecution = 1;
constexpr int kExitRejected = 2;
constexpr int kExitParse = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw modswap::Error(modswap::ErrorCode::ParseError, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int exit_code_for(modswap::ErrorCode code) {
    using modswap::ErrorCode;
    switch (code) {
    case ErrorCode::ParseError: return kExitParse;
    case ErrorCode::InvalidStrategy:
    case ErrorCode::CompatibilityRejected: return kExitRejected;
    default: return kExitExecution;
    }
}

struct RunArgs {
    std::string scenario_path;
    std::string strategy;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    bool no_admission = false;
    bool print_trace = false;
};

int do_run(const RunArgs& args) {
    modswap::ScenarioSpec spec;
    try {
        spec = modswap::parse_scenario_text(read_file(args.scenario_path));
    } catch (const modswap::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitParse;
    }
    modswap::RunOverrides overrides;
    if (!args.strategy.empty()) overrides.strategy = args.strategy;
    if (args.seed_set) overrides.seed = args.seed;
    overrides.admission_enabled = !args.no_admission;
    overrides.scenario_dir = std::filesystem::path(args.scenario_path).parent_path().string();
    if (overrides.scenario_dir.empty()) overrides.scenario_dir = ".";

    modswap::RunResult result = modswap::run_scenario(spec, overrides);
    std::cout << "scenario=" << result.scenario << " strategy=" << result.strategy
              << " seed=" << result.seed << "\n";
    if (result.ok) {
        std::cout << result.metrics.text();
    } else {
        std::cout << "failed: " << result.error << "\n";
        std::cout << result.metrics.text();
    }
    if (args.print_trace) std::cout << result.trace_text << "\n";
    if (!args.out_dir.empty()) modswap::write_run_artifacts(args.out_dir, result);
    return result.ok ? kExitOk : exit_code_for(result.error_code);
}

int do_validate(const std::string& path) {
    modswap::Strategy strategy;
    try {
        strategy = modswap::parse_strategy_text(read_file(path));
    } catch (const modswap::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitParse;
    }
    modswap::StrategyValidation v = modswap::validate_strategy(strategy);
    if (v.ok) {
        std::cout << "strategy '" << strategy.name << "' is valid\n";
        std::cout << "order:";
        for (auto id : strategy.order()) std::cout << " " << modswap::to_string(id);
        std::cout << "\n";
        return kExitOk;
    }
    std::cout << "strategy '" << strategy.name << "' is invalid\n";
    for (const auto& p : v.problems) std::cout << "  - " << p << "\n";
    return kExitRejected;
}

int do_check_compat(const std::string& scenario_path) {
    modswap::ScenarioSpec spec;
    try {
        spec = modswap::parse_scenario_text(read_file(scenario_path));
    } catch (const modswap::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitParse;
    }
    try {
        modswap::Container rt(spec.seed);
        modswap::stage_scenario(rt, spec);
        rt.advance_before_control(spec.trigger);
        modswap::CompatReport report = modswap::check_compatibility(
            rt, spec.replace_deployment, *rt.registry().get(spec.replacement_module));
        std::cout << report.text();
        return report.ok ? kExitOk : kExitRejected;
    } catch (const modswap::Error& e) {
        std::cerr << e.what() << "\n";
        return exit_code_for(e.code());
    }
}

int do_compare(const std::string& scenario_path, const std::string& strategies_csv,
               bool seed_set, std::uint64_t seed, const std::string& out_dir) {
    modswap::ScenarioSpec spec;
    try {
        spec = modswap::parse_scenario_text(read_file(scenario_path));
    } catch (const modswap::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitParse;
    }
    std::vector<std::string> strategies;
    std::stringstream ss(strategies_csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) strategies.push_back(item);
    if (strategies.empty()) {
        std::cerr << "no strategies given\n";
        return kExitParse;
    }
    modswap::RunOverrides base;
    if (seed_set) base.seed = seed;
    base.scenario_dir = std::filesystem::path(scenario_path).parent_path().string();
    if (base.scenario_dir.empty()) base.scenario_dir = ".";

    auto results = modswap::compare_strategies(spec, strategies, base);
    bool all_ok = true;
    for (const auto& r : results) {
        std::cout << "--- strategy " << r.strategy << " ---\n";
        if (!r.ok) {
            std::cout << "failed: " << r.error << "\n";
            all_ok = false;
        }
        std::cout << r.metrics.text();
        if (!out_dir.empty())
            modswap::write_run_artifacts(std::filesystem::path(out_dir) / r.strategy, r);
    }
    return all_ok ? kExitOk : kExitExecution;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"live module replacement simulator"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "run one scenario");
    run->add_option("--scenario", run_args.scenario_path, "scenario file")->required();
    run->add_option("--strategy", run_args.strategy, "override strategy: F, NI, I or INI");
    auto* seed_opt = run->add_option("--seed", run_args.seed, "override the scenario seed");
    run->add_option("--out", run_args.out_dir, "write trace/metrics/snapshot/report here");
    run->add_flag("--no-admission", run_args.no_admission,
                  "disable the admission rule (demonstration only)");
    run->add_flag("--print-trace", run_args.print_trace, "print the event trace");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate-strategy", "check a strategy file");
    validate->add_option("--file", validate_path, "strategy file")->required();

    std::string compat_path;
    auto* compat = app.add_subcommand("check-compat", "evaluate replacement restrictions");
    compat->add_option("--scenario", compat_path, "scenario file")->required();

    std::string cmp_path, cmp_strategies = "F,NI,I,INI", cmp_out;
    std::uint64_t cmp_seed = 0;
    auto* compare = app.add_subcommand("compare", "run several strategies side by side");
    compare->add_option("--scenario", cmp_path, "scenario file")->required();
    compare->add_option("--strategies", cmp_strategies, "comma-separated strategy tags");
    auto* cmp_seed_opt = compare->add_option("--seed", cmp_seed, "override the scenario seed");
    compare->add_option("--out", cmp_out, "write per-strategy artifacts here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            run_args.seed_set = seed_opt->count() > 0;
            return do_run(run_args);
        }
        if (validate->parsed()) return do_validate(validate_path);
        if (compat->parsed()) return do_check_compat(compat_path);
        if (compare->parsed())
            return do_compare(cmp_path, cmp_strategies, cmp_seed_opt->count() > 0, cmp_seed,
                              cmp_out);
    } catch (const modswap::Error& e) {
        std::cerr << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitExecution;
    }
    return kExitOk;
}
