// End-to-end scenario runs: the shipped corpus under each replacement
// strategy, with hand-derived expected metrics, mid-run state checks,
// determinism, and a golden trace.

#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "helpers.hpp"

using namespace modswap;
using namespace testutil;

namespace {

RunResult run_with(const std::string& file, const std::string& strategy_tag) {
    RunOverrides o = scenario_overrides();
    if (!strategy_tag.empty()) o.strategy = strategy_tag;
    return run_scenario(load_scenario(file), o);
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("the cart conversation under each strategy") {
    SECTION("flash: in-flight and follow-up old-module work fails") {
        RunResult r = run_with("cart_replace.scn", "F");
        REQUIRE(r.ok);
        CHECK(r.strategy == "F");
        RunMetrics expected{.total_calls = 4,
                            .done_calls = 2,
                            .failed_calls = 2,
                            .blocked_calls = 0,
                            .total_blocked_ticks = 0,
                            .quiescence_duration = 0,
                            .sessions_on_old = 1,
                            .sessions_on_new = 1,
                            .final_tick = 12};
        CHECK(r.metrics == expected);
        // The mid-flight call and the later invoke on the dead conversation.
        CHECK(contains(r.snapshot_text, "call 2 session=s1 status=Failed reason=InvalidReference"));
        CHECK(contains(r.snapshot_text, "call 4 session=s1 status=Failed reason=InvalidReference"));
        // The second session arrived after the redirect and landed on the new
        // deployment.
        CHECK(contains(r.snapshot_text, "call 3 session=s2 status=Done target=d1.Cart"));
        CHECK(completed_steps(r.trace_text) == std::vector<std::string>{"a", "i", "l", "o"});
    }

    SECTION("non-interrupt: the old conversation drains on the old module") {
        RunResult r = run_with("cart_replace.scn", "NI");
        REQUIRE(r.ok);
        RunMetrics expected{.total_calls = 5,
                            .done_calls = 5,
                            .failed_calls = 0,
                            .blocked_calls = 0,
                            .total_blocked_ticks = 0,
                            .quiescence_duration = 0,
                            .sessions_on_old = 1,
                            .sessions_on_new = 1,
                            .final_tick = 12};
        CHECK(r.metrics == expected);
        // s1's final call still ran on the old deployment.
        CHECK(contains(r.snapshot_text, "call 5 session=s1 status=Done target=dep1.Cart"));
        CHECK(completed_steps(r.trace_text) ==
              std::vector<std::string>{"a", "i", "l", "m", "o"});
    }

    SECTION("interrupt: state transfers and the late session waits out quiescence") {
        RunResult r = run_with("cart_replace.scn", "I");
        REQUIRE(r.ok);
        RunMetrics expected{.total_calls = 5,
                            .done_calls = 5,
                            .failed_calls = 0,
                            .blocked_calls = 1,
                            .total_blocked_ticks = 1,
                            .quiescence_duration = 2,
                            .sessions_on_old = 1,
                            .sessions_on_new = 2,
                            .final_tick = 12};
        CHECK(r.metrics == expected);
        CHECK(contains(r.report_text, "old=dep1 new=d1"));
        CHECK(contains(r.report_text, "triggered=5 finished=7"));
        CHECK(contains(r.compat_text, "result: compatible"));
        CHECK(completed_steps(r.trace_text) ==
              std::vector<std::string>{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l",
                                       "m", "n", "o"});
        CHECK(contains(r.trace_text, "kind=TRANSFER"));
        CHECK(contains(r.trace_text, "fields=2"));
    }

    SECTION("interrupt without interruption: rewiring first spares the late session") {
        RunResult r = run_with("cart_replace.scn", "INI");
        REQUIRE(r.ok);
        RunMetrics expected{.total_calls = 5,
                            .done_calls = 5,
                            .failed_calls = 0,
                            .blocked_calls = 0,
                            .total_blocked_ticks = 0,
                            .quiescence_duration = 2,
                            .sessions_on_old = 1,
                            .sessions_on_new = 2,
                            .final_tick = 12};
        CHECK(r.metrics == expected);
        CHECK(completed_steps(r.trace_text) ==
              std::vector<std::string>{"a", "b", "c", "i", "l", "d", "e", "f", "j", "k", "m", "n",
                                       "o"});
        // s2 was never queued or blocked: the redirect was live before the
        // region initiated.
        CHECK_FALSE(contains(r.trace_text, "kind=CALL_BLOCKED"));
        CHECK_FALSE(contains(r.trace_text, "kind=SESSION_QUEUED"));
    }
}

TEST_CASE("mid-run state of the interrupt cart swap") {
    ScenarioSpec spec = load_scenario("cart_replace.scn");
    Container rt(spec.seed);
    stage_scenario(rt, spec);
    rt.advance_before_control(spec.trigger);
    REQUIRE(rt.now() == 5);

    Engine engine(rt);
    ExecutionReport report =
        engine.execute(builtin_strategy(BuiltinStrategy::Interrupt),
                       {{kReplacedInput, DeploymentRef{"dep1"}},
                        {kReplacementInput, ModuleRef{"OrderV2"}}});

    CHECK(report.new_deployment == "d1");
    CHECK(report.triggered_at == 5);
    CHECK(report.finished_at == 7);
    REQUIRE(report.steps.size() == 15);
    CHECK(report.steps[4].id == StepId::e);        // the quiescence wait
    CHECK(report.steps[4].started_at == 5);
    CHECK(report.steps[4].finished_at == 7);
    CHECK(report.steps[14].started_at == 7);       // retirement needs no drain

    const QuiescenceRegion& region = rt.region("r1");
    CHECK(region.phase == QuiescencePhase::Released);
    CHECK(region.initiated_at == 5);
    CHECK(region.quiescent_at == 7);
    CHECK(region.released_at == 7);
    CHECK(region.admitted_sessions == std::set<std::string>{"s1"});
    CHECK(region.active_at_initiation == std::set<CallId>{2});

    // The conversation moved: s1's handle points at a transferred instance on
    // the new deployment carrying the pre-swap state.
    const RefBinding& b = rt.session("s1").refs.at("main");
    REQUIRE(b.is_instance);
    const BeanInstance& moved = rt.instances().at(b.instance);
    CHECK(moved.deployment == "d1");
    CHECK(moved.state.at("count") == Value{std::int64_t{2}});
    CHECK(moved.state.at("total") == Value{std::int64_t{50}});
    CHECK(moved.state.at("discount") == Value{std::int64_t{0}});

    // The late session was queued during quiescence and reopened on release.
    CHECK(rt.session("s2").status == SessionStatus::Open);
    CHECK(rt.session("s2").opened_at == 7);
    const RefBinding& b2 = rt.session("s2").refs.at("main");
    REQUIRE(b2.is_instance);
    CHECK(rt.instances().at(b2.instance).deployment == "d1");
    CHECK(b2.instance != b.instance);

    // Its first call was admitted on resume and is still running.
    const Call& resumed = rt.calls().at(4);
    CHECK(resumed.status == CallStatus::Active);
    CHECK(resumed.was_blocked);
    CHECK(resumed.blocked_ticks == 1);
    CHECK(resumed.target_deployment == "d1");

    // Retirement leaves a tombstone record rather than erasing history.
    CHECK(rt.deployments().at("dep1").state == DeploymentState::Undeployed);

    rt.finalize_run();
    CHECK(rt.now() == 12);
    Container::CallCensus census = rt.census();
    CHECK(census.total == 5);
    CHECK(census.done == 5);
    CHECK(census.failed == 0);
}

TEST_CASE("datastore contents across the swap depend on the strategy") {
    SECTION("interrupt migrates a snapshot of the store") {
        RunResult r = run_with("datastore_touch.scn", "");
        REQUIRE(r.ok);
        CHECK(r.metrics.done_calls == 3);
        CHECK(r.metrics.failed_calls == 0);
        CHECK(contains(r.snapshot_text, "store owner=d1 locked=false a=1 b=2 c=3"));
    }
    SECTION("flash abandons it, and the old pool binding dies") {
        RunResult r = run_with("datastore_touch.scn", "F");
        REQUIRE(r.ok);
        CHECK(r.metrics.done_calls == 2);
        CHECK(r.metrics.failed_calls == 1);
        CHECK(contains(r.snapshot_text, "store owner=d1 locked=false\n"));
    }
    SECTION("non-interrupt starts an empty store but keeps clients alive") {
        RunResult r = run_with("datastore_touch.scn", "NI");
        REQUIRE(r.ok);
        CHECK(r.metrics.done_calls == 3);
        CHECK(r.metrics.failed_calls == 0);
        CHECK(contains(r.snapshot_text, "store owner=d1 locked=false c=3"));
    }
    SECTION("the alias variant shares one store across old and new") {
        RunResult r = run_with("datastore_touch.scn", "INI");
        REQUIRE(r.ok);
        CHECK(r.metrics.done_calls == 3);
        CHECK(contains(r.snapshot_text, "store owner=dep1 locked=false a=1 b=2 c=3"));
    }
}

TEST_CASE("a nested call chain finishes under admission before the swap proceeds") {
    RunResult r = run_with("nested_chain.scn", "");
    REQUIRE(r.ok);
    RunMetrics expected{.total_calls = 5,
                        .done_calls = 5,
                        .failed_calls = 0,
                        .blocked_calls = 0,
                        .total_blocked_ticks = 0,
                        .quiescence_duration = 2,
                        .sessions_on_old = 1,
                        .sessions_on_new = 1,
                        .final_tick = 9};
    CHECK(r.metrics == expected);

    // Mid-run: the transferred conversation keeps its hit count and gains the
    // new module's extra field.
    ScenarioSpec spec = load_scenario("nested_chain.scn");
    Container rt(spec.seed);
    stage_scenario(rt, spec);
    rt.advance_before_control(spec.trigger);
    Engine engine(rt);
    engine.execute(builtin_strategy(BuiltinStrategy::Interrupt),
                   {{kReplacedInput, DeploymentRef{"dep1"}},
                    {kReplacementInput, ModuleRef{"ChainV2"}}});
    rt.advance_to(8);
    CHECK(contains(rt.snapshot_text(), "instance d1.A#4 stateful session=s1 depth=0 hits=2"));
    rt.finalize_run();
    CHECK(rt.now() == 9);
}

TEST_CASE("pure pool traffic hops deployments without failures") {
    RunResult r = run_with("stateless_only.scn", "");
    REQUIRE(r.ok);
    RunMetrics expected{.total_calls = 4,
                        .done_calls = 4,
                        .failed_calls = 0,
                        .blocked_calls = 0,
                        .total_blocked_ticks = 0,
                        .quiescence_duration = 0,
                        .sessions_on_old = 2,
                        .sessions_on_new = 1,
                        .final_tick = 7};
    CHECK(r.metrics == expected);
    CHECK(completed_steps(r.trace_text) == std::vector<std::string>{"a", "i", "l", "m", "o"});
    CHECK(contains(r.snapshot_text, "call 4 session=s1 status=Done target=d1.Worker"));
}

TEST_CASE("a strategy file drives the run") {
    RunResult r = run_with("custom_strategy.scn", "");
    REQUIRE(r.ok);
    CHECK(r.strategy == "FlashPlus");
    CHECK(r.metrics.total_calls == 3);
    CHECK(r.metrics.done_calls == 2);
    CHECK(r.metrics.failed_calls == 1);
    CHECK(completed_steps(r.trace_text) == std::vector<std::string>{"a", "i", "l", "m", "o"});
    // The force-retired call failed, but the pool handover kept the session's
    // later call alive on the replacement.
    CHECK(contains(r.snapshot_text, "call 1 session=s1 status=Failed reason=InvalidReference"));
    CHECK(contains(r.snapshot_text, "call 3 session=s1 status=Done target=d1.Worker"));
}

TEST_CASE("an invalid strategy file rejects the run before any step executes") {
    RunResult r = run_with("invalid_strategy.scn", "");
    CHECK_FALSE(r.ok);
    CHECK(r.error_code == ErrorCode::InvalidStrategy);
    CHECK(contains(r.error, "strategy 'BadOrder' is invalid:"));
    CHECK(contains(r.error, "declared order places 'o' before its prerequisite 'l'"));
    CHECK_FALSE(contains(r.trace_text, "kind=STEP"));
    // The workload before the trigger still ran, and the close still drained.
    CHECK(r.metrics.total_calls == 1);
    CHECK(r.metrics.done_calls == 1);
    CHECK(r.metrics.final_tick == 3);
}

TEST_CASE("an incompatible replacement is refused with a report") {
    ScenarioSpec spec = parse_scenario_text(
        "scenario bad_swap\n"
        "seed 1\n"
        "module WV1\n"
        "  bean W stateless\n"
        "    provides IW contract=w1\n"
        "module WV2\n"
        "  bean W stateless\n"
        "    provides IX contract=x1\n"
        "deploy dep1 WV1\n"
        "replace dep1 WV2\n"
        "strategy NI\n"
        "trigger 2\n"
        "at 0 open s1 client=c1 target=dep1.W iface=IW\n"
        "at 1 invoke s1 dur=1\n"
        "at 3 close s1\n");
    RunResult r = run_scenario(spec, scenario_overrides());
    CHECK_FALSE(r.ok);
    CHECK(r.error_code == ErrorCode::CompatibilityRejected);
    CHECK(contains(r.error, "cannot replace deployment 'dep1'"));
    CHECK(contains(r.compat_text, "R1 violation: IW:w1 (interface missing from WV2)"));
    CHECK(contains(r.compat_text, "result: rejected"));
    CHECK_FALSE(contains(r.trace_text, "status=ok"));
    CHECK(r.metrics.done_calls == 1);
    CHECK(r.metrics.final_tick == 3);
}

TEST_CASE("repeated runs are byte-identical") {
    for (const char* file : {"cart_replace.scn", "datastore_touch.scn", "nested_chain.scn",
                             "stateless_only.scn", "custom_strategy.scn"}) {
        DYNAMIC_SECTION(file) {
            RunResult a = run_with(file, "");
            RunResult b = run_with(file, "");
            CHECK(a.trace_text == b.trace_text);
            CHECK(a.snapshot_text == b.snapshot_text);
            CHECK(a.metrics == b.metrics);
        }
    }
}

TEST_CASE("the corpus never consumes randomness, so the seed cannot matter") {
    ScenarioSpec spec = load_scenario("cart_replace.scn");
    RunOverrides base = scenario_overrides();
    RunOverrides reseeded = base;
    reseeded.seed = 99;
    RunResult a = run_scenario(spec, base);
    RunResult b = run_scenario(spec, reseeded);
    CHECK(a.trace_text == b.trace_text);
    CHECK(a.metrics == b.metrics);
}

TEST_CASE("comparing strategies in parallel matches sequential runs") {
    ScenarioSpec spec = load_scenario("cart_replace.scn");
    RunOverrides base = scenario_overrides();
    std::vector<std::string> tags = {"F", "NI", "I", "INI"};
    std::vector<RunResult> parallel = compare_strategies(spec, tags, base);
    REQUIRE(parallel.size() == tags.size());
    for (std::size_t i = 0; i < tags.size(); ++i) {
        RunOverrides o = base;
        o.strategy = tags[i];
        RunResult sequential = run_scenario(spec, o);
        CHECK(parallel[i].strategy == sequential.strategy);
        CHECK(parallel[i].metrics == sequential.metrics);
        CHECK(parallel[i].trace_text == sequential.trace_text);
        CHECK(parallel[i].report_text == sequential.report_text);
    }
}

TEST_CASE("the interrupt cart trace matches its golden copy") {
    RunResult r = run_with("cart_replace.scn", "I");
    REQUIRE(r.ok);
    std::string golden = read_file(std::string(MODSWAP_GOLDEN_DIR) + "/cart_replace_I.trace");
    CHECK(r.trace_text == golden);
}
