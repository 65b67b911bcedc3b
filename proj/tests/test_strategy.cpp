// Strategy model: the ordering-constraint table, the four builtin strategies,
// the validator (checked against an independent linear-extension oracle over
// exhaustive and random permutations), and the textual strategy format.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"

using namespace modswap;
using namespace testutil;

namespace {

using S = StepId;
using Edge = std::pair<StepId, StepId>;

// The ordering requirements, restated here by hand so the production table is
// checked against a second source rather than against itself.
const std::map<StepId, std::set<StepId>>& expected_table() {
    static const std::map<StepId, std::set<StepId>> t = {
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
    return t;
}

// Constraint edges of a strategy, derived mechanically from the hand-written
// table plus its data-flow bindings; used as the oracle's ground truth.
std::set<Edge> constraint_edges(const Strategy& st) {
    std::set<StepId> present;
    for (const auto& u : st.steps) present.insert(u.id);
    std::set<Edge> edges;
    for (const auto& u : st.steps)
        for (StepId pre : expected_table().at(u.id))
            if (present.count(pre)) edges.insert({pre, u.id});
    for (const auto& u : st.steps)
        for (const auto& [name, m] : u.bindings)
            if (m.source == Mapping::Source::StepOutput && m.step != u.id &&
                present.count(m.step))
                edges.insert({m.step, u.id});
    return edges;
}

bool is_linear_extension(const std::vector<StepId>& order, const std::set<Edge>& edges) {
    std::map<StepId, std::size_t> pos;
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    for (const auto& [before, after] : edges)
        if (pos.at(before) >= pos.at(after)) return false;
    return true;
}

Strategy with_order(const Strategy& base, const std::vector<std::size_t>& perm) {
    Strategy st = base;
    st.steps.clear();
    for (std::size_t idx : perm) st.steps.push_back(base.steps[idx]);
    return st;
}

std::vector<StepId> ids(const std::vector<std::size_t>& perm, const Strategy& base) {
    std::vector<StepId> out;
    for (std::size_t idx : perm) out.push_back(base.steps[idx].id);
    return out;
}

bool has_problem(const StrategyValidation& v, const std::string& needle) {
    for (const auto& p : v.problems)
        if (p.find(needle) != std::string::npos) return true;
    return false;
}

// Swaps two steps of a builtin, by id.
Strategy swapped(BuiltinStrategy which, StepId x, StepId y) {
    Strategy st = builtin_strategy(which);
    auto xi = std::find_if(st.steps.begin(), st.steps.end(),
                           [&](const StepUse& u) { return u.id == x; });
    auto yi = std::find_if(st.steps.begin(), st.steps.end(),
                           [&](const StepUse& u) { return u.id == y; });
    std::iter_swap(xi, yi);
    return st;
}

StepUse& step_of(Strategy& st, StepId id) {
    for (auto& u : st.steps)
        if (u.id == id) return u;
    throw std::runtime_error("step not in strategy");
}

}  // namespace

TEST_CASE("the ordering-constraint table matches its independent restatement") {
    CHECK(dependency_table() == expected_table());
    // Spot checks on the boundary rows.
    CHECK(dependency_table().at(S::a).empty());
    CHECK(dependency_table().at(S::n).size() == 5);
    CHECK(dependency_table().at(S::o) == std::set<StepId>{S::g, S::k, S::l, S::m});
}

TEST_CASE("the four builtin strategies are valid and declare the expected orders") {
    auto order_of = [](BuiltinStrategy b) { return builtin_strategy(b).order(); };

    CHECK(order_of(BuiltinStrategy::Flash) == std::vector<StepId>{S::a, S::i, S::l, S::o});
    CHECK(order_of(BuiltinStrategy::NonInterrupt) ==
          std::vector<StepId>{S::a, S::i, S::l, S::m, S::o});
    CHECK(order_of(BuiltinStrategy::Interrupt) == all_steps());
    CHECK(order_of(BuiltinStrategy::InterruptNonInterrupt) ==
          std::vector<StepId>{S::a, S::b, S::c, S::i, S::l, S::d, S::e, S::f, S::j, S::k, S::m,
                              S::n, S::o});

    for (BuiltinStrategy b : {BuiltinStrategy::Flash, BuiltinStrategy::NonInterrupt,
                              BuiltinStrategy::Interrupt, BuiltinStrategy::InterruptNonInterrupt}) {
        Strategy st = builtin_strategy(b);
        StrategyValidation v = validate_strategy(st);
        INFO("strategy " << st.name);
        for (const auto& p : v.problems) INFO(p);
        CHECK(v.ok);
        CHECK(v.problems.empty());
        // The validator's effective edges agree with the oracle's.
        CHECK(v.edges == constraint_edges(st));
    }

    CHECK(parse_builtin_strategy("F") == BuiltinStrategy::Flash);
    CHECK(parse_builtin_strategy("noninterrupt") == BuiltinStrategy::NonInterrupt);
    CHECK_FALSE(parse_builtin_strategy("XL").has_value());
}

TEST_CASE("validator verdicts match the oracle on every permutation of the short builtins") {
    SECTION("all 24 orders of the four-step strategy; exactly one is legal") {
        Strategy base = builtin_strategy(BuiltinStrategy::Flash);
        std::set<Edge> edges = constraint_edges(base);
        std::vector<std::size_t> perm(base.steps.size());
        std::iota(perm.begin(), perm.end(), 0);
        int valid = 0, total = 0;
        do {
            ++total;
            Strategy st = with_order(base, perm);
            bool expected = is_linear_extension(ids(perm, base), edges);
            REQUIRE(validate_strategy(st).ok == expected);
            if (expected) ++valid;
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(total == 24);
        CHECK(valid == 1);  // a -> i -> l -> o is a chain
    }

    SECTION("all 120 orders of the five-step strategy; exactly two are legal") {
        Strategy base = builtin_strategy(BuiltinStrategy::NonInterrupt);
        std::set<Edge> edges = constraint_edges(base);
        std::vector<std::size_t> perm(base.steps.size());
        std::iota(perm.begin(), perm.end(), 0);
        int valid = 0, total = 0;
        do {
            ++total;
            Strategy st = with_order(base, perm);
            bool expected = is_linear_extension(ids(perm, base), edges);
            REQUIRE(validate_strategy(st).ok == expected);
            if (expected) ++valid;
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(total == 120);
        CHECK(valid == 2);  // l and m commute, everything else is forced
    }
}

TEST_CASE("validator verdicts match the oracle on random shuffles of the full strategy") {
    Strategy base = builtin_strategy(BuiltinStrategy::Interrupt);
    std::set<Edge> edges = constraint_edges(base);
    std::mt19937 rng(42);
    std::vector<std::size_t> perm(base.steps.size());
    std::iota(perm.begin(), perm.end(), 0);

    int agreements = 0;
    for (int round = 0; round < 50; ++round) {
        std::shuffle(perm.begin(), perm.end(), rng);
        Strategy st = with_order(base, perm);
        bool expected = is_linear_extension(ids(perm, base), edges);
        REQUIRE(validate_strategy(st).ok == expected);
        ++agreements;
    }
    CHECK(agreements == 50);

    // The untouched declared order is legal; the reversed order is not.
    CHECK(validate_strategy(base).ok);
    std::vector<std::size_t> reversed(base.steps.size());
    std::iota(reversed.begin(), reversed.end(), 0);
    std::reverse(reversed.begin(), reversed.end());
    CHECK_FALSE(validate_strategy(with_order(base, reversed)).ok);
}

TEST_CASE("twenty corrupted strategies are each rejected") {
    using B = BuiltinStrategy;
    int rejected = 0;
    auto expect_invalid = [&](const Strategy& st, const std::string& needle) {
        StrategyValidation v = validate_strategy(st);
        INFO(st.name << " should be invalid (looking for: " << needle << ")");
        for (const auto& p : v.problems) INFO(p);
        CHECK_FALSE(v.ok);
        CHECK(has_problem(v, needle));
        if (!v.ok) ++rejected;
    };

    // Order violations: one swap per constraint family.
    expect_invalid(swapped(B::Interrupt, S::b, S::c),
                   "declared order places 'c' before its prerequisite 'b'");
    expect_invalid(swapped(B::Interrupt, S::d, S::e), "'e' before its prerequisite 'd'");
    expect_invalid(swapped(B::Interrupt, S::e, S::f), "'f' before its prerequisite 'e'");
    expect_invalid(swapped(B::Interrupt, S::f, S::g), "'g' before its prerequisite 'f'");
    expect_invalid(swapped(B::Interrupt, S::g, S::h), "'h' before its prerequisite 'g'");
    expect_invalid(swapped(B::Interrupt, S::a, S::i), "'i' before its prerequisite 'a'");
    expect_invalid(swapped(B::Interrupt, S::i, S::j), "'j' before its prerequisite 'i'");
    expect_invalid(swapped(B::Interrupt, S::j, S::k), "'k' before its prerequisite 'j'");
    expect_invalid(swapped(B::Interrupt, S::m, S::n), "'n' before its prerequisite 'm'");
    expect_invalid(swapped(B::Flash, S::l, S::o), "'o' before its prerequisite 'l'");
    expect_invalid(swapped(B::NonInterrupt, S::i, S::m), "'m' before its prerequisite 'i'");

    // Disconnected or miswired inputs.
    {
        Strategy st = builtin_strategy(B::Interrupt);
        step_of(st, S::o).bindings.erase("rewired");
        expect_invalid(st, "step 'o' is missing required input 'rewired'");
    }
    {
        Strategy st = builtin_strategy(B::NonInterrupt);
        step_of(st, S::m).bindings.erase("target");
        expect_invalid(st, "step 'm' is missing required input 'target'");
    }
    {
        Strategy st = builtin_strategy(B::Flash);
        step_of(st, S::o).bindings["rewired"] = Mapping::from_step(S::b, "region");
        expect_invalid(st, "maps to absent step 'b'");
    }
    {
        Strategy st = builtin_strategy(B::Flash);
        step_of(st, S::o).bindings["rewired"] = Mapping::from_step(S::a, "newDeployment");
        expect_invalid(st, "expects TickStamp but 'a.newDeployment' is DeploymentId");
    }
    {
        Strategy st = builtin_strategy(B::Flash);
        step_of(st, S::o).bindings["rewired"] = Mapping::from_step(S::o, "retired");
        expect_invalid(st, "feeds itself");
    }
    {
        Strategy st = builtin_strategy(B::Flash);
        step_of(st, S::i).bindings["deployment"] = Mapping::from_input(kReplacementInput);
        expect_invalid(st, "expects DeploymentId but strategy input 'replacement' is ModuleTypeId");
    }
    {
        Strategy st = builtin_strategy(B::Flash);
        step_of(st, S::i).bindings["deployment"] = Mapping::from_input("ghost");
        expect_invalid(st, "undeclared strategy input 'ghost'");
    }
    {
        Strategy st = builtin_strategy(B::Flash);
        step_of(st, S::l).bindings["target"] = Mapping::from_step(S::i, "nonexistent");
        expect_invalid(st, "not an output of that step");
    }
    {
        Strategy st = builtin_strategy(B::Flash);
        st.steps.push_back(st.steps.front());  // duplicate step a
        expect_invalid(st, "appears more than once");
    }
    CHECK(rejected == 20);

    // The mutations never touched the shared builtins.
    CHECK(validate_strategy(builtin_strategy(B::Interrupt)).ok);
    CHECK(validate_strategy(builtin_strategy(B::Flash)).ok);
    CHECK(validate_strategy(builtin_strategy(B::NonInterrupt)).ok);
}

TEST_CASE("more malformed strategies: no steps, unknown input port") {
    Strategy empty;
    empty.name = "Empty";
    StrategyValidation v = validate_strategy(empty);
    CHECK_FALSE(v.ok);
    CHECK(has_problem(v, "strategy has no steps"));

    Strategy st = builtin_strategy(BuiltinStrategy::Flash);
    step_of(st, S::o).bindings["bogus"] = Mapping::from_step(S::l, "rewired");
    StrategyValidation w = validate_strategy(st);
    CHECK_FALSE(w.ok);
    CHECK(has_problem(w, "step 'o' has no input 'bogus'"));
}

TEST_CASE("require_valid raises one error listing every problem") {
    Strategy st = builtin_strategy(BuiltinStrategy::Flash);
    step_of(st, S::o).bindings.erase("rewired");
    std::iter_swap(st.steps.begin(), st.steps.begin() + 1);  // i before a

    try {
        require_valid(st);
        FAIL("expected an exception");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidStrategy);
        std::string msg = e.what();
        CHECK(msg.find("'F' is invalid:") != std::string::npos);
        CHECK(msg.find("- step 'o' is missing required input 'rewired'") != std::string::npos);
        CHECK(msg.find("- declared order places 'i' before its prerequisite 'a'") !=
              std::string::npos);
    }
}

TEST_CASE("strategy text round-trips through format and parse") {
    for (BuiltinStrategy b : {BuiltinStrategy::Flash, BuiltinStrategy::NonInterrupt,
                              BuiltinStrategy::Interrupt, BuiltinStrategy::InterruptNonInterrupt}) {
        Strategy original = builtin_strategy(b);
        Strategy reparsed = parse_strategy_text(format_strategy(original));
        CHECK(reparsed == original);
    }
}

TEST_CASE("parsing strategy text") {
    SECTION("a small file with inputs, bindings and config") {
        Strategy st = parse_strategy_text(
            "# replacement without quiescence\n"
            "strategy Quick\n"
            "input replaced DeploymentId\n"
            "input replacement ModuleTypeId\n"
            "\n"
            "step a old=$replaced module=$replacement config.aliasDatastore=true\n"
            "step i deployment=a.newDeployment\n");
        CHECK(st.name == "Quick");
        REQUIRE(st.inputs.size() == 2);
        CHECK(st.inputs[1].kind == PortKind::ModuleTypeId);
        REQUIRE(st.steps.size() == 2);
        CHECK(st.steps[0].literal_config.at("aliasDatastore") == "true");
        CHECK(st.steps[0].bindings.at("old") == Mapping::from_input("replaced"));
        CHECK(st.steps[1].bindings.at("deployment") ==
              Mapping::from_step(S::a, "newDeployment"));
    }

    SECTION("errors carry the line number") {
        auto code_and_message = [](const std::string& text) {
            try {
                parse_strategy_text(text);
            } catch (const Error& e) {
                return std::string(e.what());
            }
            return std::string();
        };
        CHECK(code_and_message("strategy X\nstep z\n").find("strategy line 2") !=
              std::string::npos);
        CHECK(code_and_message("strategy\n").find("expected a name") != std::string::npos);
        CHECK(code_and_message("strategy X\ninput a Wat\n").find("unknown port kind 'Wat'") !=
              std::string::npos);
        CHECK(code_and_message("strategy X\nstep a old\n").find("expected key=value") !=
              std::string::npos);
        CHECK(code_and_message("strategy X\nstep a old=x\n")
                  .find("must be $input or step.output") != std::string::npos);
        CHECK(code_and_message("strategy X\nwat\n").find("unknown directive 'wat'") !=
              std::string::npos);
        CHECK(code_and_message("input a DeploymentId\n").find("no 'strategy <name>' line") !=
              std::string::npos);
        CHECK(error_code_of([&] { parse_strategy_text("strategy X\nstep z\n"); }) ==
              ErrorCode::ParseError);
    }
}
