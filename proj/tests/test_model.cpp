// Module-type registry validation and the deployment lifecycle automaton.

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace modswap;
using testutil::bean;
using testutil::error_code_of;

TEST_CASE("registry accepts a well-formed module and serves it back") {
    ModelRegistry reg;
    auto ptr = reg.register_module(testutil::order_v1());
    REQUIRE(ptr->name == "OrderV1");
    REQUIRE(reg.find("OrderV1") == ptr);
    REQUIRE(reg.get("OrderV1")->find_bean("Cart") != nullptr);
    REQUIRE(reg.find("Nope") == nullptr);
    REQUIRE(error_code_of([&] { reg.get("Nope"); }) == ErrorCode::UnknownModuleType);
}

TEST_CASE("registry rejects malformed module types") {
    ModelRegistry reg;

    SECTION("empty name") {
        ModuleType m;
        m.beans.push_back(bean("B", BeanKind::Stateless, {{"I", "c"}}));
        REQUIRE(error_code_of([&] { reg.register_module(m); }) == ErrorCode::ValidationError);
    }
    SECTION("no beans") {
        ModuleType m;
        m.name = "Empty";
        REQUIRE(error_code_of([&] { reg.register_module(m); }) == ErrorCode::ValidationError);
    }
    SECTION("duplicate bean names") {
        ModuleType m;
        m.name = "Dup";
        m.beans.push_back(bean("B", BeanKind::Stateless, {{"I", "c"}}));
        m.beans.push_back(bean("B", BeanKind::Stateless, {{"J", "c"}}));
        REQUIRE(error_code_of([&] { reg.register_module(m); }) == ErrorCode::ValidationError);
    }
    SECTION("stateless bean with state fields") {
        ModuleType m;
        m.name = "Bad";
        m.beans.push_back(
            bean("B", BeanKind::Stateless, {{"I", "c"}}, {}, {{"x", ValueType::Int}}));
        REQUIRE(error_code_of([&] { reg.register_module(m); }) == ErrorCode::ValidationError);
    }
    SECTION("duplicate reference names on one bean") {
        ModuleType m;
        m.name = "Bad";
        m.beans.push_back(bean("B", BeanKind::Stateless, {{"I", "c"}},
                               {{"r", {"X", "x"}}, {"r", {"Y", "y"}}}));
        REQUIRE(error_code_of([&] { reg.register_module(m); }) == ErrorCode::ValidationError);
    }
    SECTION("env default of the wrong type") {
        ModuleType m;
        m.name = "Bad";
        m.beans.push_back(bean("B", BeanKind::Stateless, {{"I", "c"}}, {}, {},
                               {{"e", ValueType::Int, std::string("not-an-int")}}));
        REQUIRE(error_code_of([&] { reg.register_module(m); }) == ErrorCode::EnvTypeMismatch);
    }
    SECTION("duplicate module name") {
        reg.register_module(testutil::order_v1());
        REQUIRE(error_code_of([&] { reg.register_module(testutil::order_v1()); }) ==
                ErrorCode::ValidationError);
    }
    SECTION("one interface name cannot carry two contracts") {
        reg.register_module(testutil::order_v1());
        ModuleType m;
        m.name = "Conflict";
        m.beans.push_back(bean("B", BeanKind::Stateless, {{"ICart", "other-contract"}}));
        REQUIRE(error_code_of([&] { reg.register_module(m); }) == ErrorCode::ValidationError);
        // Same contract is fine.
        ModuleType ok;
        ok.name = "Agrees";
        ok.beans.push_back(bean("B", BeanKind::Stateless, {{"ICart", "cart1"}}));
        REQUIRE_NOTHROW(reg.register_module(ok));
    }
}

TEST_CASE("interface identity requires name and contract to match") {
    InterfaceId a{"I", "c1"}, b{"I", "c2"}, c{"I", "c1"};
    REQUIRE(a == c);
    REQUIRE(a != b);
    BeanType bt = bean("B", BeanKind::Stateless, {a});
    REQUIRE(bt.provides_interface(c));
    REQUIRE(!bt.provides_interface(b));
}

namespace {

enum class Op { Start, Stop, Undeploy };

// Independent statement of the lifecycle automaton: the complete list of legal
// (state, operation) pairs and the state each produces.
std::optional<DeploymentState> oracle_next(DeploymentState s, Op op) {
    switch (op) {
    case Op::Start:
        if (s == DeploymentState::Deployed || s == DeploymentState::Stopped)
            return DeploymentState::Started;
        return std::nullopt;
    case Op::Stop:
        if (s == DeploymentState::Started) return DeploymentState::Stopped;
        return std::nullopt;
    case Op::Undeploy:
        if (s == DeploymentState::Stopped) return DeploymentState::Undeployed;
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace

TEST_CASE("lifecycle_allows agrees with the transition oracle on all pairs") {
    const DeploymentState states[] = {DeploymentState::Deployed, DeploymentState::Started,
                                      DeploymentState::Stopped, DeploymentState::Undeployed};
    for (DeploymentState from : states)
        for (DeploymentState to : states) {
            bool reachable = false;
            for (Op op : {Op::Start, Op::Stop, Op::Undeploy})
                if (oracle_next(from, op) == to) reachable = true;
            REQUIRE(lifecycle_allows(from, to) == reachable);
        }
}

TEST_CASE("every operation sequence up to length five matches the oracle") {
    const Op ops[] = {Op::Start, Op::Stop, Op::Undeploy};

    // Walk all 3^5 operation sequences; on each prefix the container must
    // accept exactly when the oracle does and land in the same state.
    for (int code = 0; code < 243; ++code) {
        Container rt;
        rt.registry().register_module(testutil::order_v1());
        std::string id = rt.deploy("OrderV1", {}, {}, "d");
        rt.wire(id, "Cart", "catalogRef", {id, "Catalog", {"ICatalog", "cat1"}});

        DeploymentState expected = DeploymentState::Deployed;
        int remaining = code;
        for (int step = 0; step < 5; ++step) {
            Op op = ops[remaining % 3];
            remaining /= 3;
            auto next = oracle_next(expected, op);
            auto err = error_code_of([&] {
                switch (op) {
                case Op::Start: rt.start_deployment(id); break;
                case Op::Stop: rt.stop_deployment(id); break;
                case Op::Undeploy: rt.undeploy(id); break;
                }
            });
            if (next) {
                REQUIRE(!err);
                expected = *next;
            } else {
                REQUIRE(err == ErrorCode::IllegalLifecycleTransition);
            }
            REQUIRE(rt.deployment(id).state == expected);
        }
    }
}

TEST_CASE("start refuses while any reference is unwired") {
    Container rt;
    rt.registry().register_module(testutil::order_v1());
    std::string id = rt.deploy("OrderV1");
    REQUIRE(error_code_of([&] { rt.start_deployment(id); }) == ErrorCode::UnsatisfiedReference);
    rt.wire(id, "Cart", "catalogRef", {id, "Catalog", {"ICatalog", "cat1"}});
    REQUIRE_NOTHROW(rt.start_deployment(id));
}

TEST_CASE("wiring validates the target bean and its interface") {
    Container rt;
    rt.registry().register_module(testutil::order_v1());
    std::string id = rt.deploy("OrderV1");
    SECTION("missing target bean") {
        REQUIRE(error_code_of([&] {
                    rt.wire(id, "Cart", "catalogRef", {id, "Nope", {"ICatalog", "cat1"}});
                }) == ErrorCode::WiringTargetMissing);
    }
    SECTION("target does not provide the referenced interface") {
        REQUIRE(error_code_of([&] {
                    rt.wire(id, "Cart", "catalogRef", {id, "Cart", {"ICatalog", "cat1"}});
                }) == ErrorCode::InterfaceMismatch);
    }
    SECTION("unknown reference name") {
        REQUIRE(error_code_of([&] {
                    rt.wire(id, "Cart", "nope", {id, "Catalog", {"ICatalog", "cat1"}});
                }) == ErrorCode::UnknownReference);
    }
}

TEST_CASE("deploy validates env values against declared entries") {
    Container rt;
    rt.registry().register_module(testutil::order_v1());
    SECTION("wrong type") {
        std::map<std::string, std::map<std::string, Value>> env;
        env["Cart"]["taxRate"] = std::string("high");
        REQUIRE(error_code_of([&] { rt.deploy("OrderV1", env); }) == ErrorCode::EnvTypeMismatch);
    }
    SECTION("unknown entry") {
        std::map<std::string, std::map<std::string, Value>> env;
        env["Cart"]["nope"] = std::int64_t{1};
        REQUIRE(error_code_of([&] { rt.deploy("OrderV1", env); }) == ErrorCode::ValidationError);
    }
    SECTION("defaults fill in") {
        std::string id = rt.deploy("OrderV1");
        REQUIRE(rt.deployment(id).env.at("Cart").at("taxRate") == Value{std::int64_t{12}});
    }
}
