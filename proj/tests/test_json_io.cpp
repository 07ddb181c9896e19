#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"
#include "rulekit/json_io.hpp"
#include "rulekit/verifier.hpp"

using namespace rulekit;
using namespace testutil;
using nlohmann::json;

TEST_CASE("values round-trip, NULL maps to json null") {
    for (Value v : {Value{kNull}, Value{std::int64_t{-3}}, Value{std::string("hi")}, Value{true}}) {
        CHECK(value_from_json(value_to_json(v)) == v);
    }
    CHECK(value_to_json(kNull).is_null());
    CHECK(value_to_json(Value{std::int64_t{5}}) == json(5));
}

TEST_CASE("expressions round-trip through their JSON encoding") {
    std::vector<ScalarExprPtr> exprs = {
        col(Side::Left, 2),
        lit(std::int64_t{42}),
        lit(std::string("s")),
        null_lit(ValueType::Int),
        call(CallOp::And, {call(CallOp::Eq, {col(0), col(1)}), call(CallOp::IsNull, {col(2)})}),
        ucall("P", ValueType::Bool, {col(0), col(1)}),
        exists(filter(call(CallOp::Eq, {col(Side::Left, 0), col(0)}),
                      scan("R", Schema{{{"a", ValueType::Int}}}))),
    };
    for (auto &e : exprs) {
        auto back = expr_from_json(expr_to_json(e));
        CHECK(expr_equal(e, back));
        // serialization is canonical: same JSON both times
        CHECK(expr_to_json(e) == expr_to_json(back));
    }
}

TEST_CASE("the frozen column encoding is stable") {
    // external consumers depend on these exact shapes
    CHECK(expr_to_json(col(Side::Left, 0)) == json{{"col", {{"side", "left"}, {"index", 0}}}});
    CHECK(expr_to_json(lit(std::int64_t{5})) == json{{"lit", {{"type", "Int"}, {"value", 5}}}});
    auto c = expr_to_json(call(CallOp::Eq, {col(0), col(1)}));
    CHECK(c.contains("call"));
    CHECK(c["call"]["fn"] == "eq");
}

TEST_CASE("plans round-trip including custom operators") {
    auto p = build_example_plan();
    auto back = plan_from_json(plan_to_json(p));
    CHECK(plan_equal(p, back));
    CHECK(plan_to_json(p) == plan_to_json(back));

    // all remaining node kinds
    Schema s{{{"a", ValueType::Int}}};
    std::vector<LogicalPlanPtr> plans = {
        empty(s),
        values(s, {{Value{std::int64_t{1}}}, {kNull}}),
        project({{col(0), "a"}}, scan("T", s)),
        join(lit(true), scan("L", s), scan("R", s)),
        union_all(scan("L", s), scan("R", s)),
        distinct(scan("T", s)),
        aggregate({col(0)}, {agg_sum(col(0)), agg_count()}, scan("T", s)),
    };
    for (auto &q : plans) CHECK(plan_equal(q, plan_from_json(plan_to_json(q))));
}

TEST_CASE("the checked-in example plan file parses to the built plan") {
    auto fromFile = plan_file_from_json(json::parse(slurp(repo_path("corpus/plans/semijoin_transpose.plan.json"))));
    CHECK(plan_equal(fromFile, build_example_plan()));
}

TEST_CASE("databases round-trip and the checked-in example matches") {
    auto db = build_example_db();
    auto back = database_from_json(database_to_json(db));
    REQUIRE(back.tables.size() == 2);
    CHECK(back.tables.at("Order").schema == db.tables.at("Order").schema);
    CHECK(bag_equal(back.tables.at("Order").rows, db.tables.at("Order").rows));
    CHECK(bag_equal(back.tables.at("Rev").rows, db.tables.at("Rev").rows));

    auto fromFile = database_from_json(json::parse(slurp(repo_path("corpus/plans/orders.db.json"))));
    CHECK(bag_equal(fromFile.tables.at("Order").rows, db.tables.at("Order").rows));
}

TEST_CASE("malformed documents raise format errors") {
    CHECK_THROWS_AS(plan_from_json(json::parse(R"({"op":"warp"})")), JsonFormatError);
    CHECK_THROWS_AS(expr_from_json(json::parse(R"({"zap":1})")), JsonFormatError);
    CHECK_THROWS_AS(database_from_json(json::parse(R"({"no_tables":{}})")), JsonFormatError);
    CHECK_THROWS_AS(plan_from_json(json::parse(R"({"op":"filter"})")), JsonFormatError);
}

TEST_CASE("verifier instances round-trip") {
    CustomOpRegistry reg;
    auto mutants = load_dir(repo_path("tests/mutations"), reg);
    auto it = std::find_if(mutants.begin(), mutants.end(),
                           [](auto &r) { return r.rule.name == "JoinSideSwap"; });
    REQUIRE(it != mutants.end());
    auto rep = verify_rule(*it, reg);
    REQUIRE(rep.counterexampleFound);

    Instance back = instance_from_json(instance_to_json(*rep.instance));
    CHECK(back.domains == rep.instance->domains);
    CHECK(back.funcTables == rep.instance->funcTables);
    CHECK(back.planTables == rep.instance->planTables);

    // a deserialized instance replays to the identical counterexample
    auto setup = prepare_verification(*it, reg);
    auto [from, to] = replay_instance(setup, back, reg);
    CHECK(bag_equal(from, rep.bagFrom));
    CHECK(bag_equal(to, rep.bagTo));
}

TEST_CASE("trace entries expose rule name, path, and readable bindings") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    auto it = std::find_if(rules.begin(), rules.end(),
                           [](auto &r) { return r.rule.name == "SemiJoinAggTranspose"; });
    REQUIRE(it != rules.end());

    auto res = apply_rules_to_fixpoint({*it}, build_example_plan(), reg);
    REQUIRE(res.trace.size() == 1);
    json j = trace_entry_to_json(res.trace[0]);
    CHECK(j["rule"] == "SemiJoinAggTranspose");
    CHECK(j["path"] == json::array());
    CHECK(j["bindings"]["P"] == "k.cust = y.author AND y.rating <= 1");
    CHECK(j["bindings"]["G"] == "x.cust");
    CHECK(j["bindings"]["A"] == "Sum(x.amt)");
    CHECK(j["bindings"]["L"] == "Scan(Order)");
    CHECK(j["bindings"]["R"] == "Scan(Rev)");
}
