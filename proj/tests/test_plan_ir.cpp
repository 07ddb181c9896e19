#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"
#include "rulekit/plan_ir.hpp"

using namespace rulekit;

TEST_CASE("structural plan equality") {
    Schema s{{{"a", ValueType::Int}, {"b", ValueType::Int}}};
    auto p1 = filter(call(CallOp::Eq, {col(0), lit(std::int64_t{1})}), scan("T", s));
    auto p2 = filter(call(CallOp::Eq, {col(0), lit(std::int64_t{1})}), scan("T", s));
    auto p3 = filter(call(CallOp::Eq, {col(0), lit(std::int64_t{2})}), scan("T", s));
    auto p4 = filter(call(CallOp::Eq, {col(1), lit(std::int64_t{1})}), scan("T", s));
    CHECK(plan_equal(p1, p1));
    CHECK(plan_equal(p1, p2));
    CHECK(!plan_equal(p1, p3));
    CHECK(!plan_equal(p1, p4));
    CHECK(!plan_equal(p1, scan("T", s)));
}

TEST_CASE("expr equality distinguishes sides and ops") {
    CHECK(expr_equal(col(Side::Left, 0), col(Side::Left, 0)));
    CHECK(!expr_equal(col(Side::Left, 0), col(Side::Right, 0)));
    CHECK(!expr_equal(call(CallOp::Eq, {col(0), col(1)}), call(CallOp::Neq, {col(0), col(1)})));
    CHECK(!expr_equal(ucall("F", ValueType::Int, {col(0)}), ucall("G", ValueType::Int, {col(0)})));
}

TEST_CASE("split_conjuncts flattens nested AND trees") {
    auto a = call(CallOp::Eq, {col(0), lit(std::int64_t{1})});
    auto b = call(CallOp::Leq, {col(1), lit(std::int64_t{2})});
    auto c = call(CallOp::IsNotNull, {col(2)});

    auto nested = call(CallOp::And, {call(CallOp::And, {a, b}), c});
    auto parts = split_conjuncts(nested);
    REQUIRE(parts.size() == 3);
    CHECK(expr_equal(parts[0], a));
    CHECK(expr_equal(parts[1], b));
    CHECK(expr_equal(parts[2], c));

    // a non-conjunction is its own single conjunct
    auto one = split_conjuncts(call(CallOp::Or, {a, b}));
    REQUIRE(one.size() == 1);

    // splitting the result of conjoin is the identity on the parts
    auto again = split_conjuncts(conjoin({a, b, c}));
    REQUIRE(again.size() == 3);
    for (size_t i = 0; i < 3; ++i) CHECK(expr_equal(again[i], parts[i]));
}

TEST_CASE("split/conjoin agree with direct evaluation") {
    // oracle: a conjunction of literals evaluates like its re-joined split
    for (int mask = 0; mask < 8; ++mask) {
        std::vector<ScalarExprPtr> lits;
        for (int i = 0; i < 3; ++i) lits.push_back(lit((mask >> i & 1) != 0));
        auto joined = conjoin(lits);
        bool expect = mask == 7;
        auto parts = split_conjuncts(joined);
        bool got = true;
        for (auto &p : parts) {
            auto *l = std::get_if<Literal>(&p->node);
            REQUIRE(l != nullptr);
            got = got && std::get<bool>(l->value);
        }
        CHECK(got == expect);
    }
}

TEST_CASE("column_deps covers calls, sides, and correlated subplans") {
    auto e = call(CallOp::And, {call(CallOp::Eq, {col(Side::Left, 0), col(Side::Right, 2)}),
                                call(CallOp::IsNull, {col(Side::Left, 3)})});
    auto deps = column_deps(e);
    CHECK(deps == std::set<ColumnDep>{{Side::Left, 0}, {Side::Right, 2}, {Side::Left, 3}});

    // adding one more reference adds exactly one dependency
    auto e2 = call(CallOp::And, {e, call(CallOp::IsNotNull, {col(Side::Right, 5)})});
    auto deps2 = column_deps(e2);
    CHECK(deps2.size() == deps.size() + 1);
    CHECK(deps2.count({Side::Right, 5}) == 1);

    // correlated reference inside an Exists subplan surfaces as Left
    Schema s{{{"a", ValueType::Int}}};
    auto ex = exists(filter(call(CallOp::Eq, {col(Side::Left, 1), col(Side::Only, 0)}), scan("R", s)));
    auto deps3 = column_deps(ex);
    CHECK(deps3.count({Side::Left, 1}) == 1);
    CHECK(deps3.count({Side::Only, 0}) == 0); // subplan-local, not an outer dep
}

TEST_CASE("output schemas of core nodes") {
    CustomOpRegistry reg;
    Schema l{{{"a", ValueType::Int}, {"b", ValueType::Str}}};
    Schema r{{{"c", ValueType::Int}}};
    auto L = scan("L", l), R = scan("R", r);

    CHECK(output_schema(*filter(lit(true), L), reg) == l);
    CHECK(output_schema(*distinct(L), reg) == l);
    CHECK(output_schema(*union_all(L, L), reg) == l);

    Schema joined = output_schema(*join(lit(true), L, R), reg);
    REQUIRE(joined.arity() == 3);
    CHECK(joined.columns[2].first == "c");

    Schema proj = output_schema(*project({{col(1), "name"}}, L), reg);
    REQUIRE(proj.arity() == 1);
    CHECK(proj.columns[0] == std::pair<std::string, ValueType>{"name", ValueType::Str});

    Schema agg = output_schema(*aggregate({col(0)}, {agg_sum(col(0))}, L), reg);
    REQUIRE(agg.arity() == 2);
}
