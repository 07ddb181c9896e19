#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"

using namespace rulekit;
using namespace testutil;

namespace {

CustomOpDef semijoin_def() {
    auto X = TypeRef::named("X"), Y = TypeRef::named("Y");
    CustomOpDef def;
    def.name = "SemiJoin";
    def.typeParams = {"X", "Y"};
    def.params = {ParamSpec{ParamKind::Predicate, "P", {}, {X, Y}, TypeRef::boolean()},
                  ParamSpec{ParamKind::Plan, "L", X, {}, {}},
                  ParamSpec{ParamKind::Plan, "R", Y, {}, {}}};
    def.outputRowType = X;
    def.semantics = pfilter(Binder{{"x"}},
                            pexists(pfilter(Binder{{"y"}}, papply("P", {evar("x"), evar("y")}), psymbol("R"))),
                            psymbol("L"));
    return def;
}

} // namespace

TEST_CASE("registering the semi-join definition succeeds") {
    CustomOpRegistry reg;
    CHECK(register_def(semijoin_def(), reg).empty());
    CHECK(reg.signatures().count("SemiJoin") == 1);
}

TEST_CASE("definitions with unknown symbols in the body are rejected") {
    auto def = semijoin_def();
    def.semantics = pfilter(Binder{{"x"}}, papply("Mystery", {evar("x")}), psymbol("L"));
    CustomOpRegistry reg;
    CHECK(!register_def(def, reg).empty());
}

TEST_CASE("definitions whose body row type disagrees with the declared output are rejected") {
    auto def = semijoin_def();
    def.semantics = psymbol("R"); // Bag<Y>, but output declared Bag<X>
    CustomOpRegistry reg;
    CHECK(!register_def(def, reg).empty());
}

TEST_CASE("expanding the transpose rule inlines the filter/exists form") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    auto it = std::find_if(rules.begin(), rules.end(),
                           [](auto &r) { return r.rule.name == "SemiJoinAggTranspose"; });
    REQUIRE(it != rules.end());

    auto from = expand(it->rule.from, reg);

    // expected: Filter(_x1 -> Exists(Filter(_y2 -> P(_x1.0, _y2), R)), Aggregate(..., L))
    auto aggr = paggregate(Binder{{"x"}}, eapply("G", {evar("x")}), AggPattern{"A", {evar("x")}}, psymbol("L"));
    auto expectFrom =
        pfilter(Binder{{"_x1"}},
                pexists(pfilter(Binder{{"_y2"}},
                                papply("P", {etuple_project(evar("_x1"), 0), evar("_y2")}), psymbol("R"))),
                aggr);
    CHECK(pattern_equal(from, expectFrom));

    auto to = expand(it->rule.to, reg);
    auto expectTo = paggregate(
        Binder{{"x"}}, eapply("G", {evar("x")}), AggPattern{"A", {evar("x")}},
        pfilter(Binder{{"_x1"}},
                pexists(pfilter(Binder{{"_y2"}},
                                papply("P", {eapply("G", {evar("_x1")}), evar("_y2")}), psymbol("R"))),
                psymbol("L")));
    CHECK(pattern_equal(to, expectTo));
}

TEST_CASE("expansion is idempotent") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    for (auto &r : rules) {
        CAPTURE(r.rule.name);
        auto once = expand(r.rule.from, reg);
        CHECK(pattern_equal(once, expand(once, reg)));
        auto to = expand(r.rule.to, reg);
        CHECK(pattern_equal(to, expand(to, reg)));
    }
}

TEST_CASE("expanded rules still typecheck with the same output type") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    for (auto &r : rules) {
        CAPTURE(r.rule.name);
        Rule core = r.rule;
        core.from = expand(r.rule.from, reg);
        core.to = expand(r.rule.to, reg);
        auto res = typecheck_rule(core, reg);
        auto *typed = std::get_if<TypedRule>(&res);
        REQUIRE(typed != nullptr);
        CHECK(typed->output == r.output);
    }
}

TEST_CASE("expanding a concrete custom node matches the definition body") {
    CustomOpRegistry reg;
    REQUIRE(register_def(semijoin_def(), reg).empty());

    Schema ls{{{"a", ValueType::Int}}};
    Schema rs{{{"b", ValueType::Int}}};
    auto pred = call(CallOp::Eq, {col(0), col(1)});
    auto node = custom("SemiJoin", {std::vector<ScalarExprPtr>{pred}, scan("L", ls), scan("R", rs)});
    auto expanded = expand_custom_node(std::get<CustomNode>(node->node), reg);

    auto inner = filter(call(CallOp::Eq, {col(Side::Left, 0), col(Side::Only, 0)}), scan("R", rs));
    auto expect = filter(exists(inner), scan("L", ls));
    CHECK(plan_equal(expanded, expect));
}
