#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"
#include "rulekit/json_io.hpp"
#include "rulekit/verifier.hpp"

using namespace rulekit;
using namespace testutil;

namespace {

TypedRule find_rule(const std::vector<TypedRule> &rules, const std::string &name) {
    auto it = std::find_if(rules.begin(), rules.end(), [&](auto &r) { return r.rule.name == name; });
    REQUIRE(it != rules.end());
    return *it;
}

} // namespace

TEST_CASE("the transpose rule rewrites the revenue example") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    auto rule = find_rule(rules, "SemiJoinAggTranspose");

    auto plan = build_example_plan();
    auto res = apply_rule(rule, plan, reg);
    REQUIRE(res.has_value());
    CHECK(plan_equal(res->plan, build_example_rewritten()));

    // discovered bindings use the scanned column names
    auto &P = res->context.funcs.at("P");
    CHECK(P.slot_names == std::vector<std::string>{"k.cust", "y.author", "y.rating"});
    CHECK(detail::render_expr_binding(std::get<std::vector<ScalarExprPtr>>(P.body)[0], P.slot_names) ==
          "k.cust = y.author AND y.rating <= 1");
    auto &G = res->context.funcs.at("G");
    CHECK(detail::render_expr_binding(std::get<std::vector<ScalarExprPtr>>(G.body)[0], G.slot_names) == "x.cust");
    auto &A = res->context.funcs.at("A");
    CHECK(detail::render_agg_binding(std::get<std::vector<AggCall>>(A.body)[0], A.slot_names) == "Sum(x.amt)");

    // both shapes evaluate identically on the example database
    Bag before = eval_plan(plan, build_example_db(), reg);
    Bag after = eval_plan(res->plan, build_example_db(), reg);
    CHECK(bag_equal(before, after));
    CHECK(before.count(Row{Value{std::string("c1")}, Value{std::int64_t{15}}}) == 1);
}

TEST_CASE("rules fire on subtrees and traces record the path") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    std::vector<TypedRule> just{find_rule(rules, "SemiJoinAggTranspose")};

    auto wrapped = distinct(build_example_plan());
    auto res = apply_rules_to_fixpoint(just, wrapped, reg);
    REQUIRE(res.trace.size() == 1);
    CHECK(res.trace[0].rule == "SemiJoinAggTranspose");
    CHECK(res.trace[0].path == std::vector<int>{0});
    CHECK(res.reachedFixpoint);
    CHECK(plan_equal(res.plan, distinct(build_example_rewritten())));
}

TEST_CASE("non-matching shapes are rejected, not mangled") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    auto rule = find_rule(rules, "SemiJoinAggTranspose");

    // semi-join over a plain scan: no aggregate below, no match
    Schema s{{{"a", ValueType::Str}}};
    auto pred = call(CallOp::Eq, {col(0), col(1)});
    auto sj = custom("SemiJoin", {std::vector<ScalarExprPtr>{pred}, scan("L", s), scan("R", s)});
    CHECK(!apply_rule(rule, sj, reg).has_value());
    CHECK(!apply_rule(rule, scan("L", s), reg).has_value());
}

TEST_CASE("fixpoint application terminates and merges filters") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    std::vector<TypedRule> just{find_rule(rules, "FilterMerge")};

    Schema s{{{"a", ValueType::Int}}};
    auto p1 = call(CallOp::Leq, {col(0), lit(std::int64_t{5})});
    auto p2 = call(CallOp::Geq, {col(0), lit(std::int64_t{1})});
    auto p3 = call(CallOp::Neq, {col(0), lit(std::int64_t{3})});
    auto stacked = filter(p3, filter(p2, filter(p1, scan("T", s))));

    auto res = apply_rules_to_fixpoint(just, stacked, reg);
    CHECK(res.reachedFixpoint);
    CHECK(res.trace.size() == 2); // three filters collapse in two steps

    Database db;
    db.tables["T"] = Table{s, {}};
    for (int i = 0; i < 8; ++i) db.tables["T"].rows.add({Value{std::int64_t{i}}});
    CHECK(bag_equal(eval_plan(stacked, db, reg), eval_plan(res.plan, db, reg)));
    CHECK(eval_plan(res.plan, db, reg).size() == 4); // 1,2,4,5
}

TEST_CASE("constrained rules demand a guard and the default guard is syntactic") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    auto rule = find_rule(rules, "DistinctProjectTranspose");

    Schema s{{{"a", ValueType::Int}, {"b", ValueType::Int}}};
    auto plan = distinct(project({{col(1), "b"}, {col(0), "a"}}, scan("T", s)));

    CHECK_THROWS(apply_rule(rule, plan, reg)); // no guard registered

    ConstraintGuard guard = default_injective_guard;
    auto res = apply_rule(rule, plan, reg, &guard);
    REQUIRE(res.has_value()); // column permutation is trivially injective
    CHECK(plan_equal(res->plan, project({{col(1), "b"}, {col(0), "a"}}, distinct(scan("T", s)))));

    // a lossy projection is not accepted by the syntactic guard
    auto lossy = distinct(project({{col(0), "a"}, {col(0), "a"}}, scan("T", s)));
    CHECK(!apply_rule(rule, lossy, reg, &guard).has_value());
    auto computed = distinct(project({{call(CallOp::Add, {col(0), col(1)}), "s"}}, scan("T", s)));
    CHECK(!apply_rule(rule, computed, reg, &guard).has_value());
}

TEST_CASE("every corpus rule is sound on sampled databases, seeds 0-19") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    REQUIRE(rules.size() >= 12);

    VerifyConfig cfg;
    int applications = 0;
    for (auto &rule : rules) {
        CAPTURE(rule.rule.name);
        auto setup = prepare_verification(rule, reg);
        ConstraintGuard accept = [](const Constraint &, const FunctionBinding &) { return true; };
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            cfg.seed = seed;
            Instance inst = sample_instance(setup.expanded, cfg, 0);
            auto ctx = detail::instance_context(setup.expanded, inst);
            auto planFrom = apply_transform(setup.expanded.rule.from, setup.expanded.types, ctx, reg);

            // the engine must rediscover the match on the materialized plan
            auto res = apply_rule(setup.expanded, planFrom, reg, &accept);
            REQUIRE(res.has_value());
            ++applications;

            // instance tables are inlined as Values nodes, so no database needed
            Database db;
            FunctionEnv env = detail::instance_env(inst);
            Bag before = eval_plan(planFrom, db, reg, &env);
            Bag after = eval_plan(res->plan, db, reg, &env);
            CHECK(bag_equal(before, after));
        }
    }
    CHECK(applications >= 40);
}
