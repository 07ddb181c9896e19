#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"
#include "rulekit/verifier.hpp"

using namespace rulekit;
using namespace testutil;

TEST_CASE("every corpus rule survives bounded checking") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    REQUIRE(rules.size() >= 12);
    VerifyConfig cfg;
    cfg.trials = 300;
    for (auto &r : rules) {
        CAPTURE(r.rule.name);
        auto rep = verify_rule(r, reg, cfg);
        CHECK(!rep.counterexampleFound);
        CHECK(rep.elapsedSeconds < 5.0);
    }
}

TEST_CASE("identical sides short-circuit after a single trial") {
    CustomOpRegistry reg;
    auto res = load_rules(R"(rule Id {
  types X;
  plans L: Bag<X>;
  from Distinct(L);
  to Distinct(L);
})", reg);
    auto &rules = std::get<std::vector<TypedRule>>(res);
    auto rep = verify_rule(rules[0], reg);
    CHECK(!rep.counterexampleFound);
    CHECK(rep.trialsRun == 1);
}

TEST_CASE("every seeded mutant is refuted, shrunk small, and replayable") {
    CustomOpRegistry reg;
    auto mutants = load_dir(repo_path("tests/mutations"), reg);
    REQUIRE(mutants.size() >= 8);

    VerifyConfig cfg;
    for (auto &m : mutants) {
        CAPTURE(m.rule.name);
        auto rep = verify_rule(m, reg, cfg);
        REQUIRE(rep.counterexampleFound);
        REQUIRE(rep.instance.has_value());
        CHECK(!bag_equal(rep.bagFrom, rep.bagTo));

        // shrinking got it down to at most 3 rows per table and 3 domain values
        for (auto &[name, bag] : rep.instance->planTables) {
            CAPTURE(name);
            CHECK(bag.size() <= 3);
        }
        for (auto &[name, dom] : rep.instance->domains) {
            CAPTURE(name);
            CHECK(dom.size() <= 3);
        }

        // the stored instance replays to the same disagreement
        auto setup = prepare_verification(m, reg);
        auto [from, to] = replay_instance(setup, *rep.instance, reg);
        CHECK(bag_equal(from, rep.bagFrom));
        CHECK(bag_equal(to, rep.bagTo));
        CHECK(!bag_equal(from, to));
    }
}

TEST_CASE("verification is deterministic for a fixed seed") {
    CustomOpRegistry reg;
    auto mutants = load_dir(repo_path("tests/mutations"), reg);
    auto it = std::find_if(mutants.begin(), mutants.end(),
                           [](auto &r) { return r.rule.name == "JoinSideSwap"; });
    REQUIRE(it != mutants.end());

    VerifyConfig cfg;
    cfg.seed = 7;
    auto r1 = verify_rule(*it, reg, cfg);
    auto r2 = verify_rule(*it, reg, cfg);
    REQUIRE(r1.counterexampleFound);
    CHECK(r1.trialsRun == r2.trialsRun);
    CHECK(bag_equal(r1.bagFrom, r2.bagFrom));
    CHECK(bag_equal(r1.bagTo, r2.bagTo));
    CHECK(r1.instance->domains == r2.instance->domains);
    CHECK(r1.instance->planTables == r2.instance->planTables);

    cfg.seed = 8; // a different seed still refutes, possibly differently
    CHECK(verify_rule(*it, reg, cfg).counterexampleFound);
}

TEST_CASE("sampled instances respect the configured bounds") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    auto it = std::find_if(rules.begin(), rules.end(),
                           [](auto &r) { return r.rule.name == "SemiJoinAggTranspose"; });
    REQUIRE(it != rules.end());
    auto setup = prepare_verification(*it, reg);

    VerifyConfig cfg;
    for (std::uint64_t t = 0; t < 50; ++t) {
        Instance inst = sample_instance(setup.expanded, cfg, t);
        for (auto &[_, dom] : inst.domains) {
            CHECK(dom.size() >= static_cast<size_t>(cfg.minDomain));
            CHECK(dom.size() <= static_cast<size_t>(cfg.maxDomain));
        }
        for (auto &[_, bag] : inst.planTables) CHECK(bag.size() <= cfg.maxRows);
        // function tables are total over their domains (plus NULL)
        for (auto &[sym, table] : inst.funcTables) CHECK(!table.empty());
    }
}

TEST_CASE("injective constraints produce injective samples") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    auto it = std::find_if(rules.begin(), rules.end(),
                           [](auto &r) { return r.rule.name == "DistinctProjectTranspose"; });
    REQUIRE(it != rules.end());
    auto setup = prepare_verification(*it, reg);

    VerifyConfig cfg;
    for (std::uint64_t t = 0; t < 100; ++t) {
        Instance inst = sample_instance(setup.expanded, cfg, t);
        auto &table = inst.funcTables.at("F");
        std::map<Value, int> image;
        for (auto &[in, out] : table)
            if (!std::holds_alternative<std::monostate>(in[0])) ++image[out];
        for (auto &[v, n] : image) CHECK(n == 1);
    }
}

TEST_CASE("rules relying on injectivity fail without it") {
    // same shape as DistinctProjectTranspose but with no constraint: a
    // non-injective F collapses values before Distinct, so this is refutable
    CustomOpRegistry reg;
    auto res = load_rules(R"(rule Unconstrained {
  types X, Z;
  funcs F: X -> Z;
  plans L: Bag<X>;
  from Distinct(Project(x -> F(x), L));
  to Project(x -> F(x), Distinct(L));
})", reg);
    auto &rules = std::get<std::vector<TypedRule>>(res);
    auto rep = verify_rule(rules[0], reg);
    CHECK(rep.counterexampleFound);
}

TEST_CASE("counterexample search time stays within budget") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    VerifyConfig cfg;
    double total = 0;
    for (auto &r : rules) {
        auto rep = verify_rule(r, reg, cfg);
        total += rep.elapsedSeconds;
    }
    CHECK(total < 5.0 * rules.size());
}
