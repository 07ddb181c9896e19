#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"
#include "rulekit/codegen.hpp"

using namespace rulekit;
using namespace testutil;

namespace {

TypedRule find_rule(const std::vector<TypedRule> &rules, const std::string &name) {
    auto it = std::find_if(rules.begin(), rules.end(), [&](auto &r) { return r.rule.name == name; });
    REQUIRE(it != rules.end());
    return *it;
}

Provenance frozen_prov() {
    Provenance p;
    p.version = "0.1.0";
    p.verdict = "noCounterexampleFound";
    p.seed = 0;
    p.trials = 1000;
    return p;
}

} // namespace

TEST_CASE("opmap files parse and reject junk") {
    auto m = parse_opmap(slurp(repo_path("corpus/cockroach.opmap")));
    CHECK(m.at("Aggregate") == "GroupBy");
    CHECK(m.at("Filter") == "Select");
    CHECK(m.at("SemiJoin") == "SemiJoin");
    CHECK(parse_opmap("# only comments\n").empty());
    CHECK_THROWS(parse_opmap("Filter Select\n")); // missing '='
}

TEST_CASE("emitted transpose rule matches the golden file byte for byte") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    auto map = parse_opmap(slurp(repo_path("corpus/cockroach.opmap")));

    auto text = emit_optgen(find_rule(rules, "SemiJoinAggTranspose"), reg, map, frozen_prov());
    CHECK(text == slurp(repo_path("corpus/golden/SemiJoinAggTranspose.opt")));

    auto prune = emit_optgen(find_rule(rules, "PruneEmptyFilter"), reg, map, frozen_prov());
    CHECK(prune == slurp(repo_path("corpus/golden/PruneEmptyFilter.opt")));
}

TEST_CASE("emitted output is stable across repeated runs") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    auto map = parse_opmap(slurp(repo_path("corpus/cockroach.opmap")));
    auto rule = find_rule(rules, "SemiJoinAggTranspose");
    CHECK(emit_optgen(rule, reg, map, frozen_prov()) == emit_optgen(rule, reg, map, frozen_prov()));
}

TEST_CASE("the transpose emission has the expected anatomy") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    auto map = parse_opmap(slurp(repo_path("corpus/cockroach.opmap")));
    auto text = emit_optgen(find_rule(rules, "SemiJoinAggTranspose"), reg, map, frozen_prov());

    CHECK(text.find("[SemiJoinAggTranspose, Normalize]") != std::string::npos);
    CHECK(text.find("(GroupBy") != std::string::npos);
    CHECK(text.find("$private:(GroupingPrivate $groupingCols:* $ordering:*)") != std::string::npos);
    CHECK(text.find("(OnlyRefsCols $on $groupingCols)") != std::string::npos);
    CHECK(text.find("$semiPrivate:*") != std::string::npos);
    CHECK(text.find("(RemapPredicate $on $groupingCols $input)") != std::string::npos);
    CHECK(text.find("# verification: noCounterexampleFound (seed=0, trials=1000)") != std::string::npos);
    // guard count matches an independent scan of the emitted source
    CHECK(count_optgen_guards(find_rule(rules, "SemiJoinAggTranspose"), reg, map) == 1);
    size_t guards = 0;
    for (size_t i = 0; text.find(" &", i) != std::string::npos; ++guards)
        i = text.find(" &", i) + 2;
    CHECK(guards == 1);
}

TEST_CASE("emitted rules reparse as balanced s-expressions") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    auto map = parse_opmap(slurp(repo_path("corpus/cockroach.opmap")));

    int emitted = 0;
    for (auto &r : rules) {
        std::string text;
        try {
            text = emit_optgen(r, reg, map, frozen_prov());
        } catch (const UnsupportedPatternForTarget &) {
            continue; // compound filter predicates have no Optgen shape
        }
        CAPTURE(r.rule.name);
        auto sexprs = parse_sexprs(text);
        CHECK(sexprs.size() >= 2); // match and replace
        ++emitted;
    }
    CHECK(emitted >= 12);
}

TEST_CASE("operators without a mapping are an error, not silent passthrough") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    OpMap empty;
    CHECK_THROWS_AS(emit_optgen(find_rule(rules, "DistinctMerge"), reg, empty, frozen_prov()),
                    UnmappedOperator);
}

TEST_CASE("s-expression reader handles comments and rejects imbalance") {
    auto forms = parse_sexprs("# header\n(A (B $x:*) $y:*)\n(C)\n");
    REQUIRE(forms.size() == 2);
    CHECK_THROWS(parse_sexprs("(A (B)"));
    CHECK_THROWS(parse_sexprs("(A))"));
}
