#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"

using namespace rulekit;
using namespace testutil;

namespace {

std::variant<TypedRule, std::vector<Diagnostic>> check_one(const std::string &src) {
    CustomOpRegistry reg;
    auto res = load_rules(src, reg);
    if (auto *diags = std::get_if<std::vector<Diagnostic>>(&res)) return *diags;
    auto &rules = std::get<std::vector<TypedRule>>(res);
    REQUIRE(rules.size() == 1);
    return rules[0];
}

bool rejects(const std::string &src, const std::string &needle = "") {
    auto res = check_one(src);
    auto *diags = std::get_if<std::vector<Diagnostic>>(&res);
    if (!diags || diags->empty()) return false;
    if (needle.empty()) return true;
    for (auto &d : *diags)
        if (d.message.find(needle) != std::string::npos) return true;
    return false;
}

} // namespace

TEST_CASE("transpose rule types with a product output") {
    std::string src = slurp(repo_path("corpus/semijoin_agg_transpose.rules"));
    CustomOpRegistry reg;
    auto res = load_rules(src, reg);
    auto *rules = std::get_if<std::vector<TypedRule>>(&res);
    REQUIRE(rules != nullptr);
    REQUIRE(rules->size() == 1);
    // Aggregate output is the key/value product K x V on both sides
    CHECK((*rules)[0].output == TypeRef::product({TypeRef::named("K"), TypeRef::named("V")}));
}

TEST_CASE("function arity mismatches are diagnosed") {
    CHECK(rejects(R"(rule R1 {
  types X;
  funcs P: (X, X) -> Bool;
  plans L: Bag<X>;
  from Filter(x -> P(x), L);
  to L;
})"));
}

TEST_CASE("argument type mismatches are diagnosed") {
    CHECK(rejects(R"(rule R2 {
  types X, K, Y;
  funcs P: (K, Y) -> Bool, G: X -> K;
  plans L: Bag<X>, R: Bag<Y>;
  from Filter(x -> Exists(Filter(y -> P(x, y), R)), L);
  to Filter(x -> Exists(Filter(y -> P(x, y), R)), L);
})", "TypeMismatch"));
}

TEST_CASE("from and to must produce the same row type") {
    CHECK(rejects(R"(rule R3 {
  types X, Y;
  plans L: Bag<X>, R: Bag<Y>;
  from Distinct(L);
  to Distinct(R);
})"));
}

TEST_CASE("scalar symbols cannot be used as aggregates and vice versa") {
    CHECK(rejects(R"(rule R4 {
  types X, K, V;
  funcs G: X -> K;
  aggs A: Bag<X> -> V;
  plans L: Bag<X>;
  from Aggregate(x -> A(x), x -> A(x), L);
  to Aggregate(x -> A(x), x -> A(x), L);
})"));
}

TEST_CASE("constraint subjects must be declared scalar functions") {
    CHECK(rejects(R"(rule R5 {
  types X;
  plans L: Bag<X>;
  from Distinct(L);
  to Distinct(L);
  where injective(F);
})"));
}

TEST_CASE("plan symbols carry their declared row type through joins") {
    auto res = check_one(R"(rule R6 {
  types X, Y;
  funcs P: (X, Y) -> Bool;
  plans L: Bag<X>, R: Bag<Y>;
  from Join(x y -> P(x, y), L, R);
  to Join(x y -> P(x, y), L, R);
})");
    auto *typed = std::get_if<TypedRule>(&res);
    REQUIRE(typed != nullptr);
    CHECK(typed->output == TypeRef::product({TypeRef::named("X"), TypeRef::named("Y")}));
}

TEST_CASE("tuple projection needs a product-typed operand") {
    CHECK(rejects(R"(rule R7 {
  types X;
  funcs P: X -> Bool;
  plans L: Bag<X>;
  from Filter(x -> P(x.0), L);
  to L;
})"));
}

TEST_CASE("the whole corpus typechecks through a shared registry") {
    CustomOpRegistry reg;
    auto rules = load_dir(repo_path("corpus"), reg);
    CHECK(rules.size() == 18);
    for (auto &r : rules) {
        CAPTURE(r.rule.name);
        CHECK(r.output != TypeRef::named(""));
    }
}
