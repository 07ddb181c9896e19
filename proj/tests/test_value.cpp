#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "rulekit/value.hpp"

using namespace rulekit;

namespace {
const Tri F = Tri{false};
const Tri T = Tri{true};
const Tri U = std::nullopt;
} // namespace

TEST_CASE("three-valued NOT truth table") {
    CHECK(tri_not(F) == T);
    CHECK(tri_not(T) == F);
    CHECK(tri_not(U) == U);
}

TEST_CASE("three-valued AND truth table") {
    // Kleene strong conjunction, row by row
    CHECK(tri_and(F, F) == F);
    CHECK(tri_and(F, U) == F);
    CHECK(tri_and(F, T) == F);
    CHECK(tri_and(U, F) == F);
    CHECK(tri_and(U, U) == U);
    CHECK(tri_and(U, T) == U);
    CHECK(tri_and(T, F) == F);
    CHECK(tri_and(T, U) == U);
    CHECK(tri_and(T, T) == T);
}

TEST_CASE("three-valued OR truth table") {
    CHECK(tri_or(F, F) == F); // not Unknown: both operands are definite
    CHECK(tri_or(F, U) == U);
    CHECK(tri_or(F, T) == T);
    CHECK(tri_or(U, F) == U);
    CHECK(tri_or(U, U) == U);
    CHECK(tri_or(U, T) == T);
    CHECK(tri_or(T, F) == T);
    CHECK(tri_or(T, U) == T);
    CHECK(tri_or(T, T) == T);
}

TEST_CASE("de morgan holds over all nine operand pairs") {
    const Tri vals[] = {F, U, T};
    for (Tri a : vals)
        for (Tri b : vals) {
            CHECK(tri_not(tri_and(a, b)) == tri_or(tri_not(a), tri_not(b)));
            CHECK(tri_not(tri_or(a, b)) == tri_and(tri_not(a), tri_not(b)));
        }
}

TEST_CASE("value equality is Unknown when either side is NULL") {
    Value one{std::int64_t{1}}, two{std::int64_t{2}};
    CHECK(tri_eq(one, one) == T);
    CHECK(tri_eq(one, two) == F);
    CHECK(tri_eq(one, kNull) == U);
    CHECK(tri_eq(kNull, one) == U);
    CHECK(tri_eq(kNull, kNull) == U);
    CHECK(is_null(kNull));
    CHECK(!is_null(one));
}

TEST_CASE("bag multiplicity") {
    Bag b;
    Row r1{Value{std::int64_t{1}}};
    Row r2{Value{std::int64_t{2}}};
    b.add(r1);
    b.add(r1, 2);
    b.add(r2);
    CHECK(b.count(r1) == 3);
    CHECK(b.count(r2) == 1);
    CHECK(b.size() == 4);
    CHECK(b.count(Row{Value{std::int64_t{9}}}) == 0);

    b.add(r2, 0); // no-op
    CHECK(b.count(r2) == 1);
}

TEST_CASE("bag equality ignores insertion order, respects counts") {
    Row r1{Value{std::string("x")}};
    Row r2{Value{std::string("y")}};
    Bag a, b;
    a.add(r1);
    a.add(r2);
    b.add(r2);
    b.add(r1);
    CHECK(bag_equal(a, b));
    b.add(r1);
    CHECK(!bag_equal(a, b));
}

TEST_CASE("NULL rows are identical for bag identity") {
    Bag a;
    a.add(Row{kNull});
    a.add(Row{kNull});
    CHECK(a.count(Row{kNull}) == 2);
}
