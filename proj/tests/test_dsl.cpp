#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"

using namespace rulekit;
using namespace testutil;

namespace {

std::string reprint(const std::string &source) {
    auto parsed = parse_rule_file(source);
    auto *file = std::get_if<RuleFile>(&parsed);
    REQUIRE(file != nullptr);
    return print_rule_file(*file);
}

} // namespace

TEST_CASE("printing is a fixed point after one round") {
    for (auto dir : {std::string("corpus"), std::string("tests/mutations")}) {
        for (auto &path : rules_files_in(repo_path(dir))) {
            CAPTURE(path);
            std::string once = reprint(slurp(path));
            std::string twice = reprint(once);
            CHECK(once == twice);
        }
    }
}

TEST_CASE("every corpus and mutation file loads and typechecks") {
    CustomOpRegistry reg;
    auto corpus = load_dir(repo_path("corpus"), reg);
    CHECK(corpus.size() >= 12);
    CustomOpRegistry reg2;
    auto mutants = load_dir(repo_path("tests/mutations"), reg2);
    CHECK(mutants.size() >= 8);
}

TEST_CASE("parsed structure survives a print/parse round trip") {
    CustomOpRegistry reg;
    for (auto &path : rules_files_in(repo_path("corpus"))) {
        CAPTURE(path);
        auto parsed = parse_rule_file(slurp(path));
        auto *file = std::get_if<RuleFile>(&parsed);
        REQUIRE(file != nullptr);
        auto reparsed = parse_rule_file(print_rule_file(*file));
        auto *file2 = std::get_if<RuleFile>(&reparsed);
        REQUIRE(file2 != nullptr);
        REQUIRE(file2->rules.size() == file->rules.size());
        for (size_t i = 0; i < file->rules.size(); ++i) {
            CHECK(file->rules[i].name == file2->rules[i].name);
            CHECK(pattern_equal(file->rules[i].from, file2->rules[i].from));
            CHECK(pattern_equal(file->rules[i].to, file2->rules[i].to));
        }
    }
}

TEST_CASE("reference grammar features parse") {
    const char *src = R"(
-- single-line comment
def Keep(P: X -> Bool, L: Bag<X>) -> Bag<X> = Filter(x -> P(x), L);

rule Sample {
  types X, Y;
  funcs P: (X, Y) -> Bool, F: ((X, Y)) -> X;
  aggs A: Bag<X> -> Y;
  plans L: Bag<X>, R: Bag<Y>;
  from Filter(x -> Exists(Filter(y -> P(x, y) and not y is null, R)), L);
  to Filter(x -> Exists(Filter(y -> P(x, y) and not y is null, R)), L);
  where injective(F);
}
)";
    auto parsed = parse_rule_file(src);
    auto *file = std::get_if<RuleFile>(&parsed);
    REQUIRE(file != nullptr);
    REQUIRE(file->rules.size() == 1);
    auto &r = file->rules[0];
    CHECK(r.name == "Sample");
    REQUIRE(r.constraints.size() == 1);
    CHECK(r.constraints[0].subject == "F");
    // F takes one product-typed parameter, not two parameters
    auto f = std::find_if(r.funcDecls.begin(), r.funcDecls.end(), [](auto &d) { return d.name == "F"; });
    REQUIRE(f != r.funcDecls.end());
    REQUIRE(f->params.size() == 1);
    CHECK(f->params[0].kind == TypeRef::Kind::Product);
}

TEST_CASE("syntax errors carry positions and do not abort later declarations") {
    const char *src = R"(rule Broken {
  types X
  plans L: Bag<X>;
  from L;
  to L;
}

rule Fine {
  types X;
  plans L: Bag<X>;
  from Distinct(L);
  to Distinct(L);
}
)";
    auto parsed = parse_rule_file(src);
    auto *diags = std::get_if<std::vector<Diagnostic>>(&parsed);
    REQUIRE(diags != nullptr);
    REQUIRE(!diags->empty());
    CHECK((*diags)[0].line == 3); // the missing ';' is noticed at the next token
}

TEST_CASE("semantic validation rejects unknown symbols") {
    const char *src = R"(rule Bad {
  types X;
  plans L: Bag<X>;
  from Filter(x -> Q(x), L);
  to L;
}
)";
    CustomOpRegistry reg;
    auto res = load_rules(src, reg);
    auto *diags = std::get_if<std::vector<Diagnostic>>(&res);
    REQUIRE(diags != nullptr);
    CHECK(!diags->empty());
}

TEST_CASE("duplicate rule names are rejected") {
    const char *src = R"(rule Twice { types X; plans L: Bag<X>; from Distinct(L); to Distinct(L); }
rule Twice { types X; plans L: Bag<X>; from Distinct(L); to Distinct(L); }
)";
    auto parsed = parse_rule_file(src);
    CHECK(std::holds_alternative<std::vector<Diagnostic>>(parsed));
}

TEST_CASE("parser survives 10000 fuzzed inputs") {
    std::string seedSrc = slurp(repo_path("corpus/semijoin_agg_transpose.rules"));
    const char vocab[] = "(){}<>,;:.=->aXL def rule from to types funcs aggs plans Bag Bool Filter\"'\n 0123456789";
    std::mt19937_64 rng(42);

    for (int i = 0; i < 10000; ++i) {
        std::string input;
        if (i % 2 == 0) {
            // random soup over the grammar's alphabet
            size_t n = rng() % 200;
            for (size_t j = 0; j < n; ++j) input.push_back(vocab[rng() % (sizeof(vocab) - 1)]);
        } else {
            // corrupted copy of a valid file
            input = seedSrc;
            size_t edits = 1 + rng() % 8;
            for (size_t j = 0; j < edits && !input.empty(); ++j) {
                size_t pos = rng() % input.size();
                switch (rng() % 3) {
                case 0: input[pos] = vocab[rng() % (sizeof(vocab) - 1)]; break;
                case 1: input.erase(pos, 1); break;
                default: input.insert(pos, 1, vocab[rng() % (sizeof(vocab) - 1)]); break;
                }
            }
        }
        auto parsed = parse_rule_file(input); // must neither crash nor hang
        if (auto *file = std::get_if<RuleFile>(&parsed)) {
            // whatever still parses must also reprint and reparse
            auto again = parse_rule_file(print_rule_file(*file));
            CHECK(std::holds_alternative<RuleFile>(again));
        }
    }
}
