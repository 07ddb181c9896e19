#pragma once
#include "rulekit/dsl.hpp"
#include "rulekit/engine.hpp"
#include "rulekit/evaluator.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#ifndef RULEKIT_SOURCE_DIR
#define RULEKIT_SOURCE_DIR "."
#endif

namespace testutil {

inline std::string repo_path(const std::string &rel) {
    return std::string(RULEKIT_SOURCE_DIR) + "/" + rel;
}

inline std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline std::vector<std::string> rules_files_in(const std::string &dir) {
    std::vector<std::string> out;
    for (auto &e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".rules") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

/// Loads every .rules file in a directory into one shared registry.
inline std::vector<rulekit::TypedRule> load_dir(const std::string &dir, rulekit::CustomOpRegistry &registry) {
    std::vector<rulekit::TypedRule> all;
    for (auto &f : rules_files_in(dir)) {
        auto res = rulekit::load_rules(slurp(f), registry);
        if (auto *diags = std::get_if<std::vector<rulekit::Diagnostic>>(&res))
            throw std::runtime_error(f + ": " + (diags->empty() ? "load failed" : (*diags)[0].message));
        for (auto &r : std::get<std::vector<rulekit::TypedRule>>(res)) all.push_back(std::move(r));
    }
    return all;
}

inline rulekit::Schema order_schema() {
    return rulekit::Schema{{{"cust", rulekit::ValueType::Str}, {"amt", rulekit::ValueType::Int}}};
}

inline rulekit::Schema rev_schema() {
    return rulekit::Schema{{{"author", rulekit::ValueType::Str}, {"rating", rulekit::ValueType::Int}}};
}

/// Revenue-per-customer example plan: semi-join of an aggregate against a
/// reviews table, with the semi-join kept as a custom operator.
inline rulekit::LogicalPlanPtr build_example_plan() {
    using namespace rulekit;
    auto agg = aggregate({col(0)}, {agg_sum(col(1))}, scan("Order", order_schema()));
    auto pred = call(CallOp::And, {call(CallOp::Eq, {col(0), col(2)}),
                                   call(CallOp::Leq, {col(3), lit(std::int64_t{1})})});
    return custom("SemiJoin", {std::vector<ScalarExprPtr>{pred}, agg, scan("Rev", rev_schema())});
}

/// The same query with the semi-join pushed below the aggregate.
inline rulekit::LogicalPlanPtr build_example_rewritten() {
    using namespace rulekit;
    auto pred = call(CallOp::And, {call(CallOp::Eq, {col(0), col(2)}),
                                   call(CallOp::Leq, {col(3), lit(std::int64_t{1})})});
    auto sj = custom("SemiJoin",
                     {std::vector<ScalarExprPtr>{pred}, scan("Order", order_schema()), scan("Rev", rev_schema())});
    return aggregate({col(0)}, {agg_sum(col(1))}, sj);
}

inline rulekit::Database build_example_db() {
    using namespace rulekit;
    Database db;
    db.tables["Order"] = Table{order_schema(), {}};
    db.tables["Order"].rows.add({Value{std::string("c1")}, Value{std::int64_t{10}}});
    db.tables["Order"].rows.add({Value{std::string("c1")}, Value{std::int64_t{5}}});
    db.tables["Order"].rows.add({Value{std::string("c2")}, Value{std::int64_t{7}}});
    db.tables["Rev"] = Table{rev_schema(), {}};
    db.tables["Rev"].rows.add({Value{std::string("c1")}, Value{std::int64_t{1}}});
    return db;
}

/// Small deterministic row generator for randomized database tests.
struct RowGen {
    std::mt19937_64 rng;
    explicit RowGen(std::uint64_t seed) : rng(seed) {}

    rulekit::Value cell(rulekit::ValueType t) {
        using namespace rulekit;
        if (rng() % 5 == 0) return kNull;
        switch (t) {
        case ValueType::Int: return Value{static_cast<std::int64_t>(rng() % 4)};
        case ValueType::Str: return Value{std::string(1, static_cast<char>('a' + rng() % 3))};
        case ValueType::Bool: return Value{rng() % 2 == 0};
        }
        return kNull;
    }

    rulekit::Table table(const rulekit::Schema &schema, int maxRows) {
        rulekit::Table t{schema, {}};
        int n = static_cast<int>(rng() % (maxRows + 1));
        for (int i = 0; i < n; ++i) {
            rulekit::Row r;
            for (auto &c : schema.columns) r.push_back(cell(c.second));
            t.rows.add(std::move(r));
        }
        return t;
    }
};

} // namespace testutil
