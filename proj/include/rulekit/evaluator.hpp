#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rulekit/instantiate.hpp"
#include "rulekit/plan_ir.hpp"
#include "rulekit/value.hpp"

namespace rulekit {

struct Table {
    Schema schema;
    Bag rows;
};

struct Database {
    std::map<std::string, Table> tables;
};

struct UnknownTable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TypeErrorAtRuntime : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic pseudo-random aggregate: the result for a group is a pure
/// function of (seed, symbol, canonical multiset of argument tuples),
/// realized by hashing the canonical encoding into a fixed codomain.
struct AggSpec {
    std::uint64_t seed = 0;
    std::vector<Value> codomain; // non-empty
};

/// Interpretations for uninterpreted symbols appearing in a plan (used by
/// the verifier when replaying sampled instances through the evaluator).
/// Scalar/predicate symbols are total lookup tables over the sampled domain;
/// predicate Unknown is encoded as Null.
struct FunctionEnv {
    std::map<std::string, std::map<std::vector<Value>, Value>> tables;
    std::map<std::string, AggSpec> aggs;
};

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, const void *data, size_t n) {
    auto *p = static_cast<const unsigned char *>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t hash_value(std::uint64_t h, const Value &v) {
    auto tag = static_cast<std::uint8_t>(v.index());
    h = fnv1a(h, &tag, 1);
    if (auto *i = std::get_if<std::int64_t>(&v)) return fnv1a(h, i, sizeof(*i));
    if (auto *s = std::get_if<std::string>(&v)) return fnv1a(h, s->data(), s->size());
    if (auto *b = std::get_if<bool>(&v)) return fnv1a(h, b, 1);
    return h; // Null
}

inline Value tri_to_value(Tri t) {
    if (!t) return kNull;
    return Value{*t};
}

inline Tri value_to_tri(const Value &v) {
    if (is_null(v)) return std::nullopt;
    if (auto *b = std::get_if<bool>(&v)) return *b;
    throw TypeErrorAtRuntime("expected a boolean value");
}

struct Evaluator {
    const Database &db;
    const CustomOpRegistry &registry;
    const FunctionEnv *env;

    struct RowCtx {
        const Row *left = nullptr;
        const Row *right = nullptr;
        const Row *only = nullptr;
    };

    static const Row &pick(const RowCtx &ctx, Side side) {
        const Row *r = side == Side::Left ? ctx.left : side == Side::Right ? ctx.right : ctx.only;
        if (!r) throw TypeErrorAtRuntime("column reference uses an unavailable side");
        return *r;
    }

    Value eval_expr(const ScalarExpr &e, const RowCtx &ctx) const {
        if (auto *c = std::get_if<ColRef>(&e.node)) {
            const Row &row = pick(ctx, c->side);
            if (c->index < 0 || static_cast<size_t>(c->index) >= row.size())
                throw TypeErrorAtRuntime("column index out of range");
            return row[c->index];
        }
        if (auto *l = std::get_if<Literal>(&e.node)) return l->value;
        if (auto *f = std::get_if<Call>(&e.node)) return eval_call(*f, ctx);
        auto &x = std::get<ExistsSubplan>(e.node);
        if (!ctx.only) throw TypeErrorAtRuntime("correlated exists outside a single-row context");
        return Value{!eval_plan_impl(*x.subplan, ctx.only).empty()};
    }

    static std::int64_t as_int(const Value &v) {
        if (auto *i = std::get_if<std::int64_t>(&v)) return *i;
        throw TypeErrorAtRuntime("expected an integer value");
    }

    static Tri cmp_less(const Value &a, const Value &b) {
        if (is_null(a) || is_null(b)) return std::nullopt;
        if (a.index() != b.index()) throw TypeErrorAtRuntime("ordered comparison between different types");
        return a < b;
    }

    Value eval_call(const Call &f, const RowCtx &ctx) const {
        if (f.op == CallOp::And) {
            Tri acc = true;
            for (auto &a : f.args) acc = tri_and(acc, value_to_tri(eval_expr(*a, ctx)));
            return tri_to_value(acc);
        }
        if (f.op == CallOp::Or) {
            Tri acc = false;
            for (auto &a : f.args) acc = tri_or(acc, value_to_tri(eval_expr(*a, ctx)));
            return tri_to_value(acc);
        }
        std::vector<Value> args;
        for (auto &a : f.args) args.push_back(eval_expr(*a, ctx));
        switch (f.op) {
            case CallOp::Add:
            case CallOp::Sub:
            case CallOp::Mul: {
                if (args.size() != 2) throw TypeErrorAtRuntime("arithmetic needs two arguments");
                if (is_null(args[0]) || is_null(args[1])) return kNull;
                auto a = as_int(args[0]), b = as_int(args[1]);
                return Value{f.op == CallOp::Add ? a + b : f.op == CallOp::Sub ? a - b : a * b};
            }
            case CallOp::Eq: return tri_to_value(tri_eq(args.at(0), args.at(1)));
            case CallOp::Neq: return tri_to_value(tri_not(tri_eq(args.at(0), args.at(1))));
            case CallOp::Lt: return tri_to_value(cmp_less(args.at(0), args.at(1)));
            case CallOp::Leq: return tri_to_value(tri_not(cmp_less(args.at(1), args.at(0))));
            case CallOp::Gt: return tri_to_value(cmp_less(args.at(1), args.at(0)));
            case CallOp::Geq: return tri_to_value(tri_not(cmp_less(args.at(0), args.at(1))));
            case CallOp::Not: return tri_to_value(tri_not(value_to_tri(args.at(0))));
            case CallOp::IsNull: return Value{is_null(args.at(0))};
            case CallOp::IsNotNull: return Value{!is_null(args.at(0))};
            case CallOp::Uninterp: {
                if (!env) throw TypeErrorAtRuntime("uninterpreted symbol " + f.symbol + " without an environment");
                auto it = env->tables.find(f.symbol);
                if (it == env->tables.end())
                    throw TypeErrorAtRuntime("no interpretation for symbol " + f.symbol);
                auto vt = it->second.find(args);
                if (vt == it->second.end())
                    throw TypeErrorAtRuntime("symbol " + f.symbol + " undefined on an argument tuple");
                return vt->second;
            }
            default: throw TypeErrorAtRuntime("unhandled call op");
        }
    }

    Value eval_agg(const AggCall &a, const std::vector<std::pair<Row, long>> &group) const {
        RowCtx ctx;
        switch (a.func) {
            case AggFunc::Count: {
                long n = 0;
                for (auto &[_, c] : group) n += c;
                return Value{static_cast<std::int64_t>(n)};
            }
            case AggFunc::Sum: {
                std::int64_t acc = 0;
                bool any = false;
                for (auto &[row, c] : group) {
                    ctx.only = &row;
                    Value v = eval_expr(*a.args.at(0), ctx);
                    if (is_null(v)) continue;
                    acc += as_int(v) * c;
                    any = true;
                }
                return any ? Value{acc} : kNull;
            }
            case AggFunc::Min:
            case AggFunc::Max: {
                Value best = kNull;
                for (auto &[row, c] : group) {
                    ctx.only = &row;
                    Value v = eval_expr(*a.args.at(0), ctx);
                    if (is_null(v)) continue;
                    if (is_null(best)) {
                        best = v;
                    } else {
                        bool less = *cmp_less(v, best);
                        if (a.func == AggFunc::Min ? less : *cmp_less(best, v)) best = v;
                    }
                }
                return best;
            }
            case AggFunc::Uninterp: {
                if (!env) throw TypeErrorAtRuntime("uninterpreted aggregate " + a.symbol + " without an environment");
                auto it = env->aggs.find(a.symbol);
                if (it == env->aggs.end())
                    throw TypeErrorAtRuntime("no interpretation for aggregate " + a.symbol);
                // canonical multiset encoding: sorted argument tuples with
                // multiplicities, hashed together with seed and symbol
                std::vector<std::pair<std::vector<Value>, long>> tuples;
                for (auto &[row, c] : group) {
                    ctx.only = &row;
                    std::vector<Value> t;
                    for (auto &arg : a.args) t.push_back(eval_expr(*arg, ctx));
                    tuples.emplace_back(std::move(t), c);
                }
                std::sort(tuples.begin(), tuples.end());
                std::uint64_t h = fnv1a(14695981039346656037ull, &it->second.seed, sizeof(it->second.seed));
                h = fnv1a(h, a.symbol.data(), a.symbol.size());
                for (auto &[t, c] : tuples) {
                    for (auto &v : t) h = hash_value(h, v);
                    h = fnv1a(h, &c, sizeof(c));
                }
                auto &cod = it->second.codomain;
                if (cod.empty()) throw TypeErrorAtRuntime("empty aggregate codomain for " + a.symbol);
                return cod[h % cod.size()];
            }
        }
        throw TypeErrorAtRuntime("unhandled aggregate");
    }

    Bag eval_plan_impl(const LogicalPlan &plan, const Row *outer) const {
        if (auto *s = std::get_if<ScanNode>(&plan.node)) {
            auto it = db.tables.find(s->table);
            if (it == db.tables.end()) throw UnknownTable("unknown table " + s->table);
            if (it->second.schema.arity() != s->schema.arity())
                throw TypeErrorAtRuntime("scan schema arity disagrees with database table " + s->table);
            return it->second.rows;
        }
        if (auto *v = std::get_if<ValuesNode>(&plan.node)) {
            Bag out;
            for (auto &r : v->rows) {
                if (r.size() != v->schema.arity()) throw TypeErrorAtRuntime("values row arity mismatch");
                out.add(r);
            }
            return out;
        }
        if (std::holds_alternative<EmptyNode>(plan.node)) return {};
        if (auto *f = std::get_if<FilterNode>(&plan.node)) {
            Bag in = eval_plan_impl(*f->input, outer);
            Bag out;
            for (auto &[row, c] : in.entries()) {
                RowCtx ctx{outer, nullptr, &row};
                Tri keep = value_to_tri(eval_expr(*f->predicate, ctx));
                if (keep && *keep) out.add(row, c);
            }
            return out;
        }
        if (auto *p = std::get_if<ProjectNode>(&plan.node)) {
            Bag in = eval_plan_impl(*p->input, outer);
            Bag out;
            for (auto &[row, c] : in.entries()) {
                RowCtx ctx{outer, nullptr, &row};
                Row r;
                for (auto &[e, _] : p->items) r.push_back(eval_expr(*e, ctx));
                out.add(std::move(r), c);
            }
            return out;
        }
        if (auto *j = std::get_if<JoinNode>(&plan.node)) {
            Bag l = eval_plan_impl(*j->left, outer);
            Bag r = eval_plan_impl(*j->right, outer);
            Bag out;
            for (auto &[lr, lc] : l.entries()) {
                for (auto &[rr, rc] : r.entries()) {
                    RowCtx ctx{&lr, &rr, nullptr};
                    Tri keep = value_to_tri(eval_expr(*j->predicate, ctx));
                    if (keep && *keep) {
                        Row joined = lr;
                        joined.insert(joined.end(), rr.begin(), rr.end());
                        out.add(std::move(joined), lc * rc);
                    }
                }
            }
            return out;
        }
        if (auto *u = std::get_if<UnionNode>(&plan.node)) {
            Bag out = eval_plan_impl(*u->left, outer);
            Bag rhs = eval_plan_impl(*u->right, outer);
            for (auto &[row, c] : rhs.entries()) out.add(row, c);
            return out;
        }
        if (auto *d = std::get_if<DistinctNode>(&plan.node)) {
            Bag in = eval_plan_impl(*d->input, outer);
            Bag out;
            for (auto &[row, _] : in.entries()) out.add(row, 1);
            return out;
        }
        if (auto *a = std::get_if<AggregateNode>(&plan.node)) {
            Bag in = eval_plan_impl(*a->input, outer);
            // group by key tuple; Nulls compare equal for grouping
            std::map<Row, std::vector<std::pair<Row, long>>> groups;
            for (auto &[row, c] : in.entries()) {
                RowCtx ctx{outer, nullptr, &row};
                Row key;
                for (auto &k : a->group_keys) key.push_back(eval_expr(*k, ctx));
                groups[std::move(key)].emplace_back(row, c);
            }
            Bag out;
            for (auto &[key, group] : groups) {
                Row r = key;
                for (auto &ac : a->aggs) r.push_back(eval_agg(ac, group));
                out.add(std::move(r));
            }
            return out;
        }
        auto &c = std::get<CustomNode>(plan.node);
        return eval_plan_impl(*expand_custom_node(c, registry), outer);
    }
};

} // namespace detail

/// Reference bag-semantics evaluation. Custom nodes are evaluated through
/// their registered expansion; `env` supplies interpretations for any
/// uninterpreted symbols occurring in the plan.
inline Bag eval_plan(const LogicalPlan &plan, const Database &db, const CustomOpRegistry &registry,
                     const FunctionEnv *env = nullptr) {
    detail::Evaluator ev{db, registry, env};
    return ev.eval_plan_impl(plan, nullptr);
}

inline Bag eval_plan(const LogicalPlanPtr &plan, const Database &db, const CustomOpRegistry &registry,
                     const FunctionEnv *env = nullptr) {
    return eval_plan(*plan, db, registry, env);
}

} // namespace rulekit
