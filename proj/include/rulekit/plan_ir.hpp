#pragma once

#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rulekit/value.hpp"

namespace rulekit {

enum class ValueType { Int, Str, Bool };

inline const char *to_string(ValueType t) {
    switch (t) {
        case ValueType::Int: return "Int";
        case ValueType::Str: return "Str";
        case ValueType::Bool: return "Bool";
    }
    return "?";
}

struct Schema {
    std::vector<std::pair<std::string, ValueType>> columns;

    size_t arity() const { return columns.size(); }
    bool operator==(const Schema &) const = default;
};

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Scalar expressions

enum class Side { Left, Right, Only };

inline const char *to_string(Side s) {
    switch (s) {
        case Side::Left: return "left";
        case Side::Right: return "right";
        case Side::Only: return "only";
    }
    return "?";
}

/// Built-in scalar operations. Uninterp references an uninterpreted symbol
/// resolved through a FunctionEnv at evaluation time (used by the verifier
/// when materializing sampled instances as concrete plans).
enum class CallOp {
    Add, Sub, Mul,
    Eq, Neq, Lt, Leq, Gt, Geq,
    And, Or, Not,
    IsNull, IsNotNull,
    Uninterp,
};

struct ScalarExpr;
using ScalarExprPtr = std::shared_ptr<const ScalarExpr>;

struct LogicalPlan;
using LogicalPlanPtr = std::shared_ptr<const LogicalPlan>;

struct ColRef {
    Side side = Side::Only;
    int index = 0;
    bool operator==(const ColRef &) const = default;
};

struct Literal {
    ValueType type = ValueType::Int;
    Value value;
    bool operator==(const Literal &) const = default;
};

struct Call {
    CallOp op = CallOp::Eq;
    std::string symbol;                         // set iff op == Uninterp
    ValueType result_type = ValueType::Bool;    // meaningful iff op == Uninterp
    std::vector<ScalarExprPtr> args;
};

/// Correlated existence test: true iff the subplan yields at least one row.
/// Inside the subplan, colRefs with side=Left refer to the outer row.
struct ExistsSubplan {
    LogicalPlanPtr subplan;
};

struct ScalarExpr {
    std::variant<ColRef, Literal, Call, ExistsSubplan> node;
};

inline ScalarExprPtr col(Side side, int index) {
    return std::make_shared<ScalarExpr>(ScalarExpr{ColRef{side, index}});
}
inline ScalarExprPtr col(int index) { return col(Side::Only, index); }
inline ScalarExprPtr lit(std::int64_t v) {
    return std::make_shared<ScalarExpr>(ScalarExpr{Literal{ValueType::Int, Value{v}}});
}
inline ScalarExprPtr lit(std::string v) {
    return std::make_shared<ScalarExpr>(ScalarExpr{Literal{ValueType::Str, Value{std::move(v)}}});
}
inline ScalarExprPtr lit(bool v) {
    return std::make_shared<ScalarExpr>(ScalarExpr{Literal{ValueType::Bool, Value{v}}});
}
inline ScalarExprPtr null_lit(ValueType t) {
    return std::make_shared<ScalarExpr>(ScalarExpr{Literal{t, kNull}});
}
inline ScalarExprPtr call(CallOp op, std::vector<ScalarExprPtr> args) {
    return std::make_shared<ScalarExpr>(ScalarExpr{Call{op, "", ValueType::Bool, std::move(args)}});
}
inline ScalarExprPtr ucall(std::string symbol, ValueType result_type, std::vector<ScalarExprPtr> args) {
    return std::make_shared<ScalarExpr>(
        ScalarExpr{Call{CallOp::Uninterp, std::move(symbol), result_type, std::move(args)}});
}
inline ScalarExprPtr exists(LogicalPlanPtr subplan) {
    return std::make_shared<ScalarExpr>(ScalarExpr{ExistsSubplan{std::move(subplan)}});
}

// ---------------------------------------------------------------------------
// Aggregate calls

enum class AggFunc { Sum, Count, Min, Max, Uninterp };

/// Sum/Min/Max take exactly one argument; Count takes none (row count).
/// Uninterp carries a symbol name and the argument tuple whose per-group
/// multiset is fed to the sampled aggregate function.
struct AggCall {
    AggFunc func = AggFunc::Count;
    std::string symbol;                      // set iff func == Uninterp
    ValueType result_type = ValueType::Int;  // meaningful iff func == Uninterp
    std::vector<ScalarExprPtr> args;
};

inline AggCall agg_sum(ScalarExprPtr arg) { return AggCall{AggFunc::Sum, "", ValueType::Int, {std::move(arg)}}; }
inline AggCall agg_count() { return AggCall{AggFunc::Count, "", ValueType::Int, {}}; }
inline AggCall agg_min(ScalarExprPtr arg) { return AggCall{AggFunc::Min, "", ValueType::Int, {std::move(arg)}}; }
inline AggCall agg_max(ScalarExprPtr arg) { return AggCall{AggFunc::Max, "", ValueType::Int, {std::move(arg)}}; }
inline AggCall agg_uninterp(std::string symbol, ValueType result_type, std::vector<ScalarExprPtr> args) {
    return AggCall{AggFunc::Uninterp, std::move(symbol), result_type, std::move(args)};
}

// ---------------------------------------------------------------------------
// Logical plans

struct ScanNode {
    std::string table;
    Schema schema;
};
struct ValuesNode {
    Schema schema;
    std::vector<Row> rows;
};
struct EmptyNode {
    Schema schema;
};
struct FilterNode {
    ScalarExprPtr predicate;
    LogicalPlanPtr input;
};
struct ProjectNode {
    std::vector<std::pair<ScalarExprPtr, std::string>> items;
    LogicalPlanPtr input;
};
struct JoinNode {
    ScalarExprPtr predicate;
    LogicalPlanPtr left;
    LogicalPlanPtr right;
};
struct UnionNode {
    LogicalPlanPtr left;
    LogicalPlanPtr right;
};
struct DistinctNode {
    LogicalPlanPtr input;
};
struct AggregateNode {
    std::vector<ScalarExprPtr> group_keys;
    std::vector<AggCall> aggs;
    LogicalPlanPtr input;
};

/// Argument of a registered custom operator node. Scalar/predicate
/// parameters are expression lists (a predicate is a one-element list);
/// their colRefs use side=Only and index into the concatenation of the
/// parameter's declared input row types, in declaration order.
using CustomArg = std::variant<LogicalPlanPtr, std::vector<ScalarExprPtr>, std::vector<AggCall>>;

struct CustomNode {
    std::string op_name;
    std::vector<CustomArg> args;
};

struct LogicalPlan {
    std::variant<ScanNode, ValuesNode, EmptyNode, FilterNode, ProjectNode, JoinNode,
                 UnionNode, DistinctNode, AggregateNode, CustomNode>
        node;
};

inline LogicalPlanPtr scan(std::string table, Schema schema) {
    return std::make_shared<LogicalPlan>(LogicalPlan{ScanNode{std::move(table), std::move(schema)}});
}
inline LogicalPlanPtr values(Schema schema, std::vector<Row> rows) {
    return std::make_shared<LogicalPlan>(LogicalPlan{ValuesNode{std::move(schema), std::move(rows)}});
}
inline LogicalPlanPtr empty(Schema schema) {
    return std::make_shared<LogicalPlan>(LogicalPlan{EmptyNode{std::move(schema)}});
}
inline LogicalPlanPtr filter(ScalarExprPtr predicate, LogicalPlanPtr input) {
    return std::make_shared<LogicalPlan>(LogicalPlan{FilterNode{std::move(predicate), std::move(input)}});
}
inline LogicalPlanPtr project(std::vector<std::pair<ScalarExprPtr, std::string>> items, LogicalPlanPtr input) {
    return std::make_shared<LogicalPlan>(LogicalPlan{ProjectNode{std::move(items), std::move(input)}});
}
inline LogicalPlanPtr join(ScalarExprPtr predicate, LogicalPlanPtr left, LogicalPlanPtr right) {
    return std::make_shared<LogicalPlan>(
        LogicalPlan{JoinNode{std::move(predicate), std::move(left), std::move(right)}});
}
inline LogicalPlanPtr union_all(LogicalPlanPtr left, LogicalPlanPtr right) {
    return std::make_shared<LogicalPlan>(LogicalPlan{UnionNode{std::move(left), std::move(right)}});
}
inline LogicalPlanPtr distinct(LogicalPlanPtr input) {
    return std::make_shared<LogicalPlan>(LogicalPlan{DistinctNode{std::move(input)}});
}
inline LogicalPlanPtr aggregate(std::vector<ScalarExprPtr> keys, std::vector<AggCall> aggs, LogicalPlanPtr input) {
    return std::make_shared<LogicalPlan>(
        LogicalPlan{AggregateNode{std::move(keys), std::move(aggs), std::move(input)}});
}
inline LogicalPlanPtr custom(std::string op_name, std::vector<CustomArg> args) {
    return std::make_shared<LogicalPlan>(LogicalPlan{CustomNode{std::move(op_name), std::move(args)}});
}

// ---------------------------------------------------------------------------
// Structural equality

inline bool plan_equal(const LogicalPlanPtr &a, const LogicalPlanPtr &b);

inline bool expr_equal(const ScalarExprPtr &a, const ScalarExprPtr &b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->node.index() != b->node.index()) return false;
    if (auto *ca = std::get_if<ColRef>(&a->node)) return *ca == std::get<ColRef>(b->node);
    if (auto *la = std::get_if<Literal>(&a->node)) return *la == std::get<Literal>(b->node);
    if (auto *fa = std::get_if<Call>(&a->node)) {
        auto &fb = std::get<Call>(b->node);
        if (fa->op != fb.op || fa->symbol != fb.symbol || fa->args.size() != fb.args.size()) return false;
        for (size_t i = 0; i < fa->args.size(); ++i)
            if (!expr_equal(fa->args[i], fb.args[i])) return false;
        return true;
    }
    auto &ea = std::get<ExistsSubplan>(a->node);
    auto &eb = std::get<ExistsSubplan>(b->node);
    return plan_equal(ea.subplan, eb.subplan);
}

inline bool agg_equal(const AggCall &a, const AggCall &b) {
    if (a.func != b.func || a.symbol != b.symbol || a.args.size() != b.args.size()) return false;
    for (size_t i = 0; i < a.args.size(); ++i)
        if (!expr_equal(a.args[i], b.args[i])) return false;
    return true;
}

inline bool plan_equal(const LogicalPlanPtr &a, const LogicalPlanPtr &b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->node.index() != b->node.index()) return false;
    if (auto *sa = std::get_if<ScanNode>(&a->node)) {
        auto &sb = std::get<ScanNode>(b->node);
        return sa->table == sb.table && sa->schema == sb.schema;
    }
    if (auto *va = std::get_if<ValuesNode>(&a->node)) {
        auto &vb = std::get<ValuesNode>(b->node);
        return va->schema == vb.schema && va->rows == vb.rows;
    }
    if (auto *ea = std::get_if<EmptyNode>(&a->node)) return ea->schema == std::get<EmptyNode>(b->node).schema;
    if (auto *fa = std::get_if<FilterNode>(&a->node)) {
        auto &fb = std::get<FilterNode>(b->node);
        return expr_equal(fa->predicate, fb.predicate) && plan_equal(fa->input, fb.input);
    }
    if (auto *pa = std::get_if<ProjectNode>(&a->node)) {
        auto &pb = std::get<ProjectNode>(b->node);
        if (pa->items.size() != pb.items.size()) return false;
        for (size_t i = 0; i < pa->items.size(); ++i) {
            if (pa->items[i].second != pb.items[i].second) return false;
            if (!expr_equal(pa->items[i].first, pb.items[i].first)) return false;
        }
        return plan_equal(pa->input, pb.input);
    }
    if (auto *ja = std::get_if<JoinNode>(&a->node)) {
        auto &jb = std::get<JoinNode>(b->node);
        return expr_equal(ja->predicate, jb.predicate) && plan_equal(ja->left, jb.left) &&
               plan_equal(ja->right, jb.right);
    }
    if (auto *ua = std::get_if<UnionNode>(&a->node)) {
        auto &ub = std::get<UnionNode>(b->node);
        return plan_equal(ua->left, ub.left) && plan_equal(ua->right, ub.right);
    }
    if (auto *da = std::get_if<DistinctNode>(&a->node))
        return plan_equal(da->input, std::get<DistinctNode>(b->node).input);
    if (auto *ga = std::get_if<AggregateNode>(&a->node)) {
        auto &gb = std::get<AggregateNode>(b->node);
        if (ga->group_keys.size() != gb.group_keys.size() || ga->aggs.size() != gb.aggs.size()) return false;
        for (size_t i = 0; i < ga->group_keys.size(); ++i)
            if (!expr_equal(ga->group_keys[i], gb.group_keys[i])) return false;
        for (size_t i = 0; i < ga->aggs.size(); ++i)
            if (!agg_equal(ga->aggs[i], gb.aggs[i])) return false;
        return plan_equal(ga->input, gb.input);
    }
    auto &ca = std::get<CustomNode>(a->node);
    auto &cb = std::get<CustomNode>(b->node);
    if (ca.op_name != cb.op_name || ca.args.size() != cb.args.size()) return false;
    for (size_t i = 0; i < ca.args.size(); ++i) {
        auto &x = ca.args[i];
        auto &y = cb.args[i];
        if (x.index() != y.index()) return false;
        if (auto *px = std::get_if<LogicalPlanPtr>(&x)) {
            if (!plan_equal(*px, std::get<LogicalPlanPtr>(y))) return false;
        } else if (auto *ex = std::get_if<std::vector<ScalarExprPtr>>(&x)) {
            auto &ey = std::get<std::vector<ScalarExprPtr>>(y);
            if (ex->size() != ey.size()) return false;
            for (size_t j = 0; j < ex->size(); ++j)
                if (!expr_equal((*ex)[j], ey[j])) return false;
        } else {
            auto &ax = std::get<std::vector<AggCall>>(x);
            auto &ay = std::get<std::vector<AggCall>>(y);
            if (ax.size() != ay.size()) return false;
            for (size_t j = 0; j < ax.size(); ++j)
                if (!agg_equal(ax[j], ay[j])) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// split_conjuncts

/// Maximal top-level AND flattening, order-preserving left to right.
inline void split_conjuncts_into(const ScalarExprPtr &expr, std::vector<ScalarExprPtr> &out) {
    if (auto *c = std::get_if<Call>(&expr->node); c && c->op == CallOp::And) {
        for (auto &arg : c->args) split_conjuncts_into(arg, out);
        return;
    }
    out.push_back(expr);
}

inline std::vector<ScalarExprPtr> split_conjuncts(const ScalarExprPtr &expr) {
    std::vector<ScalarExprPtr> out;
    split_conjuncts_into(expr, out);
    return out;
}

/// Re-conjoin a conjunct list; empty list is TRUE.
inline ScalarExprPtr conjoin(const std::vector<ScalarExprPtr> &conjuncts) {
    if (conjuncts.empty()) return lit(true);
    ScalarExprPtr acc = conjuncts[0];
    for (size_t i = 1; i < conjuncts.size(); ++i) acc = call(CallOp::And, {acc, conjuncts[i]});
    return acc;
}

// ---------------------------------------------------------------------------
// column_deps

using ColumnDep = std::pair<Side, int>;

namespace detail {
void collect_plan_outer_deps(const LogicalPlan &plan, std::set<ColumnDep> &out);

inline void collect_expr_deps(const ScalarExpr &expr, std::set<ColumnDep> &out) {
    if (auto *c = std::get_if<ColRef>(&expr.node)) {
        out.insert({c->side, c->index});
    } else if (auto *f = std::get_if<Call>(&expr.node)) {
        for (auto &arg : f->args) collect_expr_deps(*arg, out);
    } else if (auto *e = std::get_if<ExistsSubplan>(&expr.node)) {
        // Correlated refs inside the subplan appear as side=Left at the
        // subplan's own expression positions; they point at the outer row.
        collect_plan_outer_deps(*e->subplan, out);
    }
}

/// Collects side=Left references occurring in a correlated subplan, which by
/// convention denote outer-row columns. The outer row is the single input of
/// the expression holding the Exists, so they surface with their stated side.
inline void collect_outer_refs(const ScalarExpr &expr, std::set<ColumnDep> &out) {
    if (auto *c = std::get_if<ColRef>(&expr.node)) {
        if (c->side == Side::Left) out.insert({c->side, c->index});
    } else if (auto *f = std::get_if<Call>(&expr.node)) {
        for (auto &arg : f->args) collect_outer_refs(*arg, out);
    } else if (auto *e = std::get_if<ExistsSubplan>(&expr.node)) {
        collect_plan_outer_deps(*e->subplan, out);
    }
}

inline void collect_plan_outer_deps(const LogicalPlan &plan, std::set<ColumnDep> &out) {
    if (auto *f = std::get_if<FilterNode>(&plan.node)) {
        collect_outer_refs(*f->predicate, out);
        collect_plan_outer_deps(*f->input, out);
    } else if (auto *p = std::get_if<ProjectNode>(&plan.node)) {
        for (auto &[e, _] : p->items) collect_outer_refs(*e, out);
        collect_plan_outer_deps(*p->input, out);
    } else if (auto *j = std::get_if<JoinNode>(&plan.node)) {
        collect_plan_outer_deps(*j->left, out);
        collect_plan_outer_deps(*j->right, out);
    } else if (auto *u = std::get_if<UnionNode>(&plan.node)) {
        collect_plan_outer_deps(*u->left, out);
        collect_plan_outer_deps(*u->right, out);
    } else if (auto *d = std::get_if<DistinctNode>(&plan.node)) {
        collect_plan_outer_deps(*d->input, out);
    } else if (auto *a = std::get_if<AggregateNode>(&plan.node)) {
        for (auto &k : a->group_keys) collect_outer_refs(*k, out);
        for (auto &ac : a->aggs)
            for (auto &arg : ac.args) collect_outer_refs(*arg, out);
        collect_plan_outer_deps(*a->input, out);
    } else if (auto *c = std::get_if<CustomNode>(&plan.node)) {
        for (auto &arg : c->args) {
            if (auto *pp = std::get_if<LogicalPlanPtr>(&arg)) {
                collect_plan_outer_deps(**pp, out);
            } else if (auto *es = std::get_if<std::vector<ScalarExprPtr>>(&arg)) {
                for (auto &e : *es) collect_outer_refs(*e, out);
            } else {
                for (auto &ac : std::get<std::vector<AggCall>>(arg))
                    for (auto &e : ac.args) collect_outer_refs(*e, out);
            }
        }
    }
}
} // namespace detail

/// Exact set of column references an expression transitively uses, including
/// correlated references inside Exists subplans.
inline std::set<ColumnDep> column_deps(const ScalarExprPtr &expr) {
    std::set<ColumnDep> out;
    detail::collect_expr_deps(*expr, out);
    return out;
}

// ---------------------------------------------------------------------------
// output_schema — declared here, defined after the custom-op registry is
// known (see extension.hpp for registry-aware derivation of custom nodes).

class CustomOpRegistry; // forward; see extension.hpp

Schema output_schema(const LogicalPlan &plan, const CustomOpRegistry &registry);

} // namespace rulekit
