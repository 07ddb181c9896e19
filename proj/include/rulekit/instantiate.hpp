#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rulekit/extension.hpp"
#include "rulekit/pattern.hpp"
#include "rulekit/plan_ir.hpp"

namespace rulekit {

struct MissingBinding : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedPattern : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Concrete binding of an uninterpreted function/predicate/aggregate symbol.
/// Bodies are expressed against the symbol's formal slots: colRefs with
/// side=Only index into the concatenation of all flattened parameters.
/// Predicates and scalars carry one body expression per output column;
/// aggregate symbols carry AggCalls instead.
struct FunctionBinding {
    std::vector<int> param_widths;        // flattened column count per formal parameter
    std::vector<std::string> slot_names;  // display name per formal slot (for traces)
    std::vector<std::string> out_names;   // output column names when used in a projection
    std::vector<ValueType> out_types;
    TypeRef result = TypeRef::boolean();
    std::variant<std::vector<ScalarExprPtr>, std::vector<AggCall>> body;

    bool is_aggregate() const { return std::holds_alternative<std::vector<AggCall>>(body); }
    int total_width() const {
        int n = 0;
        for (int w : param_widths) n += w;
        return n;
    }
};

/// An instantiation of a rule's uninterpreted symbols discovered by matching
/// (or sampled by the verifier). typeInst records, per abstract type symbol,
/// the concrete column slots it spans.
struct MatchContext {
    std::map<std::string, LogicalPlanPtr> plans;
    std::map<std::string, FunctionBinding> funcs;
    std::map<std::string, Schema> typeInst;
};

/// Flattened column count of an abstract row type under a type instantiation.
inline int typeref_width(const TypeRef &t, const std::map<std::string, Schema> &typeInst) {
    if (t.kind == TypeRef::Kind::Bool) return 1;
    if (t.kind == TypeRef::Kind::Named) {
        auto it = typeInst.find(t.name);
        if (it == typeInst.end()) throw MissingBinding("type symbol " + t.name + " is not instantiated");
        return static_cast<int>(it->second.arity());
    }
    int n = 0;
    for (auto &c : t.components) n += typeref_width(c, typeInst);
    return n;
}

/// Concrete schema of an abstract row type under a type instantiation.
inline Schema typeref_schema(const TypeRef &t, const std::map<std::string, Schema> &typeInst) {
    if (t.kind == TypeRef::Kind::Named) {
        auto it = typeInst.find(t.name);
        if (it == typeInst.end()) throw MissingBinding("type symbol " + t.name + " is not instantiated");
        return it->second;
    }
    if (t.kind == TypeRef::Kind::Product) {
        Schema out;
        for (auto &c : t.components) {
            auto part = typeref_schema(c, typeInst);
            out.columns.insert(out.columns.end(), part.columns.begin(), part.columns.end());
        }
        return out;
    }
    throw MissingBinding("Bool has no row schema");
}

namespace detail {

// --- expression cloning helpers ---------------------------------------------

inline ScalarExprPtr remake_call(const Call &c, std::vector<ScalarExprPtr> args) {
    return std::make_shared<ScalarExpr>(ScalarExpr{Call{c.op, c.symbol, c.result_type, std::move(args)}});
}

/// Rebases a single-row expression (side=Only refs) into a correlated outer
/// reference (side=Left) for splicing inside an Exists subplan.
inline ScalarExprPtr to_outer_ref(const ScalarExprPtr &e) {
    if (auto *c = std::get_if<ColRef>(&e->node)) {
        if (c->side != Side::Only)
            throw UnsupportedPattern("cannot correlate an expression that is not in single-row form");
        return col(Side::Left, c->index);
    }
    if (std::holds_alternative<Literal>(e->node)) return e;
    if (auto *f = std::get_if<Call>(&e->node)) {
        std::vector<ScalarExprPtr> args;
        for (auto &a : f->args) args.push_back(to_outer_ref(a));
        return remake_call(*f, std::move(args));
    }
    throw UnsupportedPattern("nested correlated subqueries are not supported");
}

LogicalPlanPtr subst_outer_in_plan(const LogicalPlanPtr &plan, const std::vector<ScalarExprPtr> &slots);

/// Replaces correlated outer references (side=Left) inside a subplan's own
/// expressions; used when substituting actual arguments into a function
/// binding whose body contains an Exists. Does not descend into nested
/// Exists subplans (their Left refs point one level up only) nor into join
/// predicates (their Left refs are join-local).
inline ScalarExprPtr subst_outer_in_expr(const ScalarExprPtr &e, const std::vector<ScalarExprPtr> &slots) {
    if (auto *c = std::get_if<ColRef>(&e->node)) {
        if (c->side == Side::Left) {
            if (c->index < 0 || static_cast<size_t>(c->index) >= slots.size())
                throw MissingBinding("correlated slot index out of range");
            return to_outer_ref(slots[c->index]);
        }
        return e;
    }
    if (std::holds_alternative<Literal>(e->node)) return e;
    if (auto *f = std::get_if<Call>(&e->node)) {
        std::vector<ScalarExprPtr> args;
        bool changed = false;
        for (auto &a : f->args) {
            args.push_back(subst_outer_in_expr(a, slots));
            changed |= args.back() != a;
        }
        return changed ? remake_call(*f, std::move(args)) : e;
    }
    return e; // nested Exists: leave intact
}

inline LogicalPlanPtr subst_outer_in_plan(const LogicalPlanPtr &plan, const std::vector<ScalarExprPtr> &slots) {
    if (auto *f = std::get_if<FilterNode>(&plan->node)) {
        auto pred = subst_outer_in_expr(f->predicate, slots);
        auto input = subst_outer_in_plan(f->input, slots);
        return (pred == f->predicate && input == f->input) ? plan : filter(pred, input);
    }
    if (auto *p = std::get_if<ProjectNode>(&plan->node)) {
        std::vector<std::pair<ScalarExprPtr, std::string>> items;
        bool changed = false;
        for (auto &[e, n] : p->items) {
            items.emplace_back(subst_outer_in_expr(e, slots), n);
            changed |= items.back().first != e;
        }
        auto input = subst_outer_in_plan(p->input, slots);
        return (!changed && input == p->input) ? plan : project(std::move(items), input);
    }
    if (auto *j = std::get_if<JoinNode>(&plan->node)) {
        auto l = subst_outer_in_plan(j->left, slots);
        auto r = subst_outer_in_plan(j->right, slots);
        return (l == j->left && r == j->right) ? plan : join(j->predicate, l, r);
    }
    if (auto *u = std::get_if<UnionNode>(&plan->node)) {
        auto l = subst_outer_in_plan(u->left, slots);
        auto r = subst_outer_in_plan(u->right, slots);
        return (l == u->left && r == u->right) ? plan : union_all(l, r);
    }
    if (auto *d = std::get_if<DistinctNode>(&plan->node)) {
        auto input = subst_outer_in_plan(d->input, slots);
        return input == d->input ? plan : distinct(input);
    }
    if (auto *a = std::get_if<AggregateNode>(&plan->node)) {
        std::vector<ScalarExprPtr> keys;
        std::vector<AggCall> aggs;
        bool changed = false;
        for (auto &k : a->group_keys) {
            keys.push_back(subst_outer_in_expr(k, slots));
            changed |= keys.back() != k;
        }
        for (auto &ac : a->aggs) {
            std::vector<ScalarExprPtr> args;
            for (auto &e : ac.args) {
                args.push_back(subst_outer_in_expr(e, slots));
                changed |= args.back() != e;
            }
            aggs.push_back(AggCall{ac.func, ac.symbol, ac.result_type, std::move(args)});
        }
        auto input = subst_outer_in_plan(a->input, slots);
        return (!changed && input == a->input) ? plan : aggregate(std::move(keys), std::move(aggs), input);
    }
    if (auto *c = std::get_if<CustomNode>(&plan->node)) {
        std::vector<CustomArg> args;
        bool changed = false;
        for (auto &arg : c->args) {
            if (auto *pp = std::get_if<LogicalPlanPtr>(&arg)) {
                args.emplace_back(subst_outer_in_plan(*pp, slots));
                changed |= std::get<LogicalPlanPtr>(args.back()) != *pp;
            } else if (auto *es = std::get_if<std::vector<ScalarExprPtr>>(&arg)) {
                std::vector<ScalarExprPtr> out;
                for (auto &e : *es) {
                    out.push_back(subst_outer_in_expr(e, slots));
                    changed |= out.back() != e;
                }
                args.emplace_back(std::move(out));
            } else {
                std::vector<AggCall> out;
                for (auto &ac : std::get<std::vector<AggCall>>(arg)) {
                    std::vector<ScalarExprPtr> as;
                    for (auto &e : ac.args) {
                        as.push_back(subst_outer_in_expr(e, slots));
                        changed |= as.back() != e;
                    }
                    out.push_back(AggCall{ac.func, ac.symbol, ac.result_type, std::move(as)});
                }
                args.emplace_back(std::move(out));
            }
        }
        return changed ? custom(c->op_name, std::move(args)) : plan;
    }
    return plan; // scan / values / empty
}

/// Substitutes actual argument expressions for a function binding's formal
/// slots (side=Only colRefs at body level; side=Left inside Exists subplans).
inline ScalarExprPtr subst_slots(const ScalarExprPtr &e, const std::vector<ScalarExprPtr> &slots) {
    if (auto *c = std::get_if<ColRef>(&e->node)) {
        if (c->side != Side::Only) throw MissingBinding("function binding body references a non-formal column");
        if (c->index < 0 || static_cast<size_t>(c->index) >= slots.size())
            throw MissingBinding("formal slot index out of range");
        return slots[c->index];
    }
    if (std::holds_alternative<Literal>(e->node)) return e;
    if (auto *f = std::get_if<Call>(&e->node)) {
        std::vector<ScalarExprPtr> args;
        for (auto &a : f->args) args.push_back(subst_slots(a, slots));
        return remake_call(*f, std::move(args));
    }
    auto &x = std::get<ExistsSubplan>(e->node);
    return exists(subst_outer_in_plan(x.subplan, slots));
}

// --- transform emission ------------------------------------------------------

struct VarRange {
    Side side = Side::Only;
    int offset = 0;
    int width = 0;
};

struct EmitScope {
    std::map<std::string, VarRange> vars;
    std::map<std::string, TypeRef> var_types; // only when a binder type is known
    const EmitScope *outer = nullptr;         // crossing this boundary correlates (Only -> Left)
};

struct Emitted {
    std::vector<ScalarExprPtr> exprs;
    TypeRef type = TypeRef::named(""); // empty name: unknown
};

struct Emitter {
    const PatternTypes &types;
    const MatchContext &ctx;
    const CustomOpRegistry &registry;

    const FunctionBinding &binding(const std::string &name) const {
        auto it = ctx.funcs.find(name);
        if (it == ctx.funcs.end()) throw MissingBinding("no binding for function symbol " + name);
        return it->second;
    }

    // Resolves a variable through the scope chain; each crossed Exists
    // boundary turns an Only-range into a correlated Left-range (one level).
    struct ResolvedVar {
        VarRange range;
        TypeRef type;
    };

    ResolvedVar lookup(const std::string &name, const EmitScope &scope) const {
        const EmitScope *s = &scope;
        int depth = 0;
        while (s) {
            auto it = s->vars.find(name);
            if (it != s->vars.end()) {
                VarRange r = it->second;
                if (depth > 0) {
                    if (depth > 1) throw UnsupportedPattern("variable " + name + " crosses two subquery levels");
                    if (r.side != Side::Only)
                        throw UnsupportedPattern("cannot correlate into a join context (variable " + name + ")");
                    r.side = Side::Left;
                }
                auto tt = s->var_types.find(name);
                return {r, tt == s->var_types.end() ? TypeRef::named("") : tt->second};
            }
            if (s->outer) ++depth;
            s = s->outer;
        }
        throw MissingBinding("unbound variable " + name);
    }

    std::vector<TypeRef> binder_types(const void *key, size_t n_binders) const {
        auto it = types.binders.find(key);
        if (it != types.binders.end() && it->second.size() == n_binders) return it->second;
        return {};
    }

    /// Installs a binder's names over a column range. Single-name binders
    /// cover the whole range; destructuring splits by component widths,
    /// which requires the binder's type annotation.
    void push_binder(EmitScope &scope, const Binder &b, const TypeRef &btype, Side side, int offset,
                     int width) const {
        if (b.names.size() == 1) {
            scope.vars[b.names[0]] = {side, offset, width};
            if (btype.kind != TypeRef::Kind::Named || !btype.name.empty()) scope.var_types[b.names[0]] = btype;
            return;
        }
        if (btype.kind != TypeRef::Kind::Product || btype.components.size() != b.names.size())
            throw MissingBinding("destructuring binder requires a product type annotation of matching arity");
        int off = offset;
        for (size_t i = 0; i < b.names.size(); ++i) {
            int w = typeref_width(btype.components[i], ctx.typeInst);
            scope.vars[b.names[i]] = {side, off, w};
            scope.var_types[b.names[i]] = btype.components[i];
            off += w;
        }
        if (off - offset != width)
            throw MissingBinding("binder type width disagrees with the input schema");
    }

    static std::vector<ScalarExprPtr> range_cols(const VarRange &r) {
        std::vector<ScalarExprPtr> out;
        for (int i = 0; i < r.width; ++i) out.push_back(col(r.side, r.offset + i));
        return out;
    }

    Emitted emit_expr(const ExprPatternPtr &e, const EmitScope &scope) const {
        if (auto *v = std::get_if<EVar>(&e->node)) {
            auto rv = lookup(v->name, scope);
            return {range_cols(rv.range), rv.type};
        }
        if (auto *c = std::get_if<EConst>(&e->node)) {
            auto l = std::make_shared<ScalarExpr>(ScalarExpr{c->value});
            return {{l}, c->value.type == ValueType::Bool ? TypeRef::boolean() : TypeRef::named("")};
        }
        if (auto *t = std::get_if<ETupleProject>(&e->node)) {
            auto base = emit_expr(t->base, scope);
            if (base.type.kind != TypeRef::Kind::Product ||
                static_cast<size_t>(t->index) >= base.type.components.size())
                throw MissingBinding("tuple projection on a non-product value");
            int off = 0;
            for (int i = 0; i < t->index; ++i) off += typeref_width(base.type.components[i], ctx.typeInst);
            int w = typeref_width(base.type.components[t->index], ctx.typeInst);
            std::vector<ScalarExprPtr> slice(base.exprs.begin() + off, base.exprs.begin() + off + w);
            return {std::move(slice), base.type.components[t->index]};
        }
        auto &a = std::get<EApply>(e->node);
        auto &fb = binding(a.func);
        if (fb.is_aggregate()) throw MissingBinding(a.func + " is an aggregate symbol used as a scalar");
        auto slots = emit_args(a.args, fb, scope);
        std::vector<ScalarExprPtr> out;
        for (auto &bodyExpr : std::get<std::vector<ScalarExprPtr>>(fb.body))
            out.push_back(subst_slots(bodyExpr, slots));
        return {std::move(out), fb.result};
    }

    std::vector<ScalarExprPtr> emit_args(const std::vector<ExprPatternPtr> &args, const FunctionBinding &fb,
                                         const EmitScope &scope) const {
        if (args.size() != fb.param_widths.size())
            throw MissingBinding("argument count disagrees with the function binding");
        std::vector<ScalarExprPtr> slots;
        for (size_t i = 0; i < args.size(); ++i) {
            auto em = emit_expr(args[i], scope);
            if (static_cast<int>(em.exprs.size()) != fb.param_widths[i])
                throw MissingBinding("argument width disagrees with the function binding");
            slots.insert(slots.end(), em.exprs.begin(), em.exprs.end());
        }
        return slots;
    }

    ScalarExprPtr emit_pred(const PredPatternPtr &p, const EmitScope &scope) const {
        if (auto *a = std::get_if<PApply>(&p->node)) {
            auto &fb = binding(a->func);
            if (fb.is_aggregate()) throw MissingBinding(a->func + " is an aggregate symbol used as a predicate");
            auto &body = std::get<std::vector<ScalarExprPtr>>(fb.body);
            if (body.size() != 1) throw MissingBinding(a->func + " is bound to a tuple-valued body");
            return subst_slots(body[0], emit_args(a->args, fb, scope));
        }
        if (std::holds_alternative<PTop>(p->node)) return lit(true);
        if (std::holds_alternative<PBottom>(p->node)) return lit(false);
        if (auto *n = std::get_if<PNot>(&p->node)) return call(CallOp::Not, {emit_pred(n->arg, scope)});
        if (auto *c = std::get_if<PAnd>(&p->node))
            return call(CallOp::And, {emit_pred(c->left, scope), emit_pred(c->right, scope)});
        if (auto *c = std::get_if<POr>(&p->node))
            return call(CallOp::Or, {emit_pred(c->left, scope), emit_pred(c->right, scope)});
        if (auto *c = std::get_if<PCompare>(&p->node)) {
            auto l = emit_expr(c->left, scope);
            auto r = emit_expr(c->right, scope);
            if (l.exprs.size() != r.exprs.size())
                throw MissingBinding("comparison between values of different widths");
            CallOp cmp = c->op == PCompare::Op::Eq ? CallOp::Eq : CallOp::Neq;
            CallOp fold = c->op == PCompare::Op::Eq ? CallOp::And : CallOp::Or;
            ScalarExprPtr acc;
            for (size_t i = 0; i < l.exprs.size(); ++i) {
                auto one = call(cmp, {l.exprs[i], r.exprs[i]});
                acc = acc ? call(fold, {acc, one}) : one;
            }
            return acc ? acc : lit(c->op == PCompare::Op::Eq);
        }
        if (auto *n = std::get_if<PNullTest>(&p->node)) {
            auto a = emit_expr(n->arg, scope);
            if (a.exprs.size() != 1) throw MissingBinding("null test on a tuple-valued expression");
            return call(n->negated ? CallOp::IsNotNull : CallOp::IsNull, {a.exprs[0]});
        }
        auto &x = std::get<PExists>(p->node);
        return exists(emit_plan(x.subplan, &scope));
    }

    std::vector<AggCall> emit_agg(const AggPattern &a, const EmitScope &scope) const {
        auto &fb = binding(a.func);
        if (!fb.is_aggregate()) throw MissingBinding(a.func + " is not bound as an aggregate");
        // The single formal parameter is the element row; its slots are the
        // flattened argument expressions.
        std::vector<ExprPatternPtr> args = a.args;
        auto slots = emit_args(args, fb, scope);
        std::vector<AggCall> out;
        for (auto &ac : std::get<std::vector<AggCall>>(fb.body)) {
            std::vector<ScalarExprPtr> as;
            for (auto &e : ac.args) as.push_back(subst_slots(e, slots));
            out.push_back(AggCall{ac.func, ac.symbol, ac.result_type, std::move(as)});
        }
        return out;
    }

    TypeRef binder_type_or(const void *key, size_t idx, size_t n) const {
        auto ts = binder_types(key, n);
        return ts.empty() ? TypeRef::named("") : ts[idx];
    }

    LogicalPlanPtr emit_plan(const PlanPatternPtr &q, const EmitScope *outer) const {
        if (auto *s = std::get_if<SymbolPat>(&q->node)) {
            auto it = ctx.plans.find(s->name);
            if (it == ctx.plans.end()) throw MissingBinding("no binding for plan symbol " + s->name);
            return it->second;
        }
        if (auto *e = std::get_if<EmptyPat>(&q->node)) return empty(typeref_schema(e->rowType, ctx.typeInst));
        if (auto *f = std::get_if<FilterPat>(&q->node)) {
            auto input = emit_plan(f->input, outer);
            Schema in = output_schema(*input, registry);
            EmitScope scope{{}, {}, outer};
            push_binder(scope, f->binder, binder_type_or(q.get(), 0, 1), Side::Only, 0,
                        static_cast<int>(in.arity()));
            return filter(emit_pred(f->predicate, scope), input);
        }
        if (auto *p = std::get_if<ProjectPat>(&q->node)) {
            auto input = emit_plan(p->input, outer);
            Schema in = output_schema(*input, registry);
            EmitScope scope{{}, {}, outer};
            push_binder(scope, p->binder, binder_type_or(q.get(), 0, 1), Side::Only, 0,
                        static_cast<int>(in.arity()));
            auto em = emit_expr(p->expr, scope);
            std::vector<std::pair<ScalarExprPtr, std::string>> items;
            auto names = project_names(p->expr, em, in);
            for (size_t i = 0; i < em.exprs.size(); ++i) items.emplace_back(em.exprs[i], names[i]);
            return project(std::move(items), input);
        }
        if (auto *j = std::get_if<JoinPat>(&q->node)) {
            auto l = emit_plan(j->left, outer);
            auto r = emit_plan(j->right, outer);
            Schema ls = output_schema(*l, registry);
            Schema rs = output_schema(*r, registry);
            EmitScope scope{{}, {}, outer};
            push_binder(scope, j->left_binder, binder_type_or(q.get(), 0, 2), Side::Left, 0,
                        static_cast<int>(ls.arity()));
            push_binder(scope, j->right_binder, binder_type_or(q.get(), 1, 2), Side::Right, 0,
                        static_cast<int>(rs.arity()));
            return join(emit_pred(j->predicate, scope), l, r);
        }
        if (auto *u = std::get_if<UnionPat>(&q->node))
            return union_all(emit_plan(u->left, outer), emit_plan(u->right, outer));
        if (auto *d = std::get_if<DistinctPat>(&q->node)) return distinct(emit_plan(d->input, outer));
        if (auto *g = std::get_if<AggregatePat>(&q->node)) {
            auto input = emit_plan(g->input, outer);
            Schema in = output_schema(*input, registry);
            EmitScope scope{{}, {}, outer};
            push_binder(scope, g->binder, binder_type_or(q.get(), 0, 1), Side::Only, 0,
                        static_cast<int>(in.arity()));
            auto keys = emit_expr(g->key, scope);
            return aggregate(keys.exprs, emit_agg(g->agg, scope), input);
        }

        auto &c = std::get<CustomPat>(q->node);
        const auto &def = registry.at(c.op_name);
        if (c.args.size() != def.params.size())
            throw MissingBinding("custom operator " + c.op_name + " applied with wrong arity");
        std::vector<CustomArg> args;
        for (size_t i = 0; i < c.args.size(); ++i) {
            if (auto *pp = std::get_if<PlanPatternPtr>(&c.args[i])) {
                args.emplace_back(emit_plan(*pp, outer));
                continue;
            }
            auto &lam = std::get<LambdaPat>(c.args[i]);
            EmitScope scope{{}, {}, outer};
            auto bts = binder_types(&lam, lam.binders.size());
            int off = 0;
            for (size_t bi = 0; bi < lam.binders.size(); ++bi) {
                TypeRef bt = bts.empty() ? lambda_binder_type(def, i, bi) : bts[bi];
                int w = typeref_width(bt, ctx.typeInst);
                push_binder(scope, lam.binders[bi], bt, Side::Only, off, w);
                off += w;
            }
            if (auto *pb = std::get_if<PredPatternPtr>(&lam.body)) {
                args.emplace_back(std::vector<ScalarExprPtr>{emit_pred(*pb, scope)});
            } else if (auto *eb = std::get_if<ExprPatternPtr>(&lam.body)) {
                args.emplace_back(emit_expr(*eb, scope).exprs);
            } else {
                args.emplace_back(emit_agg(std::get<AggPattern>(lam.body), scope));
            }
        }
        return custom(c.op_name, std::move(args));
    }

    /// Falls back to the registered parameter signature when the lambda
    /// carries no type annotation (e.g. contexts built without typecheck).
    static TypeRef lambda_binder_type(const CustomOpDef &def, size_t param_idx, size_t binder_idx) {
        auto &p = def.params[param_idx];
        if (binder_idx < p.params.size()) return p.params[binder_idx];
        throw MissingBinding("no type available for a lambda binder of " + def.name);
    }

    std::vector<std::string> project_names(const ExprPatternPtr &e, const Emitted &em, const Schema &in) const {
        std::vector<std::string> names;
        if (auto *a = std::get_if<EApply>(&e->node)) {
            auto &fb = binding(a->func);
            if (fb.out_names.size() == em.exprs.size()) return fb.out_names;
        }
        for (size_t i = 0; i < em.exprs.size(); ++i) {
            if (auto *c = std::get_if<ColRef>(&em.exprs[i]->node);
                c && c->side == Side::Only && static_cast<size_t>(c->index) < in.arity()) {
                names.push_back(in.columns[c->index].first);
            } else {
                names.push_back("c" + std::to_string(i));
            }
        }
        return names;
    }
};

} // namespace detail

/// Bottom-up instantiation of a transform pattern under a match context:
/// plan symbols are replaced by their bound subplans, function applications
/// by their bound bodies with arguments composed in (column references
/// remapped through the type instantiation).
inline LogicalPlanPtr apply_transform(const PlanPatternPtr &pattern, const PatternTypes &types,
                                      const MatchContext &ctx, const CustomOpRegistry &registry) {
    detail::Emitter em{types, ctx, registry};
    return em.emit_plan(pattern, nullptr);
}

/// Expands one concrete custom node into core operators by building a match
/// context from its arguments and instantiating the definition's semantics.
inline LogicalPlanPtr expand_custom_node(const CustomNode &node, const CustomOpRegistry &registry) {
    const auto &def = registry.at(node.op_name);
    if (node.args.size() != def.params.size())
        throw MissingBinding("custom node " + node.op_name + " has wrong arity");

    MatchContext ctx;
    // Plan arguments fix the type instantiation.
    for (size_t i = 0; i < node.args.size(); ++i) {
        if (def.params[i].kind != ParamKind::Plan) continue;
        auto &sub = std::get<LogicalPlanPtr>(node.args[i]);
        ctx.plans[def.params[i].name] = sub;
        detail::bind_type_schema(def.params[i].rowType, output_schema(*sub, registry), ctx.typeInst);
    }
    for (size_t i = 0; i < node.args.size(); ++i) {
        auto &p = def.params[i];
        if (p.kind == ParamKind::Plan) continue;
        FunctionBinding fb;
        Schema formal;
        for (auto &pt : p.params) {
            auto ps = typeref_schema(pt, ctx.typeInst);
            fb.param_widths.push_back(static_cast<int>(ps.arity()));
            for (auto &[n, t] : ps.columns) {
                fb.slot_names.push_back(n);
                formal.columns.emplace_back(n, t);
            }
        }
        fb.result = p.kind == ParamKind::Predicate ? TypeRef::boolean() : p.result;
        if (p.kind == ParamKind::Aggregate) {
            fb.body = std::get<std::vector<AggCall>>(node.args[i]);
            detail::ExprTypeEnv env{nullptr, nullptr, &formal};
            for (auto &ac : std::get<std::vector<AggCall>>(fb.body)) {
                fb.out_types.push_back(detail::infer_agg_type(ac, env));
                fb.out_names.push_back(detail::agg_column_name(ac, formal));
            }
        } else {
            fb.body = std::get<std::vector<ScalarExprPtr>>(node.args[i]);
            detail::ExprTypeEnv env{nullptr, nullptr, &formal};
            auto &exprs = std::get<std::vector<ScalarExprPtr>>(fb.body);
            for (size_t k = 0; k < exprs.size(); ++k) {
                fb.out_types.push_back(detail::infer_expr_type(*exprs[k], env));
                fb.out_names.push_back("c" + std::to_string(k));
            }
        }
        ctx.funcs[p.name] = std::move(fb);
    }
    return apply_transform(def.semantics, def.semanticsTypes, ctx, registry);
}

} // namespace rulekit
