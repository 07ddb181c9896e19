#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rulekit/instantiate.hpp"
#include "rulekit/typecheck.hpp"

namespace rulekit {

struct MatchOutcome {
    std::optional<MatchContext> context;
    std::string reasonPath; // deepest failing pattern node when no match
    bool matched() const { return context.has_value(); }
};

namespace detail {

/// A pattern variable's concrete extent during matching: a contiguous column
/// range on one side of the node being matched, with display metadata.
struct MRange {
    Side side = Side::Only;
    int offset = 0;
    int width = 0;
    std::string name;   // binder (or binder.component) display name
    Schema schema;      // concrete columns covered, in order
    TypeRef type = TypeRef::named("");
};

using MLayout = std::map<std::string, MRange>;

/// Argument ranges of one function application, in formal-slot order.
struct ArgSlots {
    std::vector<MRange> ranges;
    bool single_input = false; // in single-row contexts Left refs (correlated) alias Only refs

    int total_width() const {
        int n = 0;
        for (auto &r : ranges) n += r.width;
        return n;
    }

    std::optional<int> formal_of(Side side, int index) const {
        int base = 0;
        for (auto &r : ranges) {
            Side s = side;
            if (single_input && s == Side::Left) s = Side::Only;
            Side rs = r.side;
            if (single_input && rs == Side::Left) rs = Side::Only;
            if (s == rs && index >= r.offset && index < r.offset + r.width)
                return base + (index - r.offset);
            base += r.width;
        }
        return std::nullopt;
    }
};

struct Matcher {
    const Rule &rule;
    const PatternTypes &types;
    const CustomOpRegistry &registry;
    MatchContext ctx;
    std::string reason;
    bool failed = false;

    bool fail(const std::string &path, const std::string &why) {
        if (!failed) {
            failed = true;
            reason = path + ": " + why;
        }
        return false;
    }

    // --- type instantiation (lax: column names are representative only) ----

    static bool schemas_compatible(const Schema &a, const Schema &b) {
        if (a.arity() != b.arity()) return false;
        for (size_t i = 0; i < a.arity(); ++i)
            if (a.columns[i].second != b.columns[i].second) return false;
        return true;
    }

    bool bind_type(const TypeRef &t, const Schema &s, const std::string &path) {
        if (t.kind == TypeRef::Kind::Bool) return fail(path, "Bool is not a row type");
        if (t.kind == TypeRef::Kind::Named) {
            auto it = ctx.typeInst.find(t.name);
            if (it == ctx.typeInst.end()) {
                ctx.typeInst.emplace(t.name, s);
                return true;
            }
            if (!schemas_compatible(it->second, s))
                return fail(path, "type " + t.name + " instantiated with incompatible schemas");
            return true;
        }
        // product: split by component widths; at most one component may have
        // an unknown width
        size_t known = 0;
        const TypeRef *unknown = nullptr;
        for (auto &c : t.components) {
            int w = -1;
            try {
                w = typeref_width(c, ctx.typeInst);
            } catch (const MissingBinding &) {
            }
            if (w >= 0) {
                known += static_cast<size_t>(w);
            } else if (unknown) {
                return fail(path, "cannot split a schema across two uninstantiated components");
            } else {
                unknown = &c;
            }
        }
        if ((unknown && known > s.arity()) || (!unknown && known != s.arity()))
            return fail(path, "schema width disagrees with the row type");
        size_t offset = 0;
        for (auto &c : t.components) {
            size_t w = (&c == unknown) ? s.arity() - known : static_cast<size_t>(typeref_width(c, ctx.typeInst));
            Schema part;
            for (size_t i = 0; i < w; ++i) part.columns.push_back(s.columns.at(offset + i));
            offset += w;
            if (!bind_type(c, part, path)) return false;
        }
        return true;
    }

    // --- layouts -----------------------------------------------------------

    std::vector<TypeRef> annotated_binders(const void *key, size_t n) const {
        auto it = types.binders.find(key);
        if (it != types.binders.end() && it->second.size() == n) return it->second;
        return {};
    }

    bool push_binder(MLayout &layout, const Binder &b, const TypeRef &btype, Side side, const Schema &schema,
                     const std::string &path) {
        if (b.names.size() == 1) {
            layout[b.names[0]] = MRange{side, 0, static_cast<int>(schema.arity()), b.names[0], schema, btype};
            return true;
        }
        if (btype.kind != TypeRef::Kind::Product || btype.components.size() != b.names.size())
            return fail(path, "destructuring binder lacks a matching product type");
        int off = 0;
        for (size_t i = 0; i < b.names.size(); ++i) {
            int w;
            try {
                w = typeref_width(btype.components[i], ctx.typeInst);
            } catch (const MissingBinding &e) {
                return fail(path, e.what());
            }
            Schema part;
            for (int k = 0; k < w; ++k) {
                if (off + k >= static_cast<int>(schema.arity())) return fail(path, "binder exceeds row width");
                part.columns.push_back(schema.columns[off + k]);
            }
            layout[b.names[i]] = MRange{side, off, w, b.names[i], std::move(part), btype.components[i]};
            off += w;
        }
        if (off != static_cast<int>(schema.arity()))
            return fail(path, "binder components do not cover the row");
        return true;
    }

    std::optional<MRange> resolve_simple_arg(const ExprPatternPtr &e, const MLayout &layout,
                                             const std::string &path) {
        if (auto *v = std::get_if<EVar>(&e->node)) {
            auto it = layout.find(v->name);
            if (it != layout.end()) return it->second;
            fail(path, "unbound variable " + v->name);
            return std::nullopt;
        }
        if (auto *t = std::get_if<ETupleProject>(&e->node)) {
            auto base = resolve_simple_arg(t->base, layout, path);
            if (!base) return std::nullopt;
            if (base->type.kind != TypeRef::Kind::Product ||
                static_cast<size_t>(t->index) >= base->type.components.size()) {
                fail(path, "tuple projection on a non-product binder");
                return std::nullopt;
            }
            int off = 0;
            try {
                for (int i = 0; i < t->index; ++i) off += typeref_width(base->type.components[i], ctx.typeInst);
                int w = typeref_width(base->type.components[t->index], ctx.typeInst);
                MRange out;
                out.side = base->side;
                out.offset = base->offset + off;
                out.width = w;
                out.name = base->name + "." + std::to_string(t->index);
                for (int k = 0; k < w; ++k) out.schema.columns.push_back(base->schema.columns.at(off + k));
                out.type = base->type.components[t->index];
                return out;
            } catch (const MissingBinding &e2) {
                fail(path, e2.what());
                return std::nullopt;
            }
        }
        fail(path, "argument of an uninterpreted application must be a bound variable");
        return std::nullopt;
    }

    std::optional<ArgSlots> resolve_args(const std::vector<ExprPatternPtr> &args, const MLayout &layout,
                                         bool single_input, const std::string &path) {
        ArgSlots slots;
        slots.single_input = single_input;
        for (auto &a : args) {
            auto r = resolve_simple_arg(a, layout, path);
            if (!r) return std::nullopt;
            slots.ranges.push_back(std::move(*r));
        }
        return slots;
    }

    // --- rebasing concrete expressions into formal slots -------------------

    ScalarExprPtr rebase_expr(const ScalarExprPtr &e, const ArgSlots &slots, bool in_subplan,
                              const std::string &path) {
        if (auto *c = std::get_if<ColRef>(&e->node)) {
            if (in_subplan && c->side != Side::Left) return e; // subplan-local reference
            auto f = slots.formal_of(c->side, c->index);
            if (!f) {
                fail(path, "expression depends on columns outside the parameter slots");
                return nullptr;
            }
            return col(in_subplan ? Side::Left : Side::Only, *f);
        }
        if (std::holds_alternative<Literal>(e->node)) return e;
        if (auto *f = std::get_if<Call>(&e->node)) {
            std::vector<ScalarExprPtr> args;
            for (auto &a : f->args) {
                auto r = rebase_expr(a, slots, in_subplan, path);
                if (!r) return nullptr;
                args.push_back(std::move(r));
            }
            return remake_call(*f, std::move(args));
        }
        auto &x = std::get<ExistsSubplan>(e->node);
        if (in_subplan) {
            fail(path, "nested correlated subqueries are not supported");
            return nullptr;
        }
        auto sub = rebase_subplan(x.subplan, slots, path);
        return sub ? exists(sub) : nullptr;
    }

    /// Rewrites correlated (side=Left) references of a subplan into formal
    /// slots, leaving subplan-local and join-local references intact.
    LogicalPlanPtr rebase_subplan(const LogicalPlanPtr &plan, const ArgSlots &slots, const std::string &path) {
        if (auto *f = std::get_if<FilterNode>(&plan->node)) {
            auto pred = rebase_expr(f->predicate, slots, true, path);
            auto input = rebase_subplan(f->input, slots, path);
            return (pred && input) ? filter(pred, input) : nullptr;
        }
        if (auto *p = std::get_if<ProjectNode>(&plan->node)) {
            std::vector<std::pair<ScalarExprPtr, std::string>> items;
            for (auto &[e, n] : p->items) {
                auto r = rebase_expr(e, slots, true, path);
                if (!r) return nullptr;
                items.emplace_back(std::move(r), n);
            }
            auto input = rebase_subplan(p->input, slots, path);
            return input ? project(std::move(items), input) : nullptr;
        }
        if (auto *j = std::get_if<JoinNode>(&plan->node)) {
            auto l = rebase_subplan(j->left, slots, path);
            auto r = rebase_subplan(j->right, slots, path);
            return (l && r) ? join(j->predicate, l, r) : nullptr;
        }
        if (auto *u = std::get_if<UnionNode>(&plan->node)) {
            auto l = rebase_subplan(u->left, slots, path);
            auto r = rebase_subplan(u->right, slots, path);
            return (l && r) ? union_all(l, r) : nullptr;
        }
        if (auto *d = std::get_if<DistinctNode>(&plan->node)) {
            auto input = rebase_subplan(d->input, slots, path);
            return input ? distinct(input) : nullptr;
        }
        if (auto *a = std::get_if<AggregateNode>(&plan->node)) {
            std::vector<ScalarExprPtr> keys;
            std::vector<AggCall> aggs;
            for (auto &k : a->group_keys) {
                auto r = rebase_expr(k, slots, true, path);
                if (!r) return nullptr;
                keys.push_back(std::move(r));
            }
            for (auto &ac : a->aggs) {
                std::vector<ScalarExprPtr> as;
                for (auto &e : ac.args) {
                    auto r = rebase_expr(e, slots, true, path);
                    if (!r) return nullptr;
                    as.push_back(std::move(r));
                }
                aggs.push_back(AggCall{ac.func, ac.symbol, ac.result_type, std::move(as)});
            }
            auto input = rebase_subplan(a->input, slots, path);
            return input ? aggregate(std::move(keys), std::move(aggs), input) : nullptr;
        }
        return plan; // scan / values / empty / custom
    }

    // --- function binding --------------------------------------------------

    static std::vector<std::string> slot_display_names(const ArgSlots &slots) {
        std::vector<std::string> out;
        for (auto &r : slots.ranges)
            for (auto &[n, _] : r.schema.columns) out.push_back(r.name + "." + n);
        return out;
    }

    /// Binds (or verifies) a function symbol against concrete target
    /// expressions, rebased into the symbol's formal slots. Named result
    /// types are instantiated from the targets' concrete schema.
    bool bind_function(const std::string &name, const ArgSlots &slots, std::vector<ScalarExprPtr> bodies,
                       std::vector<std::string> out_names, std::vector<ValueType> out_types,
                       const std::string &path) {
        auto *decl = rule.find_func(name);
        if (!decl) return fail(path, "unbound symbol " + name);
        FunctionBinding fb;
        for (auto &r : slots.ranges) fb.param_widths.push_back(r.width);
        fb.slot_names = slot_display_names(slots);
        fb.out_names = std::move(out_names);
        fb.out_types = std::move(out_types);
        fb.result = decl->result;
        fb.body = std::move(bodies);
        auto it = ctx.funcs.find(name);
        if (it != ctx.funcs.end()) {
            auto *prev = std::get_if<std::vector<ScalarExprPtr>>(&it->second.body);
            auto &now = std::get<std::vector<ScalarExprPtr>>(fb.body);
            if (!prev || prev->size() != now.size() || it->second.param_widths != fb.param_widths)
                return fail(path, "symbol " + name + " matched with conflicting bindings");
            for (size_t i = 0; i < now.size(); ++i)
                if (!expr_equal((*prev)[i], now[i]))
                    return fail(path, "symbol " + name + " matched with conflicting bindings");
            return true;
        }
        if (decl->result.kind != TypeRef::Kind::Bool) {
            Schema rs;
            for (size_t i = 0; i < fb.out_names.size(); ++i) rs.columns.emplace_back(fb.out_names[i], fb.out_types[i]);
            if (!bind_type(decl->result, rs, path)) return false;
        }
        ctx.funcs.emplace(name, std::move(fb));
        return true;
    }

    bool bind_aggregate(const std::string &name, const ArgSlots &slots, std::vector<AggCall> bodies,
                        std::vector<std::string> out_names, std::vector<ValueType> out_types,
                        const std::string &path) {
        auto *decl = rule.find_func(name);
        if (!decl) return fail(path, "unbound symbol " + name);
        FunctionBinding fb;
        for (auto &r : slots.ranges) fb.param_widths.push_back(r.width);
        fb.slot_names = slot_display_names(slots);
        fb.out_names = std::move(out_names);
        fb.out_types = std::move(out_types);
        fb.result = decl->result;
        fb.body = std::move(bodies);
        auto it = ctx.funcs.find(name);
        if (it != ctx.funcs.end()) {
            auto *prev = std::get_if<std::vector<AggCall>>(&it->second.body);
            auto &now = std::get<std::vector<AggCall>>(fb.body);
            if (!prev || prev->size() != now.size() || it->second.param_widths != fb.param_widths)
                return fail(path, "symbol " + name + " matched with conflicting bindings");
            for (size_t i = 0; i < now.size(); ++i)
                if (!agg_equal((*prev)[i], now[i]))
                    return fail(path, "symbol " + name + " matched with conflicting bindings");
            return true;
        }
        if (decl->result.kind != TypeRef::Kind::Bool) {
            Schema rs;
            for (size_t i = 0; i < fb.out_names.size(); ++i) rs.columns.emplace_back(fb.out_names[i], fb.out_types[i]);
            if (!bind_type(decl->result, rs, path)) return false;
        }
        ctx.funcs.emplace(name, std::move(fb));
        return true;
    }

    // --- expression matching -----------------------------------------------

    /// Target metadata for result-type instantiation.
    struct Targets {
        std::vector<ScalarExprPtr> exprs;
        std::vector<std::string> names;
        std::vector<ValueType> types;
    };

    /// Matches an expression pattern against a vector of concrete output
    /// expressions (projection items, group keys).
    bool match_expr_vector(const ExprPatternPtr &e, const Targets &t, const MLayout &layout, bool single_input,
                           const std::string &path) {
        if (std::holds_alternative<EVar>(e->node) || std::holds_alternative<ETupleProject>(e->node)) {
            auto r = resolve_simple_arg(e, layout, path);
            if (!r) return false;
            if (static_cast<int>(t.exprs.size()) != r->width)
                return fail(path, "width mismatch against the bound variable");
            for (int i = 0; i < r->width; ++i) {
                auto *c = std::get_if<ColRef>(&t.exprs[i]->node);
                Side want = r->side;
                if (!c || c->index != r->offset + i ||
                    !(c->side == want || (single_input && c->side == Side::Left && want == Side::Only)))
                    return fail(path, "expression is not the identity on the bound variable");
            }
            return true;
        }
        if (auto *c = std::get_if<EConst>(&e->node)) {
            if (t.exprs.size() != 1) return fail(path, "width mismatch against a literal");
            auto *l = std::get_if<Literal>(&t.exprs[0]->node);
            if (!l || !(*l == c->value)) return fail(path, "literal mismatch");
            return true;
        }
        auto &a = std::get<EApply>(e->node);
        auto slots = resolve_args(a.args, layout, single_input, path);
        if (!slots) return false;
        auto it = ctx.funcs.find(a.func);
        if (it != ctx.funcs.end()) {
            // already bound: targets must equal the body with the argument
            // columns substituted in
            auto *body = std::get_if<std::vector<ScalarExprPtr>>(&it->second.body);
            if (!body || body->size() != t.exprs.size())
                return fail(path, "symbol " + a.func + " matched with conflicting bindings");
            std::vector<ScalarExprPtr> concrete_slots;
            for (auto &r : slots->ranges)
                for (int i = 0; i < r.width; ++i) concrete_slots.push_back(col(r.side, r.offset + i));
            for (size_t i = 0; i < body->size(); ++i) {
                ScalarExprPtr expected;
                try {
                    expected = subst_slots((*body)[i], concrete_slots);
                } catch (const std::runtime_error &err) {
                    return fail(path, err.what());
                }
                if (!loose_expr_equal(expected, t.exprs[i], single_input))
                    return fail(path, "symbol " + a.func + " matched with conflicting bindings");
            }
            return true;
        }
        std::vector<ScalarExprPtr> bodies;
        for (auto &target : t.exprs) {
            auto r = rebase_expr(target, *slots, false, path);
            if (!r) return false;
            bodies.push_back(std::move(r));
        }
        return bind_function(a.func, *slots, std::move(bodies), t.names, t.types, path);
    }

    /// Structural equality up to the Left/Only aliasing of single-row
    /// contexts (a correlated column and its outer alias denote one column).
    static bool loose_expr_equal(const ScalarExprPtr &a, const ScalarExprPtr &b, bool single_input) {
        if (!single_input) return expr_equal(a, b);
        if (!a || !b || a->node.index() != b->node.index()) {
            auto *ca = a ? std::get_if<ColRef>(&a->node) : nullptr;
            auto *cb = b ? std::get_if<ColRef>(&b->node) : nullptr;
            return ca && cb && ca->index == cb->index;
        }
        if (auto *ca = std::get_if<ColRef>(&a->node)) {
            auto &cb = std::get<ColRef>(b->node);
            bool sa = ca->side == Side::Right, sb = cb.side == Side::Right;
            return !sa && !sb && ca->index == cb.index;
        }
        if (auto *fa = std::get_if<Call>(&a->node)) {
            auto &fb = std::get<Call>(b->node);
            if (fa->op != fb.op || fa->symbol != fb.symbol || fa->args.size() != fb.args.size()) return false;
            for (size_t i = 0; i < fa->args.size(); ++i)
                if (!loose_expr_equal(fa->args[i], fb.args[i], true)) return false;
            return true;
        }
        return expr_equal(a, b);
    }

    // --- predicate matching with conjunct partitioning ---------------------

    static void flatten_pred(const PredPatternPtr &p, std::vector<PredPatternPtr> &out) {
        if (auto *c = std::get_if<PAnd>(&p->node)) {
            flatten_pred(c->left, out);
            flatten_pred(c->right, out);
            return;
        }
        out.push_back(p);
    }

    /// Attempts a structural match of a non-symbol predicate atom against one
    /// concrete conjunct. Returns false without failing the whole match (the
    /// caller restores state and tries the next conjunct).
    bool try_structural(const PredPatternPtr &p, const ScalarExprPtr &c, const MLayout &layout,
                        bool single_input, const std::string &path) {
        if (std::holds_alternative<PTop>(p->node)) {
            auto *l = std::get_if<Literal>(&c->node);
            return l && l->value == Value{true};
        }
        if (std::holds_alternative<PBottom>(p->node)) {
            auto *l = std::get_if<Literal>(&c->node);
            return l && l->value == Value{false};
        }
        if (auto *n = std::get_if<PNot>(&p->node)) {
            auto *f = std::get_if<Call>(&c->node);
            if (!f || f->op != CallOp::Not || f->args.size() != 1) return false;
            return try_structural(n->arg, f->args[0], layout, single_input, path);
        }
        if (auto *o = std::get_if<POr>(&p->node)) {
            auto *f = std::get_if<Call>(&c->node);
            if (!f || f->op != CallOp::Or || f->args.size() != 2) return false;
            return try_structural(o->left, f->args[0], layout, single_input, path) &&
                   try_structural(o->right, f->args[1], layout, single_input, path);
        }
        if (auto *an = std::get_if<PAnd>(&p->node)) {
            auto *f = std::get_if<Call>(&c->node);
            if (!f || f->op != CallOp::And || f->args.size() != 2) return false;
            return try_structural(an->left, f->args[0], layout, single_input, path) &&
                   try_structural(an->right, f->args[1], layout, single_input, path);
        }
        if (auto *cmp = std::get_if<PCompare>(&p->node)) {
            auto *f = std::get_if<Call>(&c->node);
            CallOp want = cmp->op == PCompare::Op::Eq ? CallOp::Eq : CallOp::Neq;
            if (!f || f->op != want || f->args.size() != 2) return false;
            Targets tl{{f->args[0]}, {"c0"}, {ValueType::Int}};
            Targets tr{{f->args[1]}, {"c0"}, {ValueType::Int}};
            return match_expr_vector(cmp->left, tl, layout, single_input, path) &&
                   match_expr_vector(cmp->right, tr, layout, single_input, path);
        }
        if (auto *nt = std::get_if<PNullTest>(&p->node)) {
            auto *f = std::get_if<Call>(&c->node);
            CallOp want = nt->negated ? CallOp::IsNotNull : CallOp::IsNull;
            if (!f || f->op != want || f->args.size() != 1) return false;
            Targets t{{f->args[0]}, {"c0"}, {ValueType::Int}};
            return match_expr_vector(nt->arg, t, layout, single_input, path);
        }
        if (auto *x = std::get_if<PExists>(&p->node)) {
            auto *e = std::get_if<ExistsSubplan>(&c->node);
            if (!e) return false;
            return match_plan(x->subplan, e->subplan, &layout, path + ".exists");
        }
        if (auto *a = std::get_if<PApply>(&p->node)) {
            // a symbol atom used structurally (inside Not/Or): bind it to the
            // whole concrete operand
            auto slots = resolve_args(a->args, layout, single_input, path);
            if (!slots) return false;
            auto it = ctx.funcs.find(a->func);
            if (it != ctx.funcs.end()) {
                auto *body = std::get_if<std::vector<ScalarExprPtr>>(&it->second.body);
                if (!body || body->size() != 1) return false;
                std::vector<ScalarExprPtr> concrete_slots;
                for (auto &r : slots->ranges)
                    for (int i = 0; i < r.width; ++i) concrete_slots.push_back(col(r.side, r.offset + i));
                try {
                    return loose_expr_equal(subst_slots((*body)[0], concrete_slots), c, single_input);
                } catch (const std::runtime_error &) {
                    return false;
                }
            }
            // dependency check, then bind
            for (auto &[side, idx] : column_deps(c))
                if (!slots->formal_of(side, idx)) return false;
            auto body = rebase_expr(c, *slots, false, path);
            if (!body) return false;
            return bind_function(a->func, *slots, {body}, {}, {}, path);
        }
        return false;
    }

    bool match_pred(const PredPatternPtr &pattern, const ScalarExprPtr &concrete, const MLayout &layout,
                    bool single_input, const std::string &path) {
        std::vector<PredPatternPtr> atoms;
        flatten_pred(pattern, atoms);
        std::vector<ScalarExprPtr> conjuncts = split_conjuncts(concrete);
        std::vector<bool> claimed(conjuncts.size(), false);
        // drop a sole literal TRUE produced by an empty predicate
        std::vector<size_t> apply_atoms;
        // 1) structural atoms claim the first conjunct they match
        for (size_t ai = 0; ai < atoms.size(); ++ai) {
            if (std::holds_alternative<PApply>(atoms[ai]->node)) {
                apply_atoms.push_back(ai);
                continue;
            }
            if (std::holds_alternative<PTop>(atoms[ai]->node)) {
                // ⊤ matches vacuously; it may also absorb a literal TRUE
                for (size_t ci = 0; ci < conjuncts.size(); ++ci) {
                    if (claimed[ci]) continue;
                    auto *l = std::get_if<Literal>(&conjuncts[ci]->node);
                    if (l && l->value == Value{true}) {
                        claimed[ci] = true;
                        break;
                    }
                }
                continue;
            }
            bool ok = false;
            for (size_t ci = 0; ci < conjuncts.size() && !ok; ++ci) {
                if (claimed[ci]) continue;
                MatchContext snapshot = ctx;
                if (try_structural(atoms[ai], conjuncts[ci], layout, single_input, path)) {
                    claimed[ci] = true;
                    ok = true;
                } else {
                    ctx = std::move(snapshot);
                    if (failed) return false; // hard failure inside (e.g. exists depth)
                }
            }
            if (!ok) return fail(path, "no conjunct matches the structural predicate atom");
        }
        // 2) greedy assignment of remaining conjuncts to symbol atoms by
        //    dependency admissibility, first admitting atom wins
        std::map<size_t, std::vector<ScalarExprPtr>> assigned;
        std::vector<std::optional<ArgSlots>> atom_slots(atoms.size());
        for (size_t ai : apply_atoms) {
            auto &a = std::get<PApply>(atoms[ai]->node);
            atom_slots[ai] = resolve_args(a.args, layout, single_input, path);
            if (!atom_slots[ai]) return false;
        }
        for (size_t ci = 0; ci < conjuncts.size(); ++ci) {
            if (claimed[ci]) continue;
            // a literal TRUE carries no information; any symbol may take it
            auto deps = column_deps(conjuncts[ci]);
            bool placed = false;
            for (size_t ai : apply_atoms) {
                bool admits = true;
                for (auto &[side, idx] : deps)
                    if (!atom_slots[ai]->formal_of(side, idx)) {
                        admits = false;
                        break;
                    }
                if (admits) {
                    assigned[ai].push_back(conjuncts[ci]);
                    claimed[ci] = true;
                    placed = true;
                    break;
                }
            }
            if (!placed) return fail(path, "a concrete conjunct fits no pattern predicate");
        }
        // 3) bind each symbol atom; unfilled atoms may bind ⊤ only when some
        //    other symbol absorbed a conjunct
        bool any_absorbed = false;
        for (auto &[ai, cs] : assigned) any_absorbed |= !cs.empty();
        for (size_t ai : apply_atoms) {
            auto &a = std::get<PApply>(atoms[ai]->node);
            auto it = assigned.find(ai);
            if (it == assigned.end() || it->second.empty()) {
                if (!any_absorbed && !conjuncts.empty() &&
                    !(conjuncts.size() == 1 && std::get_if<Literal>(&conjuncts[0]->node)))
                    return fail(path, "predicate symbol " + a.func + " has nothing to bind");
                if (ctx.funcs.count(a.func)) continue; // already bound elsewhere
                if (!bind_function(a.func, *atom_slots[ai], {lit(true)}, {}, {}, path)) return false;
                continue;
            }
            std::vector<ScalarExprPtr> rebased;
            for (auto &c : it->second) {
                auto r = rebase_expr(c, *atom_slots[ai], false, path);
                if (!r) return false;
                rebased.push_back(std::move(r));
            }
            if (!bind_function(a.func, *atom_slots[ai], {conjoin(rebased)}, {}, {}, path)) return false;
        }
        return true;
    }

    // --- result-type naming helpers ----------------------------------------

    Targets key_targets(const AggregateNode &node, const Schema &in) {
        Targets t;
        ExprTypeEnv env{&in, nullptr, &in};
        for (size_t i = 0; i < node.group_keys.size(); ++i) {
            auto &k = node.group_keys[i];
            std::string name = "k" + std::to_string(i);
            if (auto *c = std::get_if<ColRef>(&k->node);
                c && c->side != Side::Right && static_cast<size_t>(c->index) < in.arity())
                name = in.columns[c->index].first;
            t.exprs.push_back(k);
            t.names.push_back(name);
            t.types.push_back(safe_infer(k, env));
        }
        return t;
    }

    static ValueType safe_infer(const ScalarExprPtr &e, const ExprTypeEnv &env) {
        try {
            return infer_expr_type(*e, env);
        } catch (const SchemaError &) {
            return ValueType::Int;
        }
    }

    // --- plan matching ------------------------------------------------------

    bool make_scope(MLayout &layout, const void *key, const Binder &b, Side side, const Schema &schema,
                    const TypeRef &fallback, const std::string &path) {
        auto ann = annotated_binders(key, 1);
        TypeRef bt = ann.empty() ? fallback : ann[0];
        return push_binder(layout, b, bt, side, schema, path);
    }

    std::optional<Schema> schema_of(const LogicalPlanPtr &plan, const std::string &path) {
        try {
            return output_schema(*plan, registry);
        } catch (const std::exception &e) {
            fail(path, std::string("schema derivation failed: ") + e.what());
            return std::nullopt;
        }
    }

    bool match_plan(const PlanPatternPtr &q, const LogicalPlanPtr &plan, const MLayout *outer,
                    const std::string &path) {
        if (auto *s = std::get_if<SymbolPat>(&q->node)) {
            auto it = ctx.plans.find(s->name);
            if (it != ctx.plans.end()) {
                if (!plan_equal(it->second, plan))
                    return fail(path, "plan symbol " + s->name + " matched two different subplans");
                return true;
            }
            auto *decl = rule.find_plan(s->name);
            if (!decl) return fail(path, "unbound symbol " + s->name);
            auto sch = schema_of(plan, path);
            if (!sch) return false;
            if (!bind_type(decl->rowType, *sch, path)) return false;
            ctx.plans.emplace(s->name, plan);
            return true;
        }
        if (auto *e = std::get_if<EmptyPat>(&q->node)) {
            auto *en = std::get_if<EmptyNode>(&plan->node);
            if (!en) return fail(path, "operator kind mismatch: expected empty");
            return bind_type(e->rowType, en->schema, path);
        }
        if (auto *f = std::get_if<FilterPat>(&q->node)) {
            auto *fn = std::get_if<FilterNode>(&plan->node);
            if (!fn) return fail(path, "operator kind mismatch: expected filter");
            if (!match_plan(f->input, fn->input, outer, path + ".input")) return false;
            auto in = schema_of(fn->input, path);
            if (!in) return false;
            MLayout layout = outer ? correlate(*outer) : MLayout{};
            // with correlated outers in scope, Left refs denote the outer
            // row and must not alias the local row
            bool si = layout.empty();
            if (!make_scope(layout, q.get(), f->binder, Side::Only, *in, TypeRef::named(""), path)) return false;
            return match_pred(f->predicate, fn->predicate, layout, si, path + ".pred");
        }
        if (auto *p = std::get_if<ProjectPat>(&q->node)) {
            auto *pn = std::get_if<ProjectNode>(&plan->node);
            if (!pn) return fail(path, "operator kind mismatch: expected project");
            if (!match_plan(p->input, pn->input, outer, path + ".input")) return false;
            auto in = schema_of(pn->input, path);
            if (!in) return false;
            MLayout layout = outer ? correlate(*outer) : MLayout{};
            bool si = layout.empty();
            if (!make_scope(layout, q.get(), p->binder, Side::Only, *in, TypeRef::named(""), path)) return false;
            Targets t;
            ExprTypeEnv env{&*in, nullptr, &*in};
            for (auto &[e, n] : pn->items) {
                t.exprs.push_back(e);
                t.names.push_back(n);
                t.types.push_back(safe_infer(e, env));
            }
            return match_expr_vector(p->expr, t, layout, si, path + ".expr");
        }
        if (auto *j = std::get_if<JoinPat>(&q->node)) {
            auto *jn = std::get_if<JoinNode>(&plan->node);
            if (!jn) return fail(path, "operator kind mismatch: expected join");
            if (!match_plan(j->left, jn->left, outer, path + ".left")) return false;
            if (!match_plan(j->right, jn->right, outer, path + ".right")) return false;
            auto ls = schema_of(jn->left, path);
            auto rs = schema_of(jn->right, path);
            if (!ls || !rs) return false;
            MLayout layout;
            auto ann = annotated_binders(q.get(), 2);
            TypeRef lt = ann.empty() ? TypeRef::named("") : ann[0];
            TypeRef rt = ann.empty() ? TypeRef::named("") : ann[1];
            if (!push_binder(layout, j->left_binder, lt, Side::Left, *ls, path)) return false;
            if (!push_binder(layout, j->right_binder, rt, Side::Right, *rs, path)) return false;
            return match_pred(j->predicate, jn->predicate, layout, false, path + ".pred");
        }
        if (auto *u = std::get_if<UnionPat>(&q->node)) {
            auto *un = std::get_if<UnionNode>(&plan->node);
            if (!un) return fail(path, "operator kind mismatch: expected union");
            return match_plan(u->left, un->left, outer, path + ".left") &&
                   match_plan(u->right, un->right, outer, path + ".right");
        }
        if (auto *d = std::get_if<DistinctPat>(&q->node)) {
            auto *dn = std::get_if<DistinctNode>(&plan->node);
            if (!dn) return fail(path, "operator kind mismatch: expected distinct");
            return match_plan(d->input, dn->input, outer, path + ".input");
        }
        if (auto *g = std::get_if<AggregatePat>(&q->node)) {
            auto *gn = std::get_if<AggregateNode>(&plan->node);
            if (!gn) return fail(path, "operator kind mismatch: expected aggregate");
            if (!match_plan(g->input, gn->input, outer, path + ".input")) return false;
            auto in = schema_of(gn->input, path);
            if (!in) return false;
            MLayout layout = outer ? correlate(*outer) : MLayout{};
            bool si = layout.empty();
            if (!make_scope(layout, q.get(), g->binder, Side::Only, *in, TypeRef::named(""), path)) return false;
            if (!match_expr_vector(g->key, key_targets(*gn, *in), layout, si, path + ".key")) return false;
            return match_agg(g->agg, gn->aggs, layout, *in, path + ".agg", si);
        }
        auto &c = std::get<CustomPat>(q->node);
        auto *cn = std::get_if<CustomNode>(&plan->node);
        if (!cn) return fail(path, "operator kind mismatch: expected " + c.op_name);
        if (cn->op_name != c.op_name) return fail(path, "custom operator mismatch: " + cn->op_name);
        const auto *def = registry.find(c.op_name);
        if (!def || def->params.size() != c.args.size() || cn->args.size() != c.args.size())
            return fail(path, "custom operator arity mismatch");
        // plan arguments first: they pin the type instantiation the lambda
        // layouts depend on
        for (size_t i = 0; i < c.args.size(); ++i) {
            if (def->params[i].kind != ParamKind::Plan) continue;
            auto *pp = std::get_if<PlanPatternPtr>(&c.args[i]);
            auto *cp = std::get_if<LogicalPlanPtr>(&cn->args[i]);
            if (!pp || !cp) return fail(path, "custom argument kind mismatch");
            if (!match_plan(*pp, *cp, outer, path + ".arg" + std::to_string(i))) return false;
        }
        for (size_t i = 0; i < c.args.size(); ++i) {
            auto &p = def->params[i];
            if (p.kind == ParamKind::Plan) continue;
            std::string apath = path + ".arg" + std::to_string(i);
            auto *lp = std::get_if<LambdaPat>(&c.args[i]);
            if (!lp) return fail(apath, "custom argument kind mismatch");
            MLayout layout;
            auto ann = annotated_binders(lp, lp->binders.size());
            int off = 0;
            Schema formal;
            for (size_t bi = 0; bi < lp->binders.size(); ++bi) {
                TypeRef bt = !ann.empty() ? ann[bi]
                                          : (bi < p.params.size() ? p.params[bi] : TypeRef::named(""));
                int w;
                Schema part;
                try {
                    part = typeref_schema(bt, ctx.typeInst);
                    w = static_cast<int>(part.arity());
                } catch (const MissingBinding &e2) {
                    return fail(apath, e2.what());
                }
                MLayout local;
                if (!push_binder(local, lp->binders[bi], bt, Side::Only, part, apath)) return false;
                for (auto &[n, r] : local) {
                    MRange shifted = r;
                    shifted.offset += off;
                    layout[n] = std::move(shifted);
                }
                for (auto &colpair : part.columns) formal.columns.push_back(colpair);
                off += w;
            }
            if (p.kind == ParamKind::Aggregate) {
                auto *ab = std::get_if<AggPattern>(&lp->body);
                auto *ca = std::get_if<std::vector<AggCall>>(&cn->args[i]);
                if (!ab || !ca) return fail(apath, "custom argument kind mismatch");
                if (!match_agg(*ab, *ca, layout, formal, apath)) return false;
            } else {
                auto *ce = std::get_if<std::vector<ScalarExprPtr>>(&cn->args[i]);
                if (!ce) return fail(apath, "custom argument kind mismatch");
                if (p.kind == ParamKind::Predicate) {
                    auto *pb = std::get_if<PredPatternPtr>(&lp->body);
                    if (!pb || ce->size() != 1) return fail(apath, "custom argument kind mismatch");
                    if (!match_pred(*pb, (*ce)[0], layout, true, apath)) return false;
                } else {
                    auto *eb = std::get_if<ExprPatternPtr>(&lp->body);
                    if (!eb) return fail(apath, "custom argument kind mismatch");
                    Targets t;
                    ExprTypeEnv env{&formal, nullptr, &formal};
                    for (size_t k = 0; k < ce->size(); ++k) {
                        t.exprs.push_back((*ce)[k]);
                        t.names.push_back("c" + std::to_string(k));
                        t.types.push_back(safe_infer((*ce)[k], env));
                    }
                    if (!match_expr_vector(*eb, t, layout, true, apath)) return false;
                }
            }
        }
        return true;
    }

    bool match_agg(const AggPattern &a, const std::vector<AggCall> &concrete, const MLayout &layout,
                   const Schema &in, const std::string &path, bool single_input = true) {
        auto slots = resolve_args(a.args, layout, single_input, path);
        if (!slots) return false;
        std::vector<AggCall> rebased;
        Targets meta;
        ExprTypeEnv env{&in, nullptr, &in};
        for (auto &ac : concrete) {
            std::vector<ScalarExprPtr> args;
            for (auto &e : ac.args) {
                auto r = rebase_expr(e, *slots, false, path);
                if (!r) return false;
                args.push_back(std::move(r));
            }
            rebased.push_back(AggCall{ac.func, ac.symbol, ac.result_type, std::move(args)});
            meta.names.push_back(agg_column_name(ac, in));
            try {
                meta.types.push_back(infer_agg_type(ac, env));
            } catch (const SchemaError &) {
                meta.types.push_back(ValueType::Int);
            }
        }
        return bind_aggregate(a.func, *slots, std::move(rebased), meta.names, meta.types, path);
    }

    /// Re-sides an enclosing single-row layout for use inside a correlated
    /// subplan: outer variables surface as side=Left references.
    static MLayout correlate(const MLayout &outer) {
        MLayout out;
        for (auto &[n, r] : outer) {
            if (r.side != Side::Only) continue; // join-side outers cannot correlate
            MRange c = r;
            c.side = Side::Left;
            out[n] = std::move(c);
        }
        return out;
    }
};

} // namespace detail

/// Top-down structural match of a typed pattern against a concrete plan.
/// On success the context binds every symbol of the pattern; failure is a
/// value carrying the deepest failing pattern path.
inline MatchOutcome match_pattern(const PlanPatternPtr &pattern, const PatternTypes &types, const Rule &rule,
                                  const LogicalPlanPtr &plan, const CustomOpRegistry &registry) {
    detail::Matcher m{rule, types, registry, {}, {}, false};
    if (m.match_plan(pattern, plan, nullptr, "from")) return {std::move(m.ctx), ""};
    return {std::nullopt, m.reason.empty() ? "from" : m.reason};
}

struct ConstraintGuardMissing : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Guard invoked for each rule constraint at application time; receives the
/// constrained symbol's concrete binding and vetoes the rewrite on false.
using ConstraintGuard = std::function<bool(const Constraint &, const FunctionBinding &)>;

/// Sound syntactic injectivity check: the binding is a list of distinct bare
/// column references (a projection-permutation, which is injective).
inline bool default_injective_guard(const Constraint &, const FunctionBinding &fb) {
    auto *body = std::get_if<std::vector<ScalarExprPtr>>(&fb.body);
    if (!body || body->empty()) return false;
    std::set<int> seen;
    for (auto &e : *body) {
        auto *c = std::get_if<ColRef>(&e->node);
        if (!c || c->side != Side::Only) return false;
        if (!seen.insert(c->index).second) return false;
    }
    return true;
}

struct ApplyResult {
    LogicalPlanPtr plan;
    MatchContext context;
};

/// Matches the rule at the plan's root and, on success, instantiates the
/// transform pattern under the discovered context. Constrained rules
/// require a guard.
inline std::optional<ApplyResult> apply_rule(const TypedRule &rule, const LogicalPlanPtr &plan,
                                             const CustomOpRegistry &registry,
                                             const ConstraintGuard *guard = nullptr) {
    if (!rule.rule.constraints.empty() && !guard)
        throw ConstraintGuardMissing("rule " + rule.rule.name + " has constraints but no guard is registered");
    auto outcome = match_pattern(rule.rule.from, rule.types, rule.rule, plan, registry);
    if (!outcome.matched()) return std::nullopt;
    for (auto &c : rule.rule.constraints) {
        auto it = outcome.context->funcs.find(c.subject);
        if (it == outcome.context->funcs.end()) return std::nullopt;
        if (!(*guard)(c, it->second)) return std::nullopt;
    }
    auto rewritten = apply_transform(rule.rule.to, rule.types, *outcome.context, registry);
    return ApplyResult{std::move(rewritten), std::move(*outcome.context)};
}

struct TraceEntry {
    std::string rule;
    std::vector<int> path; // child indices from the root
    MatchContext context;
};

struct FixpointResult {
    LogicalPlanPtr plan;
    std::vector<TraceEntry> trace;
    bool reachedFixpoint = true;
};

namespace detail {

inline std::vector<LogicalPlanPtr> plan_children(const LogicalPlan &p) {
    if (auto *f = std::get_if<FilterNode>(&p.node)) return {f->input};
    if (auto *pr = std::get_if<ProjectNode>(&p.node)) return {pr->input};
    if (auto *j = std::get_if<JoinNode>(&p.node)) return {j->left, j->right};
    if (auto *u = std::get_if<UnionNode>(&p.node)) return {u->left, u->right};
    if (auto *d = std::get_if<DistinctNode>(&p.node)) return {d->input};
    if (auto *a = std::get_if<AggregateNode>(&p.node)) return {a->input};
    if (auto *c = std::get_if<CustomNode>(&p.node)) {
        std::vector<LogicalPlanPtr> out;
        for (auto &arg : c->args)
            if (auto *pp = std::get_if<LogicalPlanPtr>(&arg)) out.push_back(*pp);
        return out;
    }
    return {};
}

inline LogicalPlanPtr replace_child(const LogicalPlanPtr &p, int idx, LogicalPlanPtr child) {
    if (auto *f = std::get_if<FilterNode>(&p->node)) return filter(f->predicate, std::move(child));
    if (auto *pr = std::get_if<ProjectNode>(&p->node)) return project(pr->items, std::move(child));
    if (auto *j = std::get_if<JoinNode>(&p->node))
        return idx == 0 ? join(j->predicate, std::move(child), j->right)
                        : join(j->predicate, j->left, std::move(child));
    if (auto *u = std::get_if<UnionNode>(&p->node))
        return idx == 0 ? union_all(std::move(child), u->right) : union_all(u->left, std::move(child));
    if (std::holds_alternative<DistinctNode>(p->node)) return distinct(std::move(child));
    if (auto *a = std::get_if<AggregateNode>(&p->node))
        return aggregate(a->group_keys, a->aggs, std::move(child));
    auto &c = std::get<CustomNode>(p->node);
    std::vector<CustomArg> args = c.args;
    int seen = 0;
    for (auto &arg : args) {
        if (auto *pp = std::get_if<LogicalPlanPtr>(&arg)) {
            if (seen++ == idx) {
                *pp = std::move(child);
                break;
            }
        }
    }
    return custom(c.op_name, std::move(args));
}

inline LogicalPlanPtr rewrite_once_preorder(const std::vector<TypedRule> &rules, const LogicalPlanPtr &plan,
                                            const CustomOpRegistry &registry, const ConstraintGuard *guard,
                                            std::vector<int> &path, std::vector<TraceEntry> &trace,
                                            bool &changed) {
    LogicalPlanPtr node = plan;
    for (auto &r : rules) {
        auto res = apply_rule(r, node, registry, guard);
        if (res) {
            trace.push_back(TraceEntry{r.rule.name, path, std::move(res->context)});
            node = std::move(res->plan);
            changed = true;
            break; // first matching rule only; descend into the new subtree
        }
    }
    auto children = plan_children(*node);
    for (size_t i = 0; i < children.size(); ++i) {
        path.push_back(static_cast<int>(i));
        auto nc = rewrite_once_preorder(rules, children[i], registry, guard, path, trace, changed);
        path.pop_back();
        if (nc != children[i]) node = replace_child(node, static_cast<int>(i), std::move(nc));
    }
    return node;
}

} // namespace detail

/// Repeated pre-order passes applying the first matching rule at each node
/// until a pass changes nothing or maxPasses is exhausted.
inline FixpointResult apply_rules_to_fixpoint(const std::vector<TypedRule> &rules, LogicalPlanPtr plan,
                                              const CustomOpRegistry &registry, int maxPasses = 10,
                                              const ConstraintGuard *guard = nullptr) {
    FixpointResult result;
    for (int pass = 0; pass < maxPasses; ++pass) {
        bool changed = false;
        std::vector<int> path;
        plan = detail::rewrite_once_preorder(rules, plan, registry, guard, path, result.trace, changed);
        if (!changed) {
            result.plan = std::move(plan);
            return result;
        }
    }
    result.plan = std::move(plan);
    result.reachedFixpoint = false;
    return result;
}

} // namespace rulekit
