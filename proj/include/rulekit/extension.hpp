#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rulekit/pattern.hpp"
#include "rulekit/validate.hpp"

namespace rulekit {

/// Type annotations produced by the typechecker, keyed by pattern node
/// address. binders maps a node to the row type of each of its binders in
/// order (Filter/Project/Aggregate: 1, Join: 2, LambdaPat args: n).
struct PatternTypes {
    std::map<const void *, TypeRef> plan_out;
    std::map<const void *, std::vector<TypeRef>> binders;

    void merge(const PatternTypes &other) {
        plan_out.insert(other.plan_out.begin(), other.plan_out.end());
        binders.insert(other.binders.begin(), other.binders.end());
    }
};

// ---------------------------------------------------------------------------
// Custom operator definitions

struct ParamSpec {
    ParamKind kind = ParamKind::Plan;
    std::string name;
    TypeRef rowType;              // Plan: element type of the Bag
    std::vector<TypeRef> params;  // Predicate/Scalar: input types; Aggregate: [bag element type]
    TypeRef result;               // Scalar/Aggregate result; Predicate result is Bool
};

struct CustomOpDef {
    std::string name;
    std::vector<std::string> typeParams; // implicit type symbols of the signature
    std::vector<ParamSpec> params;
    TypeRef outputRowType;
    PlanPatternPtr semantics; // core ops and previously registered customs only
    PatternTypes semanticsTypes;

    const ParamSpec *find_param(const std::string &n) const {
        for (auto &p : params)
            if (p.name == n) return &p;
        return nullptr;
    }

    /// View of the definition as a rule-like declaration scope, used to
    /// validate and typecheck the semantics pattern.
    Rule as_rule() const {
        Rule r;
        r.name = "def " + name;
        for (auto &t : typeParams) r.typeDecls.push_back({t});
        for (auto &p : params) {
            switch (p.kind) {
                case ParamKind::Plan: r.planDecls.push_back({p.name, p.rowType}); break;
                case ParamKind::Predicate:
                    r.funcDecls.push_back({p.name, p.params, TypeRef::boolean(), FuncKind::Predicate});
                    break;
                case ParamKind::Scalar:
                    r.funcDecls.push_back({p.name, p.params, p.result, FuncKind::Scalar});
                    break;
                case ParamKind::Aggregate:
                    r.funcDecls.push_back({p.name, p.params, p.result, FuncKind::Aggregate});
                    break;
            }
        }
        r.from = semantics;
        r.to = semantics;
        return r;
    }
};

class CustomOpRegistry {
  public:
    bool contains(const std::string &name) const { return defs_.count(name) > 0; }

    const CustomOpDef *find(const std::string &name) const {
        auto it = defs_.find(name);
        return it == defs_.end() ? nullptr : &it->second;
    }

    const CustomOpDef &at(const std::string &name) const {
        auto it = defs_.find(name);
        if (it == defs_.end()) throw std::out_of_range("unregistered custom operator " + name);
        return it->second;
    }

    /// Raw insert; use register_def (typecheck.hpp) for the checked path.
    void add(CustomOpDef def) { defs_.insert_or_assign(def.name, std::move(def)); }

    CustomOpSigMap signatures() const {
        CustomOpSigMap sigs;
        for (auto &[name, def] : defs_) {
            std::vector<ParamKind> kinds;
            for (auto &p : def.params) kinds.push_back(p.kind);
            sigs.emplace(name, std::move(kinds));
        }
        return sigs;
    }

    const std::map<std::string, CustomOpDef> &defs() const { return defs_; }

  private:
    std::map<std::string, CustomOpDef> defs_;
};

// ---------------------------------------------------------------------------
// Pattern expansion (custom ops -> core ops)

namespace detail {

/// Substitution state for one expansion step: maps the definition's param
/// names to the actual arguments at the use site.
struct ExpandSubst {
    std::map<std::string, PlanPatternPtr> plan_args;
    std::map<std::string, LambdaPat> lambda_args;
    std::map<std::string, std::string> binder_renames; // def binder name -> fresh name
    int *fresh_counter;

    std::string fresh(const std::string &base) {
        return "_" + base + std::to_string(++*fresh_counter);
    }
};

/// Substitutes the bound variables of an actual lambda with the expression
/// arguments supplied at an application site in the definition body.
inline ExprPatternPtr subst_vars(const ExprPatternPtr &e, const std::map<std::string, ExprPatternPtr> &env) {
    if (auto *v = std::get_if<EVar>(&e->node)) {
        auto it = env.find(v->name);
        return it == env.end() ? e : it->second;
    }
    if (auto *a = std::get_if<EApply>(&e->node)) {
        std::vector<ExprPatternPtr> args;
        for (auto &x : a->args) args.push_back(subst_vars(x, env));
        return eapply(a->func, std::move(args));
    }
    if (auto *t = std::get_if<ETupleProject>(&e->node)) return etuple_project(subst_vars(t->base, env), t->index);
    return e;
}

PlanPatternPtr expand_pattern(const PlanPatternPtr &q, const CustomOpRegistry &registry, int &fresh_counter,
                              ExpandSubst *subst);

inline ExprPatternPtr expand_expr(const ExprPatternPtr &e, const CustomOpRegistry &registry, int &fresh_counter,
                                  ExpandSubst *subst);

/// Builds the variable environment for splicing an actual lambda body in
/// place of an application with the given argument expressions. Handles
/// destructured binders positionally via tupleProject.
inline std::map<std::string, ExprPatternPtr> lambda_env(const LambdaPat &lam,
                                                        const std::vector<ExprPatternPtr> &args) {
    std::map<std::string, ExprPatternPtr> env;
    for (size_t i = 0; i < lam.binders.size() && i < args.size(); ++i) {
        auto &b = lam.binders[i];
        if (b.names.size() == 1) {
            env[b.names[0]] = args[i];
        } else {
            for (size_t c = 0; c < b.names.size(); ++c)
                env[b.names[c]] = etuple_project(args[i], static_cast<int>(c));
        }
    }
    return env;
}

inline ExprPatternPtr expand_expr(const ExprPatternPtr &e, const CustomOpRegistry &registry, int &fresh_counter,
                                  ExpandSubst *subst) {
    if (auto *v = std::get_if<EVar>(&e->node)) {
        if (subst) {
            auto it = subst->binder_renames.find(v->name);
            if (it != subst->binder_renames.end()) return evar(it->second);
        }
        return e;
    }
    if (auto *a = std::get_if<EApply>(&e->node)) {
        std::vector<ExprPatternPtr> args;
        bool changed = false;
        for (auto &x : a->args) {
            args.push_back(expand_expr(x, registry, fresh_counter, subst));
            changed |= args.back() != x;
        }
        if (subst) {
            auto it = subst->lambda_args.find(a->func);
            if (it != subst->lambda_args.end()) {
                auto &lam = it->second;
                auto body = std::get<ExprPatternPtr>(lam.body);
                return subst_vars(body, lambda_env(lam, args));
            }
        }
        return changed ? eapply(a->func, std::move(args)) : e;
    }
    if (auto *t = std::get_if<ETupleProject>(&e->node)) {
        auto base = expand_expr(t->base, registry, fresh_counter, subst);
        return base == t->base ? e : etuple_project(base, t->index);
    }
    return e;
}

inline PredPatternPtr expand_pred(const PredPatternPtr &p, const CustomOpRegistry &registry, int &fresh_counter,
                                  ExpandSubst *subst) {
    if (auto *a = std::get_if<PApply>(&p->node)) {
        std::vector<ExprPatternPtr> args;
        bool changed = false;
        for (auto &x : a->args) {
            args.push_back(expand_expr(x, registry, fresh_counter, subst));
            changed |= args.back() != x;
        }
        if (subst) {
            auto it = subst->lambda_args.find(a->func);
            if (it != subst->lambda_args.end()) {
                auto &lam = it->second;
                auto body = std::get<PredPatternPtr>(lam.body);
                auto env = lambda_env(lam, args);
                // splice the actual predicate body, substituting its binders
                struct Splicer {
                    const std::map<std::string, ExprPatternPtr> &env;
                    const CustomOpRegistry &registry;
                    int &fresh_counter;
                    PredPatternPtr splice(const PredPatternPtr &b) {
                        if (auto *ap = std::get_if<PApply>(&b->node)) {
                            std::vector<ExprPatternPtr> as;
                            for (auto &x : ap->args) as.push_back(subst_vars(x, env));
                            return papply(ap->func, std::move(as));
                        }
                        if (auto *n = std::get_if<PNot>(&b->node)) return pnot(splice(n->arg));
                        if (auto *c = std::get_if<PAnd>(&b->node)) return pand(splice(c->left), splice(c->right));
                        if (auto *c = std::get_if<POr>(&b->node)) return por(splice(c->left), splice(c->right));
                        if (auto *c = std::get_if<PCompare>(&b->node)) {
                            auto l = subst_vars(c->left, env);
                            auto r = subst_vars(c->right, env);
                            return c->op == PCompare::Op::Eq ? peq(l, r) : pneq(l, r);
                        }
                        if (auto *n = std::get_if<PNullTest>(&b->node))
                            return pis_null(subst_vars(n->arg, env), n->negated);
                        if (std::holds_alternative<PExists>(b->node))
                            throw std::runtime_error("exists inside a lambda argument body is not supported");
                        return b; // top / bottom
                    }
                };
                return Splicer{env, registry, fresh_counter}.splice(body);
            }
        }
        return changed ? papply(a->func, std::move(args)) : p;
    }
    if (auto *n = std::get_if<PNot>(&p->node)) {
        auto arg = expand_pred(n->arg, registry, fresh_counter, subst);
        return arg == n->arg ? p : pnot(arg);
    }
    if (auto *c = std::get_if<PAnd>(&p->node)) {
        auto l = expand_pred(c->left, registry, fresh_counter, subst);
        auto r = expand_pred(c->right, registry, fresh_counter, subst);
        return (l == c->left && r == c->right) ? p : pand(l, r);
    }
    if (auto *c = std::get_if<POr>(&p->node)) {
        auto l = expand_pred(c->left, registry, fresh_counter, subst);
        auto r = expand_pred(c->right, registry, fresh_counter, subst);
        return (l == c->left && r == c->right) ? p : por(l, r);
    }
    if (auto *c = std::get_if<PCompare>(&p->node)) {
        auto l = expand_expr(c->left, registry, fresh_counter, subst);
        auto r = expand_expr(c->right, registry, fresh_counter, subst);
        if (l == c->left && r == c->right) return p;
        return c->op == PCompare::Op::Eq ? peq(l, r) : pneq(l, r);
    }
    if (auto *n = std::get_if<PNullTest>(&p->node)) {
        auto a = expand_expr(n->arg, registry, fresh_counter, subst);
        return a == n->arg ? p : pis_null(a, n->negated);
    }
    if (auto *x = std::get_if<PExists>(&p->node)) {
        auto sp = expand_pattern(x->subplan, registry, fresh_counter, subst);
        return sp == x->subplan ? p : pexists(sp);
    }
    return p;
}

inline Binder rename_binder(const Binder &b, ExpandSubst &subst) {
    Binder out;
    for (auto &n : b.names) {
        auto fresh = subst.fresh(n);
        subst.binder_renames[n] = fresh;
        out.names.push_back(fresh);
    }
    return out;
}

inline AggPattern expand_agg(const AggPattern &a, const CustomOpRegistry &registry, int &fresh_counter,
                             ExpandSubst *subst) {
    std::vector<ExprPatternPtr> args;
    for (auto &x : a.args) args.push_back(expand_expr(x, registry, fresh_counter, subst));
    if (subst) {
        auto it = subst->lambda_args.find(a.func);
        if (it != subst->lambda_args.end()) {
            auto &lam = it->second;
            auto body = std::get<AggPattern>(lam.body);
            auto env = lambda_env(lam, args);
            std::vector<ExprPatternPtr> out;
            for (auto &x : body.args) out.push_back(subst_vars(x, env));
            return AggPattern{body.func, std::move(out)};
        }
    }
    return AggPattern{a.func, std::move(args)};
}

inline PlanPatternPtr expand_pattern(const PlanPatternPtr &q, const CustomOpRegistry &registry, int &fresh_counter,
                                     ExpandSubst *subst) {
    if (auto *s = std::get_if<SymbolPat>(&q->node)) {
        if (subst) {
            auto it = subst->plan_args.find(s->name);
            if (it != subst->plan_args.end()) return it->second;
        }
        return q;
    }
    if (std::holds_alternative<EmptyPat>(q->node)) return q;
    if (auto *f = std::get_if<FilterPat>(&q->node)) {
        auto input = expand_pattern(f->input, registry, fresh_counter, subst);
        if (subst) {
            ExpandSubst inner = *subst;
            auto binder = rename_binder(f->binder, inner);
            return pfilter(binder, expand_pred(f->predicate, registry, fresh_counter, &inner), input);
        }
        auto pred = expand_pred(f->predicate, registry, fresh_counter, nullptr);
        return (input == f->input && pred == f->predicate) ? q : pfilter(f->binder, pred, input);
    }
    if (auto *p = std::get_if<ProjectPat>(&q->node)) {
        auto input = expand_pattern(p->input, registry, fresh_counter, subst);
        if (subst) {
            ExpandSubst inner = *subst;
            auto binder = rename_binder(p->binder, inner);
            return pproject(binder, expand_expr(p->expr, registry, fresh_counter, &inner), input);
        }
        auto e = expand_expr(p->expr, registry, fresh_counter, nullptr);
        return (input == p->input && e == p->expr) ? q : pproject(p->binder, e, input);
    }
    if (auto *j = std::get_if<JoinPat>(&q->node)) {
        auto l = expand_pattern(j->left, registry, fresh_counter, subst);
        auto r = expand_pattern(j->right, registry, fresh_counter, subst);
        if (subst) {
            ExpandSubst inner = *subst;
            auto bl = rename_binder(j->left_binder, inner);
            auto br = rename_binder(j->right_binder, inner);
            return pjoin(bl, br, expand_pred(j->predicate, registry, fresh_counter, &inner), l, r);
        }
        auto pred = expand_pred(j->predicate, registry, fresh_counter, nullptr);
        return (l == j->left && r == j->right && pred == j->predicate) ? q
                                                                       : pjoin(j->left_binder, j->right_binder, pred, l, r);
    }
    if (auto *u = std::get_if<UnionPat>(&q->node)) {
        auto l = expand_pattern(u->left, registry, fresh_counter, subst);
        auto r = expand_pattern(u->right, registry, fresh_counter, subst);
        return (l == u->left && r == u->right) ? q : punion(l, r);
    }
    if (auto *d = std::get_if<DistinctPat>(&q->node)) {
        auto input = expand_pattern(d->input, registry, fresh_counter, subst);
        return input == d->input ? q : pdistinct(input);
    }
    if (auto *g = std::get_if<AggregatePat>(&q->node)) {
        auto input = expand_pattern(g->input, registry, fresh_counter, subst);
        if (subst) {
            ExpandSubst inner = *subst;
            auto binder = rename_binder(g->binder, inner);
            return paggregate(binder, expand_expr(g->key, registry, fresh_counter, &inner),
                              expand_agg(g->agg, registry, fresh_counter, &inner), input);
        }
        auto key = expand_expr(g->key, registry, fresh_counter, nullptr);
        auto agg = expand_agg(g->agg, registry, fresh_counter, nullptr);
        bool same = input == g->input && key == g->key && agg.func == g->agg.func;
        if (same) {
            for (size_t i = 0; i < agg.args.size(); ++i) same &= agg.args[i] == g->agg.args[i];
        }
        return same ? q : paggregate(g->binder, key, std::move(agg), input);
    }

    // Custom operator: expand args first, then splice the definition body.
    auto &c = std::get<CustomPat>(q->node);
    const auto &def = registry.at(c.op_name);
    ExpandSubst next{{}, {}, {}, &fresh_counter};
    for (size_t i = 0; i < c.args.size() && i < def.params.size(); ++i) {
        auto &pname = def.params[i].name;
        if (auto *pp = std::get_if<PlanPatternPtr>(&c.args[i])) {
            next.plan_args[pname] = expand_pattern(*pp, registry, fresh_counter, subst);
        } else {
            auto lam = std::get<LambdaPat>(c.args[i]);
            // expand the lambda body in the *outer* substitution context
            if (auto *b = std::get_if<PredPatternPtr>(&lam.body)) {
                lam.body = expand_pred(*b, registry, fresh_counter, subst);
            } else if (auto *e = std::get_if<ExprPatternPtr>(&lam.body)) {
                lam.body = expand_expr(*e, registry, fresh_counter, subst);
            } else {
                lam.body = expand_agg(std::get<AggPattern>(lam.body), registry, fresh_counter, subst);
            }
            if (subst) {
                // binders of the actual lambda may have been renamed upstream:
                // apply outer renames to binder names referenced in the body.
                for (auto &b : lam.binders)
                    for (auto &n : b.names)
                        if (subst->binder_renames.count(n)) n = subst->binder_renames.at(n);
            }
            next.lambda_args[pname] = std::move(lam);
        }
    }
    // The definition body may itself contain custom ops; expand recursively.
    return expand_pattern(def.semantics, registry, fresh_counter, &next);
}

} // namespace detail

/// Replaces every custom-operator occurrence by its registered semantics
/// with arguments substituted (capture-avoiding). The result contains only
/// core operators. Returns the input subtree unchanged (same pointers) when
/// it contains no custom ops, which makes expansion idempotent.
inline PlanPatternPtr expand(const PlanPatternPtr &pattern, const CustomOpRegistry &registry) {
    int fresh_counter = 0;
    return detail::expand_pattern(pattern, registry, fresh_counter, nullptr);
}

// ---------------------------------------------------------------------------
// Schema derivation

namespace detail {

inline std::string agg_column_name(const AggCall &a, const Schema &input) {
    auto arg_name = [&](const ScalarExprPtr &e) -> std::string {
        if (auto *c = std::get_if<ColRef>(&e->node);
            c && c->side == Side::Only && c->index >= 0 && static_cast<size_t>(c->index) < input.arity())
            return input.columns[c->index].first;
        return "expr";
    };
    switch (a.func) {
        case AggFunc::Sum: return "sum_" + arg_name(a.args.at(0));
        case AggFunc::Count: return "count";
        case AggFunc::Min: return "min_" + arg_name(a.args.at(0));
        case AggFunc::Max: return "max_" + arg_name(a.args.at(0));
        case AggFunc::Uninterp: return a.symbol;
    }
    return "agg";
}

struct ExprTypeEnv {
    const Schema *left = nullptr;
    const Schema *right = nullptr;
    const Schema *only = nullptr;
};

inline ValueType infer_expr_type(const ScalarExpr &e, const ExprTypeEnv &env) {
    if (auto *c = std::get_if<ColRef>(&e.node)) {
        const Schema *s = c->side == Side::Left ? env.left : c->side == Side::Right ? env.right : env.only;
        if (!s || c->index < 0 || static_cast<size_t>(c->index) >= s->arity())
            throw SchemaError("column reference out of range");
        return s->columns[c->index].second;
    }
    if (auto *l = std::get_if<Literal>(&e.node)) return l->type;
    if (auto *f = std::get_if<Call>(&e.node)) {
        switch (f->op) {
            case CallOp::Add:
            case CallOp::Sub:
            case CallOp::Mul: return ValueType::Int;
            case CallOp::Uninterp: return f->result_type;
            default: return ValueType::Bool;
        }
    }
    return ValueType::Bool; // exists
}

inline ValueType infer_agg_type(const AggCall &a, const ExprTypeEnv &env) {
    switch (a.func) {
        case AggFunc::Sum:
        case AggFunc::Count: return ValueType::Int;
        case AggFunc::Min:
        case AggFunc::Max: return infer_expr_type(*a.args.at(0), env);
        case AggFunc::Uninterp: return a.result_type;
    }
    return ValueType::Int;
}

} // namespace detail

/// Schema of a custom node is derived from its definition: type parameters
/// are instantiated from the plan arguments' schemas, then the output row
/// type is assembled from those bindings.
inline Schema output_schema(const LogicalPlan &plan, const CustomOpRegistry &registry);

namespace detail {

inline void bind_type_schema(const TypeRef &t, const Schema &s, std::map<std::string, Schema> &binding) {
    if (t.kind == TypeRef::Kind::Named) {
        auto [it, inserted] = binding.emplace(t.name, s);
        if (!inserted && !(it->second == s))
            throw SchemaError("inconsistent instantiation of type " + t.name);
        return;
    }
    if (t.kind == TypeRef::Kind::Product) {
        // split the schema among components; only resolvable when all but one
        // component already has a known arity
        size_t known = 0;
        const TypeRef *unknown = nullptr;
        for (auto &c : t.components) {
            if (c.kind == TypeRef::Kind::Named && binding.count(c.name)) {
                known += binding.at(c.name).arity();
            } else if (unknown) {
                throw SchemaError("cannot split schema across product type");
            } else {
                unknown = &c;
            }
        }
        size_t offset = 0;
        for (auto &c : t.components) {
            size_t width = (&c == unknown) ? s.arity() - known : binding.at(c.name).arity();
            Schema part;
            for (size_t i = 0; i < width; ++i) part.columns.push_back(s.columns.at(offset + i));
            offset += width;
            bind_type_schema(c, part, binding);
        }
        return;
    }
    throw SchemaError("Bool is not a row type");
}

inline Schema schema_of_typeref(const TypeRef &t, const std::map<std::string, Schema> &binding) {
    if (t.kind == TypeRef::Kind::Named) {
        auto it = binding.find(t.name);
        if (it == binding.end()) throw SchemaError("type " + t.name + " has no schema instantiation");
        return it->second;
    }
    if (t.kind == TypeRef::Kind::Product) {
        Schema out;
        for (auto &c : t.components) {
            auto part = schema_of_typeref(c, binding);
            out.columns.insert(out.columns.end(), part.columns.begin(), part.columns.end());
        }
        return out;
    }
    throw SchemaError("Bool is not a row type");
}

} // namespace detail

inline Schema output_schema(const LogicalPlan &plan, const CustomOpRegistry &registry) {
    using namespace detail;
    if (auto *s = std::get_if<ScanNode>(&plan.node)) return s->schema;
    if (auto *v = std::get_if<ValuesNode>(&plan.node)) return v->schema;
    if (auto *e = std::get_if<EmptyNode>(&plan.node)) return e->schema;
    if (auto *f = std::get_if<FilterNode>(&plan.node)) return output_schema(*f->input, registry);
    if (auto *p = std::get_if<ProjectNode>(&plan.node)) {
        Schema in = output_schema(*p->input, registry);
        ExprTypeEnv env{nullptr, nullptr, &in};
        Schema out;
        for (auto &[expr, name] : p->items) out.columns.emplace_back(name, infer_expr_type(*expr, env));
        return out;
    }
    if (auto *j = std::get_if<JoinNode>(&plan.node)) {
        Schema l = output_schema(*j->left, registry);
        Schema r = output_schema(*j->right, registry);
        ExprTypeEnv env{&l, &r, nullptr};
        if (infer_expr_type(*j->predicate, env) != ValueType::Bool)
            throw SchemaError("join predicate is not boolean");
        Schema out = l;
        out.columns.insert(out.columns.end(), r.columns.begin(), r.columns.end());
        return out;
    }
    if (auto *u = std::get_if<UnionNode>(&plan.node)) {
        Schema l = output_schema(*u->left, registry);
        Schema r = output_schema(*u->right, registry);
        // column types must agree; the left schema (including names) wins
        if (l.arity() != r.arity()) throw SchemaError("union inputs have different arities");
        for (size_t i = 0; i < l.arity(); ++i)
            if (l.columns[i].second != r.columns[i].second)
                throw SchemaError("union inputs disagree on column " + std::to_string(i));
        return l;
    }
    if (auto *d = std::get_if<DistinctNode>(&plan.node)) return output_schema(*d->input, registry);
    if (auto *a = std::get_if<AggregateNode>(&plan.node)) {
        Schema in = output_schema(*a->input, registry);
        ExprTypeEnv env{nullptr, nullptr, &in};
        Schema out;
        for (auto &k : a->group_keys) {
            std::string name = "k" + std::to_string(out.arity());
            if (auto *c = std::get_if<ColRef>(&k->node); c && c->side == Side::Only)
                name = in.columns.at(c->index).first;
            out.columns.emplace_back(name, infer_expr_type(*k, env));
        }
        for (auto &ac : a->aggs) out.columns.emplace_back(agg_column_name(ac, in), infer_agg_type(ac, env));
        return out;
    }

    auto &c = std::get<CustomNode>(plan.node);
    const auto &def = registry.at(c.op_name);
    if (c.args.size() != def.params.size())
        throw SchemaError("custom node " + c.op_name + " has wrong arity");
    std::map<std::string, Schema> binding;
    for (size_t i = 0; i < c.args.size(); ++i) {
        if (def.params[i].kind == ParamKind::Plan) {
            auto &sub = std::get<LogicalPlanPtr>(c.args[i]);
            bind_type_schema(def.params[i].rowType, output_schema(*sub, registry), binding);
        }
    }
    return schema_of_typeref(def.outputRowType, binding);
}

inline Schema output_schema(const LogicalPlanPtr &plan, const CustomOpRegistry &registry) {
    return output_schema(*plan, registry);
}

} // namespace rulekit
