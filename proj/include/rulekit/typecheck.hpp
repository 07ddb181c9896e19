#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "rulekit/extension.hpp"
#include "rulekit/pattern.hpp"
#include "rulekit/validate.hpp"

namespace rulekit {

inline std::string to_string(const TypeRef &t) {
    switch (t.kind) {
        case TypeRef::Kind::Bool: return "Bool";
        case TypeRef::Kind::Named: return t.name.empty() ? "_" : t.name;
        case TypeRef::Kind::Product: {
            std::string s = "(";
            for (size_t i = 0; i < t.components.size(); ++i) {
                if (i) s += ", ";
                s += to_string(t.components[i]);
            }
            return s + ")";
        }
    }
    return "?";
}

/// A rule whose every pattern node carries a type annotation and whose
/// from/to output types have been unified.
struct TypedRule {
    Rule rule;
    PatternTypes types;
    TypeRef output = TypeRef::named("");
};

namespace detail {

/// The wildcard type: a literal whose abstract type is unknown until
/// unified against a declared type.
inline bool is_any(const TypeRef &t) { return t.kind == TypeRef::Kind::Named && t.name.empty(); }

inline TypeRef any_type() { return TypeRef::named(""); }

/// First-order unification without variables: names match by name, products
/// componentwise at equal arity, Bool with Bool; the wildcard unifies with
/// anything. A named symbol never unifies with a product.
inline bool unify(const TypeRef &a, const TypeRef &b, TypeRef &out) {
    if (is_any(a)) {
        out = b;
        return true;
    }
    if (is_any(b)) {
        out = a;
        return true;
    }
    if (a.kind != b.kind) return false;
    if (a.kind == TypeRef::Kind::Bool) {
        out = a;
        return true;
    }
    if (a.kind == TypeRef::Kind::Named) {
        if (a.name != b.name) return false;
        out = a;
        return true;
    }
    if (a.components.size() != b.components.size()) return false;
    TypeRef merged = TypeRef::product({});
    for (size_t i = 0; i < a.components.size(); ++i) {
        TypeRef c;
        if (!unify(a.components[i], b.components[i], c)) return false;
        merged.components.push_back(std::move(c));
    }
    out = std::move(merged);
    return true;
}

/// Matches a definition-side type (which may mention the definition's type
/// parameters) against an actual type, accumulating parameter bindings.
inline bool match_type_params(const TypeRef &defType, const TypeRef &actual,
                              const std::vector<std::string> &typeParams,
                              std::map<std::string, TypeRef> &binding) {
    if (defType.kind == TypeRef::Kind::Named) {
        for (auto &tp : typeParams) {
            if (defType.name != tp) continue;
            auto it = binding.find(tp);
            if (it == binding.end()) {
                binding.emplace(tp, actual);
                return true;
            }
            TypeRef merged;
            return unify(it->second, actual, merged);
        }
        return actual.kind == TypeRef::Kind::Named && actual.name == defType.name;
    }
    if (defType.kind == TypeRef::Kind::Bool) return actual.kind == TypeRef::Kind::Bool;
    if (actual.kind != TypeRef::Kind::Product || actual.components.size() != defType.components.size())
        return false;
    for (size_t i = 0; i < defType.components.size(); ++i)
        if (!match_type_params(defType.components[i], actual.components[i], typeParams, binding)) return false;
    return true;
}

inline TypeRef subst_type_params(const TypeRef &t, const std::map<std::string, TypeRef> &binding) {
    if (t.kind == TypeRef::Kind::Named) {
        auto it = binding.find(t.name);
        return it == binding.end() ? t : it->second;
    }
    if (t.kind == TypeRef::Kind::Product) {
        TypeRef out = TypeRef::product({});
        for (auto &c : t.components) out.components.push_back(subst_type_params(c, binding));
        return out;
    }
    return t;
}

struct Typer {
    const Rule &rule;
    const CustomOpRegistry &registry;
    PatternTypes types;
    std::vector<Diagnostic> diags;
    std::map<std::string, TypeRef> env; // binder name -> type

    void mismatch(const std::string &path, const TypeRef &expected, const TypeRef &found) {
        diags.push_back({Severity::Error, 0, 0, path,
                         "TypeMismatch: expected " + to_string(expected) + ", found " + to_string(found)});
    }

    void error(const std::string &path, std::string msg) {
        diags.push_back({Severity::Error, 0, 0, path, std::move(msg)});
    }

    TypeRef require(const TypeRef &expected, const TypeRef &found, const std::string &path) {
        TypeRef out;
        if (unify(expected, found, out)) return out;
        mismatch(path, expected, found);
        return any_type();
    }

    /// Binds a binder against a row type; destructuring requires a product
    /// of matching arity. Returns the component annotation list.
    std::vector<TypeRef> bind(const Binder &b, const TypeRef &row, const std::string &path) {
        if (b.names.size() == 1) {
            env[b.names[0]] = row;
            return {row};
        }
        if (row.kind != TypeRef::Kind::Product || row.components.size() != b.names.size()) {
            error(path, "ArityMismatch: binder destructures " + std::to_string(b.names.size()) +
                            " components but the row type is " + to_string(row));
            for (auto &n : b.names) env[n] = any_type();
            return {b.names.size(), any_type()};
        }
        for (size_t i = 0; i < b.names.size(); ++i) env[b.names[i]] = row.components[i];
        return {row};
    }

    void unbind(const Binder &b) {
        for (auto &n : b.names) env.erase(n);
    }

    TypeRef infer(const ExprPatternPtr &e, const std::string &path) {
        if (auto *v = std::get_if<EVar>(&e->node)) {
            auto it = env.find(v->name);
            if (it == env.end()) {
                error(path, "unbound variable " + v->name);
                return any_type();
            }
            return it->second;
        }
        if (auto *c = std::get_if<EConst>(&e->node))
            return c->value.type == ValueType::Bool ? TypeRef::boolean() : any_type();
        if (auto *t = std::get_if<ETupleProject>(&e->node)) {
            TypeRef base = infer(t->base, path + ".base");
            if (is_any(base)) return any_type();
            if (base.kind != TypeRef::Kind::Product ||
                static_cast<size_t>(t->index) >= base.components.size()) {
                error(path, "TypeMismatch: component " + std::to_string(t->index) + " of non-product type " +
                                to_string(base));
                return any_type();
            }
            return base.components[t->index];
        }
        auto &a = std::get<EApply>(e->node);
        auto *f = rule.find_func(a.func);
        if (!f) {
            error(path, "unbound symbol " + a.func);
            return any_type();
        }
        check_args(f, a.args, path);
        return f->result;
    }

    void check_args(const FuncSymbol *f, const std::vector<ExprPatternPtr> &args, const std::string &path) {
        if (f->params.size() != args.size()) {
            error(path, "ArityMismatch: " + f->name + " takes " + std::to_string(f->params.size()) +
                            " arguments, got " + std::to_string(args.size()));
            return;
        }
        for (size_t i = 0; i < args.size(); ++i) {
            TypeRef at = infer(args[i], path + ".arg" + std::to_string(i));
            require(f->params[i], at, path + ".arg" + std::to_string(i));
        }
    }

    void check_pred(const PredPatternPtr &p, const std::string &path) {
        if (auto *a = std::get_if<PApply>(&p->node)) {
            auto *f = rule.find_func(a->func);
            if (!f) {
                error(path, "unbound symbol " + a->func);
                return;
            }
            check_args(f, a->args, path);
            if (f->result.kind != TypeRef::Kind::Bool) mismatch(path, TypeRef::boolean(), f->result);
        } else if (auto *n = std::get_if<PNot>(&p->node)) {
            check_pred(n->arg, path + ".not");
        } else if (auto *c = std::get_if<PAnd>(&p->node)) {
            check_pred(c->left, path + ".and.l");
            check_pred(c->right, path + ".and.r");
        } else if (auto *c = std::get_if<POr>(&p->node)) {
            check_pred(c->left, path + ".or.l");
            check_pred(c->right, path + ".or.r");
        } else if (auto *c = std::get_if<PCompare>(&p->node)) {
            TypeRef l = infer(c->left, path + ".cmp.l");
            TypeRef r = infer(c->right, path + ".cmp.r");
            require(l, r, path + ".cmp");
        } else if (auto *n = std::get_if<PNullTest>(&p->node)) {
            TypeRef t = infer(n->arg, path + ".nulltest");
            if (t.kind == TypeRef::Kind::Product)
                error(path, "TypeMismatch: null test applies to a single value, found " + to_string(t));
        } else if (auto *x = std::get_if<PExists>(&p->node)) {
            infer_plan(x->subplan, path + ".exists");
        }
    }

    TypeRef check_agg(const AggPattern &a, const std::string &path) {
        auto *f = rule.find_func(a.func);
        if (!f) {
            error(path, "unbound symbol " + a.func);
            return any_type();
        }
        check_args(f, a.args, path);
        return f->result;
    }

    TypeRef infer_plan(const PlanPatternPtr &q, const std::string &path) {
        TypeRef out = infer_plan_node(q, path);
        types.plan_out[q.get()] = out;
        return out;
    }

    TypeRef infer_plan_node(const PlanPatternPtr &q, const std::string &path) {
        if (auto *s = std::get_if<SymbolPat>(&q->node)) {
            if (auto *d = rule.find_plan(s->name)) return d->rowType;
            error(path, "unbound symbol " + s->name);
            return any_type();
        }
        if (auto *e = std::get_if<EmptyPat>(&q->node)) return e->rowType;
        if (auto *f = std::get_if<FilterPat>(&q->node)) {
            TypeRef t = infer_plan(f->input, path + ".input");
            types.binders[q.get()] = bind(f->binder, t, path);
            check_pred(f->predicate, path + ".pred");
            unbind(f->binder);
            return t;
        }
        if (auto *p = std::get_if<ProjectPat>(&q->node)) {
            TypeRef t = infer_plan(p->input, path + ".input");
            types.binders[q.get()] = bind(p->binder, t, path);
            TypeRef out = infer(p->expr, path + ".expr");
            unbind(p->binder);
            if (out.kind == TypeRef::Kind::Bool) {
                error(path, "TypeMismatch: projection result must be a row type, found Bool");
                return any_type();
            }
            return out;
        }
        if (auto *j = std::get_if<JoinPat>(&q->node)) {
            TypeRef tl = infer_plan(j->left, path + ".left");
            TypeRef tr = infer_plan(j->right, path + ".right");
            bind(j->left_binder, tl, path);
            bind(j->right_binder, tr, path);
            types.binders[q.get()] = {tl, tr};
            check_pred(j->predicate, path + ".pred");
            unbind(j->right_binder);
            unbind(j->left_binder);
            return TypeRef::product({tl, tr});
        }
        if (auto *u = std::get_if<UnionPat>(&q->node)) {
            TypeRef tl = infer_plan(u->left, path + ".left");
            TypeRef tr = infer_plan(u->right, path + ".right");
            return require(tl, tr, path);
        }
        if (auto *d = std::get_if<DistinctPat>(&q->node)) return infer_plan(d->input, path + ".input");
        if (auto *g = std::get_if<AggregatePat>(&q->node)) {
            TypeRef t = infer_plan(g->input, path + ".input");
            types.binders[q.get()] = bind(g->binder, t, path);
            TypeRef k = infer(g->key, path + ".key");
            TypeRef v = check_agg(g->agg, path + ".agg");
            unbind(g->binder);
            if (k.kind == TypeRef::Kind::Bool || v.kind == TypeRef::Kind::Bool) {
                error(path, "TypeMismatch: aggregate key/result must be row types");
                return any_type();
            }
            return TypeRef::product({k, v});
        }
        return infer_custom(std::get<CustomPat>(q->node), path);
    }

    TypeRef infer_custom(const CustomPat &c, const std::string &path) {
        const auto *def = registry.find(c.op_name);
        if (!def) {
            error(path, "UnknownCustomOp: " + c.op_name);
            return any_type();
        }
        if (c.args.size() != def->params.size()) {
            error(path, "ArityMismatch: " + c.op_name + " takes " + std::to_string(def->params.size()) +
                            " arguments, got " + std::to_string(c.args.size()));
            return any_type();
        }
        // First pass: plan arguments instantiate the definition's type params.
        std::map<std::string, TypeRef> binding;
        for (size_t i = 0; i < c.args.size(); ++i) {
            if (def->params[i].kind != ParamKind::Plan) continue;
            auto *pp = std::get_if<PlanPatternPtr>(&c.args[i]);
            if (!pp) {
                error(path + ".arg" + std::to_string(i), "expected a plan argument");
                continue;
            }
            TypeRef at = infer_plan(*pp, path + ".arg" + std::to_string(i));
            if (!match_type_params(def->params[i].rowType, at, def->typeParams, binding))
                mismatch(path + ".arg" + std::to_string(i), def->params[i].rowType, at);
        }
        // Second pass: check lambda arguments under the instantiated types.
        for (size_t i = 0; i < c.args.size(); ++i) {
            auto &p = def->params[i];
            if (p.kind == ParamKind::Plan) continue;
            std::string apath = path + ".arg" + std::to_string(i);
            auto *lp = std::get_if<LambdaPat>(&c.args[i]);
            if (!lp) {
                error(apath, "expected a lambda argument");
                continue;
            }
            std::vector<TypeRef> binderTypes;
            if (lp->binders.size() != p.params.size()) {
                error(apath, "ArityMismatch: lambda takes " + std::to_string(lp->binders.size()) +
                                 " parameters, expected " + std::to_string(p.params.size()));
                continue;
            }
            std::vector<TypeRef> annotated;
            for (size_t bi = 0; bi < lp->binders.size(); ++bi) {
                TypeRef bt = subst_type_params(p.params[bi], binding);
                bind(lp->binders[bi], bt, apath);
                annotated.push_back(bt);
            }
            types.binders[lp] = annotated;
            if (p.kind == ParamKind::Predicate) {
                auto *pb = std::get_if<PredPatternPtr>(&lp->body);
                if (pb) check_pred(*pb, apath);
                else error(apath, "expected a predicate body");
            } else if (p.kind == ParamKind::Scalar) {
                auto *eb = std::get_if<ExprPatternPtr>(&lp->body);
                if (eb) require(subst_type_params(p.result, binding), infer(*eb, apath), apath);
                else error(apath, "expected a scalar body");
            } else { // aggregate
                auto *ab = std::get_if<AggPattern>(&lp->body);
                if (ab) require(subst_type_params(p.result, binding), check_agg(*ab, apath), apath);
                else error(apath, "expected an aggregate body");
            }
            for (auto it = lp->binders.rbegin(); it != lp->binders.rend(); ++it) unbind(*it);
        }
        for (auto &tp : def->typeParams)
            if (!binding.count(tp))
                error(path, "cannot infer type parameter " + tp + " of " + c.op_name);
        return subst_type_params(def->outputRowType, binding);
    }
};

} // namespace detail

/// Assigns a type to every pattern node and unifies the from/to output
/// types. Expects validate_rule to have passed.
inline std::variant<TypedRule, std::vector<Diagnostic>> typecheck_rule(const Rule &rule,
                                                                       const CustomOpRegistry &registry) {
    detail::Typer t{rule, registry, {}, {}, {}};
    TypeRef fromT = t.infer_plan(rule.from, "from");
    TypeRef toT = t.infer_plan(rule.to, "to");
    TypeRef out;
    if (!detail::unify(fromT, toT, out))
        t.mismatch("to", fromT, toT);
    if (!t.diags.empty()) return std::move(t.diags);
    return TypedRule{rule, std::move(t.types), std::move(out)};
}

/// Validates and typechecks a custom-operator definition against its own
/// parameter signature, then installs it (with its semantics annotations)
/// in the registry. Definitions must arrive in dependency order.
inline std::vector<Diagnostic> register_def(CustomOpDef def, CustomOpRegistry &registry) {
    std::vector<Diagnostic> diags;
    if (registry.contains(def.name)) {
        diags.push_back({Severity::Error, 0, 0, def.name, "DuplicateName: " + def.name});
        return diags;
    }
    Rule scope = def.as_rule();
    auto sigs = registry.signatures();
    diags = validate_rule(scope, &sigs);
    if (!diags.empty()) return diags;
    auto res = typecheck_rule(scope, registry);
    if (auto *errs = std::get_if<std::vector<Diagnostic>>(&res)) return std::move(*errs);
    auto &typed = std::get<TypedRule>(res);
    TypeRef merged;
    if (!detail::unify(typed.output, def.outputRowType, merged)) {
        diags.push_back({Severity::Error, 0, 0, def.name,
                         "TypeMismatch: semantics has output type " + to_string(typed.output) +
                             ", declared " + to_string(def.outputRowType)});
        return diags;
    }
    def.semanticsTypes = typed.types;
    registry.add(std::move(def));
    return {};
}

} // namespace rulekit
