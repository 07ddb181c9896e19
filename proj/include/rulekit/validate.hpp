#pragma once

#include <map>
#include <string>
#include <vector>

#include "rulekit/pattern.hpp"

namespace rulekit {

enum class ParamKind { Plan, Predicate, Scalar, Aggregate };

/// Minimal signature view of the custom-op registry, enough for structural
/// validation without depending on the full registry type.
using CustomOpSigMap = std::map<std::string, std::vector<ParamKind>>;

namespace detail {

struct RuleValidator {
    const Rule &rule;
    const CustomOpSigMap *custom_sigs;
    std::vector<Diagnostic> diags;
    std::vector<std::string> scope; // flat stack of visible binder names

    void error(std::string path, std::string msg) {
        diags.push_back({Severity::Error, 0, 0, std::move(path), std::move(msg)});
    }

    bool type_ok(const TypeRef &t, const std::string &path) {
        if (t.kind == TypeRef::Kind::Named) {
            if (!rule.has_type(t.name)) {
                error(path, "unknown type symbol " + t.name);
                return false;
            }
            return true;
        }
        if (t.kind == TypeRef::Kind::Product) {
            if (t.components.size() < 2) {
                error(path, "product type arity must be >= 2");
                return false;
            }
            bool ok = true;
            for (auto &c : t.components) ok &= type_ok(c, path);
            return ok;
        }
        return true; // Bool
    }

    bool in_scope(const std::string &name) const {
        for (auto &n : scope)
            if (n == name) return true;
        return false;
    }

    void push_binder(const Binder &b, const std::string &path) {
        for (auto &n : b.names) {
            if (in_scope(n)) error(path, "binder " + n + " shadows an enclosing binder");
            scope.push_back(n);
        }
    }

    void pop_binder(const Binder &b) {
        for (size_t i = 0; i < b.names.size(); ++i) scope.pop_back();
    }

    void check_decls() {
        std::map<std::string, int> seen;
        for (auto &t : rule.typeDecls) seen[t.name]++;
        for (auto &f : rule.funcDecls) seen[f.name]++;
        for (auto &p : rule.planDecls) seen[p.name]++;
        for (auto &[name, count] : seen)
            if (count > 1) error("decls", "duplicate declaration of " + name);

        for (auto &f : rule.funcDecls) {
            std::string path = "decls." + f.name;
            for (auto &p : f.params) type_ok(p, path);
            type_ok(f.result, path);
            if (f.kind == FuncKind::Predicate && f.result.kind != TypeRef::Kind::Bool)
                error(path, "predicate symbol " + f.name + " must have result Bool");
            if (f.kind == FuncKind::Aggregate && f.params.size() != 1)
                error(path, "aggregate symbol " + f.name + " must take exactly one bag parameter");
        }
        for (auto &p : rule.planDecls) type_ok(p.rowType, "decls." + p.name);
        for (auto &c : rule.constraints) {
            auto *f = rule.find_func(c.subject);
            if (!f || f->kind != FuncKind::Scalar)
                error("constraints", "injective constraint subject " + c.subject +
                                         " is not a declared scalar function symbol");
        }
    }

    void visit(const ExprPatternPtr &e, const std::string &path) {
        if (auto *v = std::get_if<EVar>(&e->node)) {
            if (!in_scope(v->name)) error(path, "unbound variable " + v->name);
        } else if (auto *a = std::get_if<EApply>(&e->node)) {
            auto *f = rule.find_func(a->func);
            if (!f) {
                error(path, "unbound symbol " + a->func);
            } else {
                if (f->kind != FuncKind::Scalar)
                    error(path, a->func + " is not a scalar function symbol");
                if (f->params.size() != a->args.size())
                    error(path, "arity mismatch applying " + a->func);
            }
            for (size_t i = 0; i < a->args.size(); ++i) visit(a->args[i], path + ".arg" + std::to_string(i));
        } else if (auto *t = std::get_if<ETupleProject>(&e->node)) {
            if (t->index < 0) error(path, "negative tuple component index");
            visit(t->base, path + ".base");
        }
    }

    void visit(const PredPatternPtr &p, const std::string &path) {
        if (auto *a = std::get_if<PApply>(&p->node)) {
            auto *f = rule.find_func(a->func);
            if (!f) {
                error(path, "unbound symbol " + a->func);
            } else {
                if (f->kind != FuncKind::Predicate)
                    error(path, a->func + " is not a predicate symbol");
                if (f->params.size() != a->args.size())
                    error(path, "arity mismatch applying " + a->func);
            }
            for (size_t i = 0; i < a->args.size(); ++i) visit(a->args[i], path + ".arg" + std::to_string(i));
        } else if (auto *n = std::get_if<PNot>(&p->node)) {
            visit(n->arg, path + ".not");
        } else if (auto *c = std::get_if<PAnd>(&p->node)) {
            visit(c->left, path + ".and.l");
            visit(c->right, path + ".and.r");
        } else if (auto *c = std::get_if<POr>(&p->node)) {
            visit(c->left, path + ".or.l");
            visit(c->right, path + ".or.r");
        } else if (auto *c = std::get_if<PCompare>(&p->node)) {
            visit(c->left, path + ".cmp.l");
            visit(c->right, path + ".cmp.r");
        } else if (auto *n = std::get_if<PNullTest>(&p->node)) {
            visit(n->arg, path + ".nulltest");
        } else if (auto *x = std::get_if<PExists>(&p->node)) {
            visit(x->subplan, path + ".exists");
        }
    }

    void visit_agg(const AggPattern &a, const std::string &path) {
        auto *f = rule.find_func(a.func);
        if (!f) {
            error(path, "unbound symbol " + a.func);
        } else if (f->kind != FuncKind::Aggregate) {
            error(path, a.func + " is not an aggregate symbol");
        }
        // No nested aggregates: argument expressions may apply scalars only.
        for (size_t i = 0; i < a.args.size(); ++i) visit(a.args[i], path + ".arg" + std::to_string(i));
    }

    void visit(const PlanPatternPtr &q, const std::string &path) {
        if (auto *s = std::get_if<SymbolPat>(&q->node)) {
            if (!rule.find_plan(s->name)) error(path, "unbound symbol " + s->name);
        } else if (auto *e = std::get_if<EmptyPat>(&q->node)) {
            type_ok(e->rowType, path);
        } else if (auto *f = std::get_if<FilterPat>(&q->node)) {
            visit(f->input, path + ".input");
            push_binder(f->binder, path);
            visit(f->predicate, path + ".pred");
            pop_binder(f->binder);
        } else if (auto *p = std::get_if<ProjectPat>(&q->node)) {
            visit(p->input, path + ".input");
            push_binder(p->binder, path);
            visit(p->expr, path + ".expr");
            pop_binder(p->binder);
        } else if (auto *j = std::get_if<JoinPat>(&q->node)) {
            visit(j->left, path + ".left");
            visit(j->right, path + ".right");
            push_binder(j->left_binder, path);
            push_binder(j->right_binder, path);
            visit(j->predicate, path + ".pred");
            pop_binder(j->right_binder);
            pop_binder(j->left_binder);
        } else if (auto *u = std::get_if<UnionPat>(&q->node)) {
            visit(u->left, path + ".left");
            visit(u->right, path + ".right");
        } else if (auto *d = std::get_if<DistinctPat>(&q->node)) {
            visit(d->input, path + ".input");
        } else if (auto *g = std::get_if<AggregatePat>(&q->node)) {
            visit(g->input, path + ".input");
            push_binder(g->binder, path);
            visit(g->key, path + ".key");
            visit_agg(g->agg, path + ".agg");
            pop_binder(g->binder);
        } else if (auto *c = std::get_if<CustomPat>(&q->node)) {
            const std::vector<ParamKind> *sig = nullptr;
            if (custom_sigs) {
                auto it = custom_sigs->find(c->op_name);
                if (it == custom_sigs->end()) {
                    error(path, "unknown custom operator " + c->op_name);
                } else {
                    sig = &it->second;
                    if (sig->size() != c->args.size())
                        error(path, "arity mismatch for custom operator " + c->op_name);
                }
            }
            for (size_t i = 0; i < c->args.size(); ++i) {
                std::string apath = path + "." + c->op_name + ".arg" + std::to_string(i);
                if (auto *pp = std::get_if<PlanPatternPtr>(&c->args[i])) {
                    if (sig && i < sig->size() && (*sig)[i] != ParamKind::Plan)
                        error(apath, "expected a lambda argument, got a plan");
                    visit(*pp, apath);
                } else {
                    auto &l = std::get<LambdaPat>(c->args[i]);
                    if (sig && i < sig->size() && (*sig)[i] == ParamKind::Plan)
                        error(apath, "expected a plan argument, got a lambda");
                    for (auto &b : l.binders) push_binder(b, apath);
                    if (auto *b = std::get_if<PredPatternPtr>(&l.body)) visit(*b, apath);
                    else if (auto *b2 = std::get_if<ExprPatternPtr>(&l.body)) visit(*b2, apath);
                    else visit_agg(std::get<AggPattern>(l.body), apath);
                    for (auto it = l.binders.rbegin(); it != l.binders.rend(); ++it) pop_binder(*it);
                }
            }
        }
    }
};

} // namespace detail

/// Structural validation of a rule: declaration consistency, binder scoping,
/// symbol resolution, arity checks, and the capture discipline that every
/// plan/function symbol used in `to` also appears in `from`. Output-type
/// unification of from/to is performed by typecheck_rule.
inline std::vector<Diagnostic> validate_rule(const Rule &rule, const CustomOpSigMap *custom_sigs = nullptr) {
    detail::RuleValidator v{rule, custom_sigs, {}, {}};
    v.check_decls();
    if (rule.from) v.visit(rule.from, "from");
    else v.error("from", "missing match pattern");
    if (rule.to) v.visit(rule.to, "to");
    else v.error("to", "missing transform pattern");

    if (rule.from && rule.to && v.diags.empty()) {
        auto ffrom = free_symbols(rule.from, rule);
        auto fto = free_symbols(rule.to, rule);
        for (auto &p : fto.plans)
            if (!ffrom.plans.count(p)) v.error("to", "plan symbol " + p + " does not appear in the match pattern");
        for (auto &f : fto.funcs)
            if (!ffrom.funcs.count(f))
                v.error("to", "function symbol " + f + " does not appear in the match pattern");
    }
    return std::move(v.diags);
}

} // namespace rulekit
