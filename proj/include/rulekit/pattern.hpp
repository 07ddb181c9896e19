#pragma once

#include <algorithm>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "rulekit/plan_ir.hpp"

namespace rulekit {

// ---------------------------------------------------------------------------
// Types of the rule language

struct TypeRef {
    enum class Kind { Named, Product, Bool };
    Kind kind = Kind::Named;
    std::string name;                 // Named
    std::vector<TypeRef> components;  // Product, arity >= 2

    static TypeRef named(std::string n) { return TypeRef{Kind::Named, std::move(n), {}}; }
    static TypeRef product(std::vector<TypeRef> cs) { return TypeRef{Kind::Product, "", std::move(cs)}; }
    static TypeRef boolean() { return TypeRef{Kind::Bool, "", {}}; }

    bool operator==(const TypeRef &) const = default;
};

struct TypeSymbol {
    std::string name;
    bool operator==(const TypeSymbol &) const = default;
};

enum class FuncKind { Scalar, Predicate, Aggregate };

/// For aggregate symbols, params holds exactly one entry: the element row
/// type X of the Bag<X> argument.
struct FuncSymbol {
    std::string name;
    std::vector<TypeRef> params;
    TypeRef result;
    FuncKind kind = FuncKind::Scalar;
    bool operator==(const FuncSymbol &) const = default;
};

struct PlanSymbol {
    std::string name;
    TypeRef rowType;
    bool operator==(const PlanSymbol &) const = default;
};

// ---------------------------------------------------------------------------
// Pattern AST

/// Lambda binder. More than one name means positional tuple destructuring:
/// (k, v) binds component 0 to k and component 1 to v.
struct Binder {
    std::vector<std::string> names;
    bool operator==(const Binder &) const = default;
};

struct ExprPattern;
struct PredPattern;
struct PlanPattern;
using ExprPatternPtr = std::shared_ptr<const ExprPattern>;
using PredPatternPtr = std::shared_ptr<const PredPattern>;
using PlanPatternPtr = std::shared_ptr<const PlanPattern>;

struct EVar {
    std::string name;
};
struct EConst {
    Literal value;
};
struct EApply {
    std::string func;
    std::vector<ExprPatternPtr> args;
};
struct ETupleProject {
    ExprPatternPtr base;
    int index = 0;
};

struct ExprPattern {
    std::variant<EVar, EConst, EApply, ETupleProject> node;
};

struct PApply {
    std::string func;
    std::vector<ExprPatternPtr> args;
};
struct PTop {};
struct PBottom {};
struct PNot {
    PredPatternPtr arg;
};
struct PAnd {
    PredPatternPtr left, right;
};
struct POr {
    PredPatternPtr left, right;
};
struct PCompare {
    enum class Op { Eq, Neq } op;
    ExprPatternPtr left, right;
};
struct PNullTest {
    bool negated = false; // false: is null, true: is not null
    ExprPatternPtr arg;
};
struct PExists {
    PlanPatternPtr subplan;
};

struct PredPattern {
    std::variant<PApply, PTop, PBottom, PNot, PAnd, POr, PCompare, PNullTest, PExists> node;
};

struct AggPattern {
    std::string func;
    std::vector<ExprPatternPtr> args;
};

struct SymbolPat {
    std::string name;
};
struct EmptyPat {
    TypeRef rowType;
};
struct FilterPat {
    Binder binder;
    PredPatternPtr predicate;
    PlanPatternPtr input;
};
struct ProjectPat {
    Binder binder;
    ExprPatternPtr expr;
    PlanPatternPtr input;
};
struct JoinPat {
    Binder left_binder, right_binder;
    PredPatternPtr predicate;
    PlanPatternPtr left, right;
};
struct UnionPat {
    PlanPatternPtr left, right;
};
struct DistinctPat {
    PlanPatternPtr input;
};
struct AggregatePat {
    Binder binder;
    ExprPatternPtr key;
    AggPattern agg;
    PlanPatternPtr input;
};

/// A lambda-shaped argument of a custom operator pattern.
struct LambdaPat {
    std::vector<Binder> binders;
    std::variant<PredPatternPtr, ExprPatternPtr, AggPattern> body;
};

struct CustomPat {
    std::string op_name;
    std::vector<std::variant<PlanPatternPtr, LambdaPat>> args;
};

struct PlanPattern {
    std::variant<SymbolPat, EmptyPat, FilterPat, ProjectPat, JoinPat, UnionPat, DistinctPat,
                 AggregatePat, CustomPat>
        node;
};

inline ExprPatternPtr evar(std::string name) {
    return std::make_shared<ExprPattern>(ExprPattern{EVar{std::move(name)}});
}
inline ExprPatternPtr econst(Literal v) { return std::make_shared<ExprPattern>(ExprPattern{EConst{std::move(v)}}); }
inline ExprPatternPtr eapply(std::string func, std::vector<ExprPatternPtr> args) {
    return std::make_shared<ExprPattern>(ExprPattern{EApply{std::move(func), std::move(args)}});
}
inline ExprPatternPtr etuple_project(ExprPatternPtr base, int index) {
    return std::make_shared<ExprPattern>(ExprPattern{ETupleProject{std::move(base), index}});
}

inline PredPatternPtr papply(std::string func, std::vector<ExprPatternPtr> args) {
    return std::make_shared<PredPattern>(PredPattern{PApply{std::move(func), std::move(args)}});
}
inline PredPatternPtr ptop() { return std::make_shared<PredPattern>(PredPattern{PTop{}}); }
inline PredPatternPtr pbottom() { return std::make_shared<PredPattern>(PredPattern{PBottom{}}); }
inline PredPatternPtr pnot(PredPatternPtr p) { return std::make_shared<PredPattern>(PredPattern{PNot{std::move(p)}}); }
inline PredPatternPtr pand(PredPatternPtr a, PredPatternPtr b) {
    return std::make_shared<PredPattern>(PredPattern{PAnd{std::move(a), std::move(b)}});
}
inline PredPatternPtr por(PredPatternPtr a, PredPatternPtr b) {
    return std::make_shared<PredPattern>(PredPattern{POr{std::move(a), std::move(b)}});
}
inline PredPatternPtr peq(ExprPatternPtr a, ExprPatternPtr b) {
    return std::make_shared<PredPattern>(PredPattern{PCompare{PCompare::Op::Eq, std::move(a), std::move(b)}});
}
inline PredPatternPtr pneq(ExprPatternPtr a, ExprPatternPtr b) {
    return std::make_shared<PredPattern>(PredPattern{PCompare{PCompare::Op::Neq, std::move(a), std::move(b)}});
}
inline PredPatternPtr pis_null(ExprPatternPtr e, bool negated = false) {
    return std::make_shared<PredPattern>(PredPattern{PNullTest{negated, std::move(e)}});
}
inline PredPatternPtr pexists(PlanPatternPtr q) {
    return std::make_shared<PredPattern>(PredPattern{PExists{std::move(q)}});
}

inline PlanPatternPtr psymbol(std::string name) {
    return std::make_shared<PlanPattern>(PlanPattern{SymbolPat{std::move(name)}});
}
inline PlanPatternPtr pempty(TypeRef t) { return std::make_shared<PlanPattern>(PlanPattern{EmptyPat{std::move(t)}}); }
inline PlanPatternPtr pfilter(Binder b, PredPatternPtr p, PlanPatternPtr q) {
    return std::make_shared<PlanPattern>(PlanPattern{FilterPat{std::move(b), std::move(p), std::move(q)}});
}
inline PlanPatternPtr pproject(Binder b, ExprPatternPtr e, PlanPatternPtr q) {
    return std::make_shared<PlanPattern>(PlanPattern{ProjectPat{std::move(b), std::move(e), std::move(q)}});
}
inline PlanPatternPtr pjoin(Binder bl, Binder br, PredPatternPtr p, PlanPatternPtr l, PlanPatternPtr r) {
    return std::make_shared<PlanPattern>(
        PlanPattern{JoinPat{std::move(bl), std::move(br), std::move(p), std::move(l), std::move(r)}});
}
inline PlanPatternPtr punion(PlanPatternPtr l, PlanPatternPtr r) {
    return std::make_shared<PlanPattern>(PlanPattern{UnionPat{std::move(l), std::move(r)}});
}
inline PlanPatternPtr pdistinct(PlanPatternPtr q) {
    return std::make_shared<PlanPattern>(PlanPattern{DistinctPat{std::move(q)}});
}
inline PlanPatternPtr paggregate(Binder b, ExprPatternPtr key, AggPattern agg, PlanPatternPtr q) {
    return std::make_shared<PlanPattern>(
        PlanPattern{AggregatePat{std::move(b), std::move(key), std::move(agg), std::move(q)}});
}
inline PlanPatternPtr pcustom(std::string name, std::vector<std::variant<PlanPatternPtr, LambdaPat>> args) {
    return std::make_shared<PlanPattern>(PlanPattern{CustomPat{std::move(name), std::move(args)}});
}

// ---------------------------------------------------------------------------
// Rules

struct Constraint {
    enum class Kind { Injective };
    Kind kind = Kind::Injective;
    std::string subject; // a declared scalar function symbol
    bool operator==(const Constraint &) const = default;
};

struct Rule {
    std::string name;
    std::vector<TypeSymbol> typeDecls;
    std::vector<FuncSymbol> funcDecls;
    std::vector<PlanSymbol> planDecls;
    PlanPatternPtr from;
    PlanPatternPtr to;
    std::vector<Constraint> constraints;

    const FuncSymbol *find_func(const std::string &n) const {
        for (auto &f : funcDecls)
            if (f.name == n) return &f;
        return nullptr;
    }
    const PlanSymbol *find_plan(const std::string &n) const {
        for (auto &p : planDecls)
            if (p.name == n) return &p;
        return nullptr;
    }
    bool has_type(const std::string &n) const {
        return std::any_of(typeDecls.begin(), typeDecls.end(), [&](auto &t) { return t.name == n; });
    }
};

enum class Severity { Error, Warning };

struct Diagnostic {
    Severity severity = Severity::Error;
    int line = 0, column = 0; // 1-based; 0 when not tied to source text
    std::string path;         // location path into the pattern tree
    std::string message;
};

// ---------------------------------------------------------------------------
// Structural equality of patterns

inline bool pattern_equal(const PlanPatternPtr &a, const PlanPatternPtr &b);

inline bool expr_pattern_equal(const ExprPatternPtr &a, const ExprPatternPtr &b) {
    if (a == b) return true;
    if (!a || !b || a->node.index() != b->node.index()) return false;
    if (auto *v = std::get_if<EVar>(&a->node)) return v->name == std::get<EVar>(b->node).name;
    if (auto *c = std::get_if<EConst>(&a->node)) return c->value == std::get<EConst>(b->node).value;
    if (auto *f = std::get_if<EApply>(&a->node)) {
        auto &g = std::get<EApply>(b->node);
        if (f->func != g.func || f->args.size() != g.args.size()) return false;
        for (size_t i = 0; i < f->args.size(); ++i)
            if (!expr_pattern_equal(f->args[i], g.args[i])) return false;
        return true;
    }
    auto &t = std::get<ETupleProject>(a->node);
    auto &u = std::get<ETupleProject>(b->node);
    return t.index == u.index && expr_pattern_equal(t.base, u.base);
}

inline bool pred_pattern_equal(const PredPatternPtr &a, const PredPatternPtr &b) {
    if (a == b) return true;
    if (!a || !b || a->node.index() != b->node.index()) return false;
    if (auto *f = std::get_if<PApply>(&a->node)) {
        auto &g = std::get<PApply>(b->node);
        if (f->func != g.func || f->args.size() != g.args.size()) return false;
        for (size_t i = 0; i < f->args.size(); ++i)
            if (!expr_pattern_equal(f->args[i], g.args[i])) return false;
        return true;
    }
    if (std::holds_alternative<PTop>(a->node) || std::holds_alternative<PBottom>(a->node)) return true;
    if (auto *n = std::get_if<PNot>(&a->node)) return pred_pattern_equal(n->arg, std::get<PNot>(b->node).arg);
    if (auto *c = std::get_if<PAnd>(&a->node)) {
        auto &d = std::get<PAnd>(b->node);
        return pred_pattern_equal(c->left, d.left) && pred_pattern_equal(c->right, d.right);
    }
    if (auto *c = std::get_if<POr>(&a->node)) {
        auto &d = std::get<POr>(b->node);
        return pred_pattern_equal(c->left, d.left) && pred_pattern_equal(c->right, d.right);
    }
    if (auto *c = std::get_if<PCompare>(&a->node)) {
        auto &d = std::get<PCompare>(b->node);
        return c->op == d.op && expr_pattern_equal(c->left, d.left) && expr_pattern_equal(c->right, d.right);
    }
    if (auto *n = std::get_if<PNullTest>(&a->node)) {
        auto &m = std::get<PNullTest>(b->node);
        return n->negated == m.negated && expr_pattern_equal(n->arg, m.arg);
    }
    return pattern_equal(std::get<PExists>(a->node).subplan, std::get<PExists>(b->node).subplan);
}

inline bool agg_pattern_equal(const AggPattern &a, const AggPattern &b) {
    if (a.func != b.func || a.args.size() != b.args.size()) return false;
    for (size_t i = 0; i < a.args.size(); ++i)
        if (!expr_pattern_equal(a.args[i], b.args[i])) return false;
    return true;
}

inline bool lambda_pattern_equal(const LambdaPat &a, const LambdaPat &b) {
    if (a.binders != b.binders || a.body.index() != b.body.index()) return false;
    if (auto *p = std::get_if<PredPatternPtr>(&a.body))
        return pred_pattern_equal(*p, std::get<PredPatternPtr>(b.body));
    if (auto *e = std::get_if<ExprPatternPtr>(&a.body))
        return expr_pattern_equal(*e, std::get<ExprPatternPtr>(b.body));
    return agg_pattern_equal(std::get<AggPattern>(a.body), std::get<AggPattern>(b.body));
}

inline bool pattern_equal(const PlanPatternPtr &a, const PlanPatternPtr &b) {
    if (a == b) return true;
    if (!a || !b || a->node.index() != b->node.index()) return false;
    if (auto *s = std::get_if<SymbolPat>(&a->node)) return s->name == std::get<SymbolPat>(b->node).name;
    if (auto *e = std::get_if<EmptyPat>(&a->node)) return e->rowType == std::get<EmptyPat>(b->node).rowType;
    if (auto *f = std::get_if<FilterPat>(&a->node)) {
        auto &g = std::get<FilterPat>(b->node);
        return f->binder == g.binder && pred_pattern_equal(f->predicate, g.predicate) &&
               pattern_equal(f->input, g.input);
    }
    if (auto *p = std::get_if<ProjectPat>(&a->node)) {
        auto &q = std::get<ProjectPat>(b->node);
        return p->binder == q.binder && expr_pattern_equal(p->expr, q.expr) && pattern_equal(p->input, q.input);
    }
    if (auto *j = std::get_if<JoinPat>(&a->node)) {
        auto &k = std::get<JoinPat>(b->node);
        return j->left_binder == k.left_binder && j->right_binder == k.right_binder &&
               pred_pattern_equal(j->predicate, k.predicate) && pattern_equal(j->left, k.left) &&
               pattern_equal(j->right, k.right);
    }
    if (auto *u = std::get_if<UnionPat>(&a->node)) {
        auto &v = std::get<UnionPat>(b->node);
        return pattern_equal(u->left, v.left) && pattern_equal(u->right, v.right);
    }
    if (auto *d = std::get_if<DistinctPat>(&a->node))
        return pattern_equal(d->input, std::get<DistinctPat>(b->node).input);
    if (auto *g = std::get_if<AggregatePat>(&a->node)) {
        auto &h = std::get<AggregatePat>(b->node);
        return g->binder == h.binder && expr_pattern_equal(g->key, h.key) && agg_pattern_equal(g->agg, h.agg) &&
               pattern_equal(g->input, h.input);
    }
    auto &c = std::get<CustomPat>(a->node);
    auto &d = std::get<CustomPat>(b->node);
    if (c.op_name != d.op_name || c.args.size() != d.args.size()) return false;
    for (size_t i = 0; i < c.args.size(); ++i) {
        if (c.args[i].index() != d.args[i].index()) return false;
        if (auto *p = std::get_if<PlanPatternPtr>(&c.args[i])) {
            if (!pattern_equal(*p, std::get<PlanPatternPtr>(d.args[i]))) return false;
        } else if (!lambda_pattern_equal(std::get<LambdaPat>(c.args[i]), std::get<LambdaPat>(d.args[i]))) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// free_symbols

struct FreeSymbols {
    std::set<std::string> plans;
    std::set<std::string> funcs;
    std::set<std::string> types;
};

namespace detail {
void collect_type_names(const TypeRef &t, std::set<std::string> &out);

inline void collect_type_names(const TypeRef &t, std::set<std::string> &out) {
    if (t.kind == TypeRef::Kind::Named) {
        out.insert(t.name);
    } else if (t.kind == TypeRef::Kind::Product) {
        for (auto &c : t.components) collect_type_names(c, out);
    }
}

struct FreeSymbolCollector {
    const Rule &rule;
    FreeSymbols out;

    void func_ref(const std::string &name) {
        out.funcs.insert(name);
        if (auto *f = rule.find_func(name)) {
            for (auto &p : f->params) collect_type_names(p, out.types);
            collect_type_names(f->result, out.types);
        }
    }

    void visit(const ExprPatternPtr &e) {
        if (auto *a = std::get_if<EApply>(&e->node)) {
            func_ref(a->func);
            for (auto &arg : a->args) visit(arg);
        } else if (auto *t = std::get_if<ETupleProject>(&e->node)) {
            visit(t->base);
        }
    }

    void visit(const PredPatternPtr &p) {
        if (auto *a = std::get_if<PApply>(&p->node)) {
            func_ref(a->func);
            for (auto &arg : a->args) visit(arg);
        } else if (auto *n = std::get_if<PNot>(&p->node)) {
            visit(n->arg);
        } else if (auto *c = std::get_if<PAnd>(&p->node)) {
            visit(c->left);
            visit(c->right);
        } else if (auto *c = std::get_if<POr>(&p->node)) {
            visit(c->left);
            visit(c->right);
        } else if (auto *c = std::get_if<PCompare>(&p->node)) {
            visit(c->left);
            visit(c->right);
        } else if (auto *n = std::get_if<PNullTest>(&p->node)) {
            visit(n->arg);
        } else if (auto *x = std::get_if<PExists>(&p->node)) {
            visit(x->subplan);
        }
    }

    void visit(const AggPattern &a) {
        func_ref(a.func);
        for (auto &arg : a.args) visit(arg);
    }

    void visit(const PlanPatternPtr &q) {
        if (auto *s = std::get_if<SymbolPat>(&q->node)) {
            out.plans.insert(s->name);
            if (auto *d = rule.find_plan(s->name)) collect_type_names(d->rowType, out.types);
        } else if (auto *e = std::get_if<EmptyPat>(&q->node)) {
            collect_type_names(e->rowType, out.types);
        } else if (auto *f = std::get_if<FilterPat>(&q->node)) {
            visit(f->predicate);
            visit(f->input);
        } else if (auto *p = std::get_if<ProjectPat>(&q->node)) {
            visit(p->expr);
            visit(p->input);
        } else if (auto *j = std::get_if<JoinPat>(&q->node)) {
            visit(j->predicate);
            visit(j->left);
            visit(j->right);
        } else if (auto *u = std::get_if<UnionPat>(&q->node)) {
            visit(u->left);
            visit(u->right);
        } else if (auto *d = std::get_if<DistinctPat>(&q->node)) {
            visit(d->input);
        } else if (auto *g = std::get_if<AggregatePat>(&q->node)) {
            visit(g->key);
            visit(g->agg);
            visit(g->input);
        } else if (auto *c = std::get_if<CustomPat>(&q->node)) {
            for (auto &arg : c->args) {
                if (auto *pp = std::get_if<PlanPatternPtr>(&arg)) {
                    visit(*pp);
                } else {
                    auto &l = std::get<LambdaPat>(arg);
                    if (auto *b = std::get_if<PredPatternPtr>(&l.body)) visit(*b);
                    else if (auto *b2 = std::get_if<ExprPatternPtr>(&l.body)) visit(*b2);
                    else visit(std::get<AggPattern>(l.body));
                }
            }
        }
    }
};
} // namespace detail

/// Exact sets of plan, function, and type symbols occurring in the pattern,
/// including occurrences inside Exists subqueries. Type symbols are reached
/// through the signatures of referenced plan and function symbols.
inline FreeSymbols free_symbols(const PlanPatternPtr &pattern, const Rule &rule) {
    detail::FreeSymbolCollector c{rule, {}};
    c.visit(pattern);
    return c.out;
}

} // namespace rulekit
