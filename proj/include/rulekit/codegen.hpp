#pragma once

#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rulekit/typecheck.hpp"

namespace rulekit {

struct UnmappedOperator : std::runtime_error {
    explicit UnmappedOperator(const std::string &name) : std::runtime_error("no target mapping for operator '" + name + "'") {}
};
struct UnsupportedPatternForTarget : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operator-name mapping, e.g. Aggregate -> GroupBy. Shipped as a small
/// `Name = Target` file, one entry per line, `#` comments.
using OpMap = std::map<std::string, std::string>;

inline OpMap parse_opmap(const std::string &text) {
    OpMap map;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        std::string key, val;
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        if (eq == std::string::npos) {
            if (!trim(line).empty())
                throw UnsupportedPatternForTarget("opmap line " + std::to_string(lineno) + ": expected Name = Target");
            continue;
        }
        key = trim(line.substr(0, eq));
        val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw UnsupportedPatternForTarget("opmap line " + std::to_string(lineno) + ": expected Name = Target");
        map[key] = val;
    }
    return map;
}

struct Provenance {
    std::string version = "0.1.0";
    std::string verdict = "unverified";
    std::uint64_t seed = 0;
    int trials = 0;
};

// ---------------------------------------------------------------------------
// S-expressions

struct SExpr {
    std::variant<std::string, std::vector<SExpr>> node;
    static SExpr atom(std::string s) { return SExpr{std::move(s)}; }
    static SExpr list(std::vector<SExpr> xs) { return SExpr{std::move(xs)}; }
    bool is_atom() const { return std::holds_alternative<std::string>(node); }
    const std::string &text() const { return std::get<std::string>(node); }
    const std::vector<SExpr> &items() const { return std::get<std::vector<SExpr>>(node); }
};

/// Minimal reader used by tests to confirm emitted rules stay well-formed.
/// `#` comments run to end of line; atoms are maximal runs of non-space,
/// non-paren characters.
inline std::vector<SExpr> parse_sexprs(const std::string &text) {
    std::vector<std::vector<SExpr>> stack;
    std::vector<SExpr> top;
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '(') {
            stack.emplace_back();
            ++i;
        } else if (c == ')') {
            if (stack.empty()) throw UnsupportedPatternForTarget("unbalanced ')'");
            SExpr done = SExpr::list(std::move(stack.back()));
            stack.pop_back();
            (stack.empty() ? top : stack.back()).push_back(std::move(done));
            ++i;
        } else {
            size_t j = i;
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != '(' &&
                   text[j] != ')' && text[j] != '#')
                ++j;
            (stack.empty() ? top : stack.back()).push_back(SExpr::atom(text.substr(i, j - i)));
            i = j;
        }
    }
    if (!stack.empty()) throw UnsupportedPatternForTarget("unbalanced '('");
    return top;
}

namespace detail {

inline std::string render_sexpr(const SExpr &s, int indent) {
    if (s.is_atom()) return s.text();
    // glue "$name:" atoms onto the sub-expression they annotate
    auto piece = [&](size_t &i, int ind) {
        std::string r = render_sexpr(s.items()[i], ind);
        while (i + 1 < s.items().size() && s.items()[i].is_atom() && !s.items()[i].text().empty() &&
               s.items()[i].text().back() == ':') {
            ++i;
            r += render_sexpr(s.items()[i], ind + static_cast<int>(r.size()));
        }
        return r;
    };
    std::string flat = "(";
    for (size_t i = 0; i < s.items().size(); ++i) {
        if (i) flat += " ";
        flat += piece(i, 0);
    }
    flat += ")";
    if (static_cast<int>(flat.size()) + indent <= 72) return flat;
    std::string pad(static_cast<size_t>(indent) + 4, ' ');
    size_t i0 = 0;
    std::string out = "(" + piece(i0, indent + 1);
    for (size_t i = i0 + 1; i < s.items().size(); ++i) {
        // keep "& guard" attached to the capture it constrains
        if (s.items()[i].is_atom() && s.items()[i].text() == "&" && i + 1 < s.items().size()) {
            ++i;
            out += " &\n" + pad + "    " + piece(i, indent + 8);
            continue;
        }
        out += "\n" + pad + piece(i, indent + 4);
    }
    return out + ")";
}

inline std::string lower_first_word(const std::string &camel) {
    // SemiJoin -> semi, GroupBy -> group, InnerJoin -> inner
    std::string out;
    for (size_t i = 0; i < camel.size(); ++i) {
        char c = camel[i];
        if (i > 0 && std::isupper(static_cast<unsigned char>(c))) break;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out.empty() ? "op" : out;
}

/// Role-based capture naming and the CockroachDB-flavored node shapes.
struct OptgenEmitter {
    const TypedRule &rule;
    const OpMap &map;
    const CustomOpRegistry &registry;

    std::map<std::string, std::string> planCap;   // plan symbol -> capture name
    std::map<std::string, std::string> funcCap;   // func symbol -> capture name
    std::set<std::string> helpers;
    int guardCount = 0;
    int planN = 0, onN = 0, colsN = 0, aggsN = 0, projN = 0;

    std::string mapped(const std::string &op) const {
        auto it = map.find(op);
        if (it == map.end()) throw UnmappedOperator(op);
        return it->second;
    }

    std::string plan_role() {
        ++planN;
        if (planN == 1) return "input";
        if (planN == 2) return "right";
        return "p" + std::to_string(planN);
    }
    std::string on_role() { return ++onN == 1 ? "on" : "on" + std::to_string(onN); }
    std::string cols_role() { return ++colsN == 1 ? "groupingCols" : "cols" + std::to_string(colsN); }
    std::string aggs_role() { return ++aggsN == 1 ? "aggs" : "aggs" + std::to_string(aggsN); }
    std::string proj_role() { return ++projN == 1 ? "projections" : "projections" + std::to_string(projN); }

    static SExpr cap(const std::string &name) { return SExpr::atom("$" + name + ":*"); }
    static SExpr ref(const std::string &name) { return SExpr::atom("$" + name); }

    const PApply *pred_apply(const LambdaPat &lam) const {
        auto *pp = std::get_if<PredPatternPtr>(&lam.body);
        if (!pp) return nullptr;
        return std::get_if<PApply>(&(*pp)->node);
    }

    /// OnlyRefsCols guards: the predicate's declared parameter types include
    /// the result type of an already-captured grouping function — the
    /// target-language shadow of the type constraint P : (K, Y) -> Bool.
    std::vector<SExpr> guards_for_predicate(const std::string &pred, const std::string &onName) {
        std::vector<SExpr> out;
        auto *decl = rule.rule.find_func(pred);
        if (!decl) return out;
        for (auto &param : decl->params) {
            if (param.kind != TypeRef::Kind::Named) continue;
            for (auto &f : rule.rule.funcDecls) {
                if (f.kind != FuncKind::Scalar || !funcCap.count(f.name)) continue;
                if (f.result.kind == TypeRef::Kind::Named && f.result.name == param.name) {
                    out.push_back(SExpr::list({SExpr::atom("OnlyRefsCols"), ref(onName), ref(funcCap.at(f.name))}));
                    helpers.insert("OnlyRefsCols");
                    ++guardCount;
                }
            }
        }
        return out;
    }

    void push_on_capture(std::vector<SExpr> &items, const std::string &pred) {
        std::string name = on_role();
        funcCap[pred] = name;
        items.push_back(cap(name));
        for (auto &g : guards_for_predicate(pred, name)) {
            items.push_back(SExpr::atom("&"));
            items.push_back(g);
        }
    }

    SExpr emit_match(const PlanPatternPtr &q) {
        if (auto *s = std::get_if<SymbolPat>(&q->node)) {
            if (planCap.count(s->name))
                throw UnsupportedPatternForTarget("plan symbol '" + s->name + "' captured twice");
            std::string role = plan_role();
            planCap[s->name] = role;
            return cap(role);
        }
        if (std::holds_alternative<EmptyPat>(q->node))
            return SExpr::list({SExpr::atom(mapped("Empty"))});
        if (auto *f = std::get_if<FilterPat>(&q->node)) {
            std::vector<SExpr> items{SExpr::atom(mapped("Filter")), emit_match(f->input)};
            auto *a = std::get_if<PApply>(&f->predicate->node);
            if (!a) throw UnsupportedPatternForTarget("only a bare predicate symbol is supported in Filter");
            push_on_capture(items, a->func);
            return SExpr::list(std::move(items));
        }
        if (auto *p = std::get_if<ProjectPat>(&q->node)) {
            std::vector<SExpr> items{SExpr::atom(mapped("Project")), emit_match(p->input)};
            if (auto *a = std::get_if<EApply>(&p->expr->node)) {
                std::string role = proj_role();
                funcCap[a->func] = role;
                items.push_back(cap(role));
            } else {
                items.push_back(cap(proj_role()));
            }
            return SExpr::list(std::move(items));
        }
        if (auto *j = std::get_if<JoinPat>(&q->node)) {
            std::vector<SExpr> items{SExpr::atom(mapped("Join")), emit_match(j->left), emit_match(j->right)};
            auto *a = std::get_if<PApply>(&j->predicate->node);
            if (!a) throw UnsupportedPatternForTarget("only a bare predicate symbol is supported in Join");
            push_on_capture(items, a->func);
            items.push_back(cap(lower_first_word(mapped("Join")) + "Private"));
            return SExpr::list(std::move(items));
        }
        if (auto *u = std::get_if<UnionPat>(&q->node))
            return SExpr::list({SExpr::atom(mapped("Union")), emit_match(u->left), emit_match(u->right)});
        if (auto *d = std::get_if<DistinctPat>(&q->node))
            return SExpr::list({SExpr::atom(mapped("Distinct")), emit_match(d->input)});
        if (auto *g = std::get_if<AggregatePat>(&q->node)) {
            std::vector<SExpr> items{SExpr::atom(mapped("Aggregate")), emit_match(g->input)};
            std::string aggsName = aggs_role();
            funcCap[g->agg.func] = aggsName;
            items.push_back(cap(aggsName));
            std::string colsName = cols_role();
            if (auto *key = std::get_if<EApply>(&g->key->node)) funcCap[key->func] = colsName;
            items.push_back(SExpr::atom("$private:"));
            items.push_back(SExpr::list(
                {SExpr::atom("GroupingPrivate"), cap(colsName), cap("ordering")}));
            return SExpr::list(std::move(items));
        }
        auto &c = std::get<CustomPat>(q->node);
        std::vector<SExpr> items{SExpr::atom(mapped(c.op_name))};
        for (auto &arg : c.args)
            if (auto *pp = std::get_if<PlanPatternPtr>(&arg)) items.push_back(emit_match(*pp));
        for (auto &arg : c.args) {
            auto *lam = std::get_if<LambdaPat>(&arg);
            if (!lam) continue;
            if (auto *a = pred_apply(*lam)) {
                push_on_capture(items, a->func);
            } else if (auto *e = std::get_if<ExprPatternPtr>(&lam->body)) {
                if (auto *ea = std::get_if<EApply>(&(*e)->node)) {
                    std::string role = cols_role();
                    funcCap[ea->func] = role;
                    items.push_back(cap(role));
                } else {
                    throw UnsupportedPatternForTarget("unsupported scalar lambda in custom operator match");
                }
            } else if (auto *ag = std::get_if<AggPattern>(&lam->body)) {
                std::string role = aggs_role();
                funcCap[ag->func] = role;
                items.push_back(cap(role));
            } else {
                throw UnsupportedPatternForTarget("unsupported lambda in custom operator match");
            }
        }
        items.push_back(cap(lower_first_word(mapped(c.op_name)) + "Private"));
        return SExpr::list(std::move(items));
    }

    std::string first_plan_capture(const CustomPat &c) const {
        for (auto &arg : c.args)
            if (auto *pp = std::get_if<PlanPatternPtr>(&arg))
                if (auto *s = std::get_if<SymbolPat>(&(*pp)->node))
                    if (planCap.count(s->name)) return planCap.at(s->name);
        return "input";
    }

    SExpr emit_pred_replace(const std::string &pred, const std::vector<ExprPatternPtr> &args,
                            const std::string &inputCapture) {
        auto it = funcCap.find(pred);
        if (it == funcCap.end())
            throw UnsupportedPatternForTarget("predicate '" + pred + "' was not captured in the match pattern");
        bool composed = false;
        std::string composedWith;
        for (auto &a : args)
            if (auto *ea = std::get_if<EApply>(&a->node)) {
                composed = true;
                composedWith = ea->func;
            }
        if (!composed) return ref(it->second);
        auto fit = funcCap.find(composedWith);
        if (fit == funcCap.end())
            throw UnsupportedPatternForTarget("composition function '" + composedWith + "' was not captured");
        helpers.insert("RemapPredicate");
        return SExpr::list({SExpr::atom("RemapPredicate"), ref(it->second), ref(fit->second), ref(inputCapture)});
    }

    SExpr emit_replace(const PlanPatternPtr &q) {
        if (auto *s = std::get_if<SymbolPat>(&q->node)) {
            auto it = planCap.find(s->name);
            if (it == planCap.end())
                throw UnsupportedPatternForTarget("plan symbol '" + s->name + "' was not captured");
            return ref(it->second);
        }
        if (std::holds_alternative<EmptyPat>(q->node)) return SExpr::list({SExpr::atom(mapped("Empty"))});
        if (auto *f = std::get_if<FilterPat>(&q->node)) {
            auto *a = std::get_if<PApply>(&f->predicate->node);
            if (!a) throw UnsupportedPatternForTarget("only a bare predicate symbol is supported in Filter");
            SExpr input = emit_replace(f->input);
            return SExpr::list({SExpr::atom(mapped("Filter")), input, emit_pred_replace(a->func, a->args, "input")});
        }
        if (auto *p = std::get_if<ProjectPat>(&q->node)) {
            auto *a = std::get_if<EApply>(&p->expr->node);
            if (!a || !funcCap.count(a->func))
                throw UnsupportedPatternForTarget("projection function was not captured in the match pattern");
            return SExpr::list({SExpr::atom(mapped("Project")), emit_replace(p->input), ref(funcCap.at(a->func))});
        }
        if (auto *j = std::get_if<JoinPat>(&q->node)) {
            auto *a = std::get_if<PApply>(&j->predicate->node);
            if (!a) throw UnsupportedPatternForTarget("only a bare predicate symbol is supported in Join");
            return SExpr::list({SExpr::atom(mapped("Join")), emit_replace(j->left), emit_replace(j->right),
                                emit_pred_replace(a->func, a->args, "input"),
                                ref(lower_first_word(mapped("Join")) + "Private")});
        }
        if (auto *u = std::get_if<UnionPat>(&q->node))
            return SExpr::list({SExpr::atom(mapped("Union")), emit_replace(u->left), emit_replace(u->right)});
        if (auto *d = std::get_if<DistinctPat>(&q->node))
            return SExpr::list({SExpr::atom(mapped("Distinct")), emit_replace(d->input)});
        if (auto *g = std::get_if<AggregatePat>(&q->node)) {
            auto it = funcCap.find(g->agg.func);
            if (it == funcCap.end())
                throw UnsupportedPatternForTarget("aggregate '" + g->agg.func + "' was not captured");
            return SExpr::list(
                {SExpr::atom(mapped("Aggregate")), emit_replace(g->input), ref(it->second), ref("private")});
        }
        auto &c = std::get<CustomPat>(q->node);
        std::vector<SExpr> items{SExpr::atom(mapped(c.op_name))};
        std::string inputCapture = first_plan_capture(c);
        for (auto &arg : c.args)
            if (auto *pp = std::get_if<PlanPatternPtr>(&arg)) items.push_back(emit_replace(*pp));
        for (auto &arg : c.args) {
            auto *lam = std::get_if<LambdaPat>(&arg);
            if (!lam) continue;
            if (auto *a = pred_apply(*lam)) {
                items.push_back(emit_pred_replace(a->func, a->args, inputCapture));
            } else if (auto *e = std::get_if<ExprPatternPtr>(&lam->body)) {
                auto *ea = std::get_if<EApply>(&(*e)->node);
                if (!ea || !funcCap.count(ea->func))
                    throw UnsupportedPatternForTarget("scalar lambda was not captured in the match pattern");
                items.push_back(ref(funcCap.at(ea->func)));
            } else if (auto *ag = std::get_if<AggPattern>(&lam->body)) {
                if (!funcCap.count(ag->func))
                    throw UnsupportedPatternForTarget("aggregate lambda was not captured in the match pattern");
                items.push_back(ref(funcCap.at(ag->func)));
            }
        }
        items.push_back(ref(lower_first_word(mapped(c.op_name)) + "Private"));
        return SExpr::list(std::move(items));
    }
};

} // namespace detail

/// Emits one Optgen-style rule: provenance header, `[Name, Normalize]`,
/// match S-expression, `=>`, replace S-expression. Deterministic text.
inline std::string emit_optgen(const TypedRule &rule, const CustomOpRegistry &registry, const OpMap &opmap,
                               const Provenance &prov = {}) {
    detail::OptgenEmitter em{rule, opmap, registry, {}, {}, {}, 0, 0, 0, 0, 0, 0};
    SExpr match = em.emit_match(rule.rule.from);
    SExpr replace = em.emit_replace(rule.rule.to);
    std::ostringstream os;
    os << "# rule: " << rule.rule.name << "\n";
    os << "# rulekit " << prov.version << "\n";
    os << "# verification: " << prov.verdict << " (seed=" << prov.seed << ", trials=" << prov.trials << ")\n";
    os << "[" << rule.rule.name << ", Normalize]\n";
    os << detail::render_sexpr(match, 0) << "\n";
    os << "=>\n";
    os << detail::render_sexpr(replace, 0) << "\n";
    return os.str();
}

/// Number of guard invocations emitted for a rule, for the audit that each
/// guard corresponds to a constraint in the typed rule.
inline int count_optgen_guards(const TypedRule &rule, const CustomOpRegistry &registry, const OpMap &opmap) {
    detail::OptgenEmitter em{rule, opmap, registry, {}, {}, {}, 0, 0, 0, 0, 0, 0};
    (void)em.emit_match(rule.rule.from);
    return em.guardCount;
}

} // namespace rulekit
