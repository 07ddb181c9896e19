#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rulekit/extension.hpp"
#include "rulekit/typecheck.hpp"
#include "rulekit/validate.hpp"

namespace rulekit {

struct RuleFile {
    std::vector<CustomOpDef> customDefs;
    std::vector<Rule> rules;
};

namespace dsl {

// ---------------------------------------------------------------------------
// Lexer

struct Token {
    enum class Kind { Ident, Int, String, Punct, End } kind = Kind::End;
    std::string text;
    std::int64_t intval = 0;
    int line = 1, column = 1;
};

struct ParseAbort {
    Diagnostic diag;
};

inline std::vector<Token> lex(const std::string &src, std::vector<Diagnostic> &diags) {
    std::vector<Token> out;
    int line = 1, col = 1;
    size_t i = 0;
    auto advance = [&](size_t n) {
        for (size_t k = 0; k < n && i < src.size(); ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < src.size()) {
        char c = src[i];
        if (c == '-' && i + 1 < src.size() && src[i + 1] == '-') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        Token t;
        t.line = line;
        t.column = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            t.kind = Token::Kind::Ident;
            t.text = src.substr(i, j - i);
            advance(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            t.kind = Token::Kind::Int;
            t.text = src.substr(i, j - i);
            try {
                t.intval = std::stoll(t.text);
            } catch (const std::out_of_range &) {
                diags.push_back({Severity::Error, line, col, "", "integer literal out of range"});
            }
            advance(j - i);
        } else if (c == '"') {
            std::string s;
            size_t j = i + 1;
            bool closed = false;
            while (j < src.size()) {
                if (src[j] == '"') {
                    closed = true;
                    ++j;
                    break;
                }
                if (src[j] == '\\' && j + 1 < src.size()) {
                    char e = src[j + 1];
                    s += e == 'n' ? '\n' : e == 't' ? '\t' : e;
                    j += 2;
                } else {
                    s += src[j++];
                }
            }
            if (!closed) diags.push_back({Severity::Error, line, col, "", "unterminated string literal"});
            t.kind = Token::Kind::String;
            t.text = std::move(s);
            advance(j - i);
        } else if (c == '-' && i + 1 < src.size() && src[i + 1] == '>') {
            t.kind = Token::Kind::Punct;
            t.text = "->";
            advance(2);
        } else if ((c == '=' || c == '!') && i + 1 < src.size() && src[i + 1] == '=') {
            t.kind = Token::Kind::Punct;
            t.text = std::string(1, c) + "=";
            advance(2);
        } else if (std::string("(){}<>,;:.=-").find(c) != std::string::npos) {
            t.kind = Token::Kind::Punct;
            t.text = std::string(1, c);
            advance(1);
        } else {
            diags.push_back({Severity::Error, line, col, "", std::string("unexpected character '") + c + "'"});
            advance(1);
            continue;
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Token::Kind::End;
    end.line = line;
    end.column = col;
    out.push_back(end);
    return out;
}

// ---------------------------------------------------------------------------
// Parser

inline const std::set<std::string> &reserved_words() {
    static const std::set<std::string> words{
        "Filter", "Project", "Join", "Union", "Distinct", "Aggregate", "Empty", "Exists",
        "Bag", "Bool", "rule", "def", "types", "funcs", "aggs", "plans", "from",
        "to", "where", "injective", "and", "or", "not", "true", "false", "null", "is"};
    return words;
}

struct Parser {
    std::vector<Token> toks;
    size_t pos = 0;
    // known function kinds of the current scope (rule or def) and known
    // custom-operator signatures of the file so far, used to classify
    // lambda bodies
    std::map<std::string, FuncKind> funcKinds;
    std::map<std::string, std::vector<ParamKind>> opSigs;

    const Token &peek(size_t k = 0) const { return toks[std::min(pos + k, toks.size() - 1)]; }
    const Token &next() {
        const Token &t = toks[pos];
        if (pos + 1 < toks.size()) ++pos;
        return t;
    }

    [[noreturn]] void fail(const Token &at, std::string msg) {
        throw ParseAbort{Diagnostic{Severity::Error, at.line, at.column, "", std::move(msg)}};
    }

    bool at_punct(const std::string &p) const {
        return peek().kind == Token::Kind::Punct && peek().text == p;
    }
    bool at_word(const std::string &w) const {
        return peek().kind == Token::Kind::Ident && peek().text == w;
    }
    bool accept_punct(const std::string &p) {
        if (!at_punct(p)) return false;
        next();
        return true;
    }
    bool accept_word(const std::string &w) {
        if (!at_word(w)) return false;
        next();
        return true;
    }
    void expect_punct(const std::string &p) {
        if (!accept_punct(p)) fail(peek(), "expected '" + p + "'");
    }
    void expect_word(const std::string &w) {
        if (!accept_word(w)) fail(peek(), "expected '" + w + "'");
    }
    std::string expect_ident(const char *what) {
        if (peek().kind != Token::Kind::Ident) fail(peek(), std::string("expected ") + what);
        if (reserved_words().count(peek().text))
            fail(peek(), "'" + peek().text + "' is a reserved word");
        return next().text;
    }

    // ---- types ----

    TypeRef parse_type() {
        if (accept_word("Bool")) return TypeRef::boolean();
        if (accept_punct("(")) {
            std::vector<TypeRef> comps;
            comps.push_back(parse_type());
            while (accept_punct(",")) comps.push_back(parse_type());
            expect_punct(")");
            if (comps.size() == 1) return comps[0];
            return TypeRef::product(std::move(comps));
        }
        return TypeRef::named(expect_ident("type name"));
    }

    // parameter list of a function signature: either a single bare type or a
    // parenthesized comma list (one product parameter needs double parens)
    std::vector<TypeRef> parse_arg_types() {
        if (at_punct("(")) {
            next();
            std::vector<TypeRef> args;
            args.push_back(parse_type());
            while (accept_punct(",")) args.push_back(parse_type());
            expect_punct(")");
            return args;
        }
        return {parse_type()};
    }

    TypeRef parse_bag_type() {
        expect_word("Bag");
        expect_punct("<");
        TypeRef t = parse_type();
        expect_punct(">");
        return t;
    }

    // ---- binders / lambdas ----

    Binder parse_binder() {
        if (accept_punct("(")) {
            Binder b;
            b.names.push_back(expect_ident("binder name"));
            while (accept_punct(",")) b.names.push_back(expect_ident("binder name"));
            expect_punct(")");
            return b;
        }
        return Binder{{expect_ident("binder name")}};
    }

    // ---- expressions ----

    ExprPatternPtr parse_expr() {
        ExprPatternPtr e = parse_expr_atom();
        while (at_punct(".")) {
            next();
            if (peek().kind != Token::Kind::Int) fail(peek(), "expected tuple component index");
            e = etuple_project(std::move(e), static_cast<int>(next().intval));
        }
        return e;
    }

    ExprPatternPtr parse_expr_atom() {
        if (peek().kind == Token::Kind::Int) return econst(Literal{ValueType::Int, Value{next().intval}});
        if (peek().kind == Token::Kind::String) return econst(Literal{ValueType::Str, Value{next().text}});
        if (accept_punct("-")) {
            if (peek().kind != Token::Kind::Int) fail(peek(), "expected integer after '-'");
            return econst(Literal{ValueType::Int, Value{-next().intval}});
        }
        if (accept_word("true")) return econst(Literal{ValueType::Bool, Value{true}});
        if (accept_word("false")) return econst(Literal{ValueType::Bool, Value{false}});
        if (accept_word("null")) return econst(Literal{ValueType::Int, kNull});
        std::string name = expect_ident("expression");
        if (accept_punct("(")) {
            std::vector<ExprPatternPtr> args;
            if (!at_punct(")")) {
                args.push_back(parse_expr());
                while (accept_punct(",")) args.push_back(parse_expr());
            }
            expect_punct(")");
            return eapply(std::move(name), std::move(args));
        }
        return evar(std::move(name));
    }

    // ---- predicates ----

    using PredOrExpr = std::variant<PredPatternPtr, ExprPatternPtr>;

    PredPatternPtr force_pred(PredOrExpr poe, const Token &at) {
        if (auto *p = std::get_if<PredPatternPtr>(&poe)) return *p;
        auto &e = std::get<ExprPatternPtr>(poe);
        if (auto *a = std::get_if<EApply>(&e->node)) return papply(a->func, a->args);
        fail(at, "expected a predicate");
    }

    PredOrExpr parse_por() {
        const Token &at = peek();
        PredOrExpr left = parse_pand();
        while (at_word("or")) {
            next();
            PredOrExpr right = parse_pand();
            left = por(force_pred(std::move(left), at), force_pred(std::move(right), at));
        }
        return left;
    }

    PredOrExpr parse_pand() {
        const Token &at = peek();
        PredOrExpr left = parse_pnot();
        while (at_word("and")) {
            next();
            PredOrExpr right = parse_pnot();
            left = pand(force_pred(std::move(left), at), force_pred(std::move(right), at));
        }
        return left;
    }

    PredOrExpr parse_pnot() {
        if (at_word("not")) {
            const Token &at = next();
            return pnot(force_pred(parse_pnot(), at));
        }
        return parse_patom();
    }

    PredOrExpr parse_patom() {
        if (accept_word("true")) return PredOrExpr{ptop()};
        if (accept_word("false")) return PredOrExpr{pbottom()};
        if (at_word("Exists")) {
            next();
            expect_punct("(");
            auto q = parse_plan();
            expect_punct(")");
            return PredOrExpr{pexists(std::move(q))};
        }
        if (at_punct("(")) {
            next();
            PredOrExpr inner = parse_por();
            expect_punct(")");
            return inner;
        }
        ExprPatternPtr e = parse_expr();
        if (accept_punct("==")) return PredOrExpr{peq(std::move(e), parse_expr())};
        if (accept_punct("!=")) return PredOrExpr{pneq(std::move(e), parse_expr())};
        if (at_word("is")) {
            next();
            bool negated = accept_word("not");
            expect_word("null");
            return PredOrExpr{pis_null(std::move(e), negated)};
        }
        return PredOrExpr{std::move(e)};
    }

    PredPatternPtr parse_pred() {
        const Token &at = peek();
        return force_pred(parse_por(), at);
    }

    // ---- plan patterns ----

    AggPattern expr_to_agg(const ExprPatternPtr &e, const Token &at) {
        if (auto *a = std::get_if<EApply>(&e->node)) return AggPattern{a->func, a->args};
        fail(at, "expected an aggregate application");
    }

    /// Renames free variable occurrences, used to fold the second Aggregate
    /// lambda onto the binder of the first.
    ExprPatternPtr rename_vars(const ExprPatternPtr &e, const std::map<std::string, std::string> &m) {
        if (auto *v = std::get_if<EVar>(&e->node)) {
            auto it = m.find(v->name);
            return it == m.end() ? e : evar(it->second);
        }
        if (auto *a = std::get_if<EApply>(&e->node)) {
            std::vector<ExprPatternPtr> args;
            for (auto &x : a->args) args.push_back(rename_vars(x, m));
            return eapply(a->func, std::move(args));
        }
        if (auto *t = std::get_if<ETupleProject>(&e->node))
            return etuple_project(rename_vars(t->base, m), t->index);
        return e;
    }

    PlanPatternPtr parse_plan() {
        const Token &at = peek();
        if (at.kind != Token::Kind::Ident) fail(at, "expected a plan pattern");
        if (at_word("Empty")) {
            next();
            expect_punct("<");
            TypeRef t = parse_type();
            expect_punct(">");
            return pempty(std::move(t));
        }
        if (at_word("Filter")) {
            next();
            expect_punct("(");
            Binder b = parse_binder();
            expect_punct("->");
            PredPatternPtr p = parse_pred();
            expect_punct(",");
            PlanPatternPtr in = parse_plan();
            expect_punct(")");
            return pfilter(std::move(b), std::move(p), std::move(in));
        }
        if (at_word("Project")) {
            next();
            expect_punct("(");
            Binder b = parse_binder();
            expect_punct("->");
            ExprPatternPtr e = parse_expr();
            expect_punct(",");
            PlanPatternPtr in = parse_plan();
            expect_punct(")");
            return pproject(std::move(b), std::move(e), std::move(in));
        }
        if (at_word("Join")) {
            next();
            expect_punct("(");
            Binder bl = parse_binder();
            Binder br = parse_binder();
            expect_punct("->");
            PredPatternPtr p = parse_pred();
            expect_punct(",");
            PlanPatternPtr l = parse_plan();
            expect_punct(",");
            PlanPatternPtr r = parse_plan();
            expect_punct(")");
            return pjoin(std::move(bl), std::move(br), std::move(p), std::move(l), std::move(r));
        }
        if (at_word("Union")) {
            next();
            expect_punct("(");
            PlanPatternPtr l = parse_plan();
            expect_punct(",");
            PlanPatternPtr r = parse_plan();
            expect_punct(")");
            return punion(std::move(l), std::move(r));
        }
        if (at_word("Distinct")) {
            next();
            expect_punct("(");
            PlanPatternPtr in = parse_plan();
            expect_punct(")");
            return pdistinct(std::move(in));
        }
        if (at_word("Aggregate")) {
            next();
            expect_punct("(");
            Binder kb = parse_binder();
            expect_punct("->");
            ExprPatternPtr key = parse_expr();
            expect_punct(",");
            Binder ab = parse_binder();
            expect_punct("->");
            const Token &aat = peek();
            ExprPatternPtr aggExpr = parse_expr();
            AggPattern agg = expr_to_agg(aggExpr, aat);
            expect_punct(",");
            PlanPatternPtr in = parse_plan();
            expect_punct(")");
            if (ab.names.size() != kb.names.size())
                fail(aat, "Aggregate lambdas must bind the same tuple shape");
            std::map<std::string, std::string> ren;
            for (size_t i = 0; i < ab.names.size(); ++i) ren[ab.names[i]] = kb.names[i];
            for (auto &a : agg.args) a = rename_vars(a, ren);
            return paggregate(std::move(kb), std::move(key), std::move(agg), std::move(in));
        }
        if (reserved_words().count(at.text)) fail(at, "'" + at.text + "' cannot start a plan pattern");
        std::string name = next().text;
        if (!at_punct("(")) return psymbol(std::move(name));
        // custom operator application
        next();
        std::vector<std::variant<PlanPatternPtr, LambdaPat>> args;
        auto sig = opSigs.find(name);
        if (!at_punct(")")) {
            do {
                std::optional<ParamKind> want;
                if (sig != opSigs.end() && args.size() < sig->second.size())
                    want = sig->second[args.size()];
                args.push_back(parse_custom_arg(want));
            } while (accept_punct(","));
        }
        expect_punct(")");
        return pcustom(std::move(name), std::move(args));
    }

    bool looks_like_lambda() {
        // binder sequence followed by '->': IDENT+ or '(' names ')' groups
        size_t k = 0;
        int groups = 0;
        while (true) {
            const Token &t = peek(k);
            if (t.kind == Token::Kind::Ident && !reserved_words().count(t.text)) {
                ++k;
                ++groups;
            } else if (t.kind == Token::Kind::Punct && t.text == "(") {
                size_t j = k + 1;
                while (peek(j).kind == Token::Kind::Ident ||
                       (peek(j).kind == Token::Kind::Punct && peek(j).text == ","))
                    ++j;
                if (!(peek(j).kind == Token::Kind::Punct && peek(j).text == ")")) return false;
                k = j + 1;
                ++groups;
            } else {
                break;
            }
            if (peek(k).kind == Token::Kind::Punct && peek(k).text == "->") return groups >= 1;
        }
        return false;
    }

    std::variant<PlanPatternPtr, LambdaPat> parse_custom_arg(std::optional<ParamKind> want) {
        if (want && *want == ParamKind::Plan) return parse_plan();
        if (!looks_like_lambda()) return parse_plan();
        LambdaPat lam;
        lam.binders.push_back(parse_binder());
        while (!at_punct("->")) lam.binders.push_back(parse_binder());
        expect_punct("->");
        const Token &at = peek();
        if (want && *want == ParamKind::Aggregate) {
            lam.body = expr_to_agg(parse_expr(), at);
            return lam;
        }
        if (want && *want == ParamKind::Scalar) {
            lam.body = parse_expr();
            return lam;
        }
        PredOrExpr poe = parse_por();
        if (auto *p = std::get_if<PredPatternPtr>(&poe)) {
            lam.body = *p;
            return lam;
        }
        auto &e = std::get<ExprPatternPtr>(poe);
        if (auto *a = std::get_if<EApply>(&e->node)) {
            auto it = funcKinds.find(a->func);
            if (it != funcKinds.end() && it->second == FuncKind::Aggregate) {
                lam.body = AggPattern{a->func, a->args};
                return lam;
            }
            if (it != funcKinds.end() && it->second == FuncKind::Predicate) {
                lam.body = papply(a->func, a->args);
                return lam;
            }
        }
        lam.body = e;
        return lam;
    }

    // ---- declarations ----

    FuncSymbol parse_func_decl() {
        FuncSymbol f;
        f.name = expect_ident("function name");
        expect_punct(":");
        f.params = parse_arg_types();
        expect_punct("->");
        f.result = parse_type();
        f.kind = f.result.kind == TypeRef::Kind::Bool ? FuncKind::Predicate : FuncKind::Scalar;
        return f;
    }

    FuncSymbol parse_agg_decl() {
        FuncSymbol f;
        f.name = expect_ident("aggregate name");
        expect_punct(":");
        f.params = {parse_bag_type()};
        expect_punct("->");
        f.result = parse_type();
        f.kind = FuncKind::Aggregate;
        return f;
    }

    Rule parse_rule() {
        expect_word("rule");
        Rule r;
        r.name = expect_ident("rule name");
        expect_punct("{");
        funcKinds.clear();
        if (accept_word("types")) {
            r.typeDecls.push_back({expect_ident("type name")});
            while (accept_punct(",")) r.typeDecls.push_back({expect_ident("type name")});
            expect_punct(";");
        }
        if (accept_word("funcs")) {
            r.funcDecls.push_back(parse_func_decl());
            while (accept_punct(",")) r.funcDecls.push_back(parse_func_decl());
            expect_punct(";");
        }
        if (accept_word("aggs")) {
            r.funcDecls.push_back(parse_agg_decl());
            while (accept_punct(",")) r.funcDecls.push_back(parse_agg_decl());
            expect_punct(";");
        }
        if (accept_word("plans")) {
            do {
                PlanSymbol p;
                p.name = expect_ident("plan symbol");
                expect_punct(":");
                p.rowType = parse_bag_type();
                r.planDecls.push_back(std::move(p));
            } while (accept_punct(","));
            expect_punct(";");
        }
        for (auto &f : r.funcDecls) funcKinds[f.name] = f.kind;
        expect_word("from");
        r.from = parse_plan();
        expect_punct(";");
        expect_word("to");
        r.to = parse_plan();
        expect_punct(";");
        if (accept_word("where")) {
            do {
                expect_word("injective");
                expect_punct("(");
                r.constraints.push_back({Constraint::Kind::Injective, expect_ident("function name")});
                expect_punct(")");
            } while (accept_punct(","));
            expect_punct(";");
        }
        expect_punct("}");
        return r;
    }

    CustomOpDef parse_def() {
        expect_word("def");
        CustomOpDef def;
        def.name = expect_ident("operator name");
        expect_punct("(");
        funcKinds.clear();
        if (!at_punct(")")) {
            do {
                ParamSpec p;
                p.name = expect_ident("parameter name");
                expect_punct(":");
                if (at_word("Bag")) {
                    TypeRef elem = parse_bag_type();
                    if (accept_punct("->")) {
                        p.kind = ParamKind::Aggregate;
                        p.params = {std::move(elem)};
                        p.result = parse_type();
                        funcKinds[p.name] = FuncKind::Aggregate;
                    } else {
                        p.kind = ParamKind::Plan;
                        p.rowType = std::move(elem);
                    }
                } else {
                    p.params = parse_arg_types();
                    expect_punct("->");
                    p.result = parse_type();
                    p.kind = p.result.kind == TypeRef::Kind::Bool ? ParamKind::Predicate : ParamKind::Scalar;
                    funcKinds[p.name] = p.kind == ParamKind::Predicate ? FuncKind::Predicate : FuncKind::Scalar;
                }
                def.params.push_back(std::move(p));
            } while (accept_punct(","));
        }
        expect_punct(")");
        expect_punct("->");
        def.outputRowType = parse_bag_type();
        expect_punct("=");
        def.semantics = parse_plan();
        expect_punct(";");
        // type parameters: named types of the signature, in first-appearance order
        std::vector<std::string> order;
        std::set<std::string> seen;
        auto collect = [&](const TypeRef &t, auto &&self) -> void {
            if (t.kind == TypeRef::Kind::Named) {
                if (seen.insert(t.name).second) order.push_back(t.name);
            } else if (t.kind == TypeRef::Kind::Product) {
                for (auto &c : t.components) self(c, self);
            }
        };
        for (auto &p : def.params) {
            if (p.kind == ParamKind::Plan) collect(p.rowType, collect);
            for (auto &pt : p.params) collect(pt, collect);
            if (p.kind == ParamKind::Scalar || p.kind == ParamKind::Aggregate) collect(p.result, collect);
        }
        collect(def.outputRowType, collect);
        def.typeParams = std::move(order);
        return def;
    }

    void skip_to_next_decl() {
        int depth = 0;
        while (peek().kind != Token::Kind::End) {
            if (depth == 0 && (at_word("rule") || at_word("def"))) return;
            if (at_punct("{")) ++depth;
            if (at_punct("}") && depth > 0) --depth;
            next();
        }
    }
};

} // namespace dsl

/// Parses a full `.rules` file. Custom-operator definitions are registered
/// into a scratch registry as they appear so later defs and all rules can
/// use them; every rule is validated. All failures come back as positioned
/// diagnostics, never exceptions.
inline std::variant<RuleFile, std::vector<Diagnostic>> parse_rule_file(const std::string &source) {
    std::vector<Diagnostic> diags;
    auto toks = dsl::lex(source, diags);
    if (!diags.empty()) return diags;
    dsl::Parser p;
    p.toks = std::move(toks);
    RuleFile file;
    CustomOpRegistry registry;
    std::set<std::string> names;
    while (p.peek().kind != dsl::Token::Kind::End) {
        int line = p.peek().line, col = p.peek().column;
        try {
            if (p.at_word("def")) {
                CustomOpDef def = p.parse_def();
                if (!names.insert(def.name).second) {
                    diags.push_back({Severity::Error, line, col, "", "duplicate name '" + def.name + "'"});
                    continue;
                }
                try {
                    auto defDiags = register_def(def, registry);
                    for (auto &d : defDiags)
                        if (d.severity == Severity::Error) diags.push_back(d);
                } catch (const std::exception &e) {
                    diags.push_back({Severity::Error, line, col, "", std::string("definition error: ") + e.what()});
                    continue;
                }
                p.opSigs = registry.signatures();
                file.customDefs.push_back(std::move(def));
            } else if (p.at_word("rule")) {
                Rule r = p.parse_rule();
                if (!names.insert(r.name).second) {
                    diags.push_back({Severity::Error, line, col, "", "duplicate name '" + r.name + "'"});
                    continue;
                }
                auto sigs = registry.signatures();
                for (auto &d : validate_rule(r, &sigs))
                    if (d.severity == Severity::Error)
                        diags.push_back({d.severity, line, col, d.path, "rule " + r.name + ": " + d.message});
                file.rules.push_back(std::move(r));
            } else {
                p.fail(p.peek(), "expected 'def' or 'rule'");
            }
        } catch (const dsl::ParseAbort &a) {
            diags.push_back(a.diag);
            p.skip_to_next_decl();
        }
    }
    if (!diags.empty()) return diags;
    return file;
}

// ---------------------------------------------------------------------------
// Printer

namespace dsl {

inline void print_type(std::ostream &os, const TypeRef &t) {
    if (t.kind == TypeRef::Kind::Bool) {
        os << "Bool";
    } else if (t.kind == TypeRef::Kind::Named) {
        os << t.name;
    } else {
        os << "(";
        for (size_t i = 0; i < t.components.size(); ++i) {
            if (i) os << ", ";
            print_type(os, t.components[i]);
        }
        os << ")";
    }
}

inline void print_arg_types(std::ostream &os, const std::vector<TypeRef> &params) {
    if (params.size() == 1 && params[0].kind != TypeRef::Kind::Product) {
        print_type(os, params[0]);
        return;
    }
    os << "(";
    for (size_t i = 0; i < params.size(); ++i) {
        if (i) os << ", ";
        print_type(os, params[i]);
    }
    os << ")";
}

inline void print_binder(std::ostream &os, const Binder &b) {
    if (b.names.size() == 1) {
        os << b.names[0];
        return;
    }
    os << "(";
    for (size_t i = 0; i < b.names.size(); ++i) {
        if (i) os << ", ";
        os << b.names[i];
    }
    os << ")";
}

inline void print_expr(std::ostream &os, const ExprPatternPtr &e) {
    if (auto *v = std::get_if<EVar>(&e->node)) {
        os << v->name;
    } else if (auto *c = std::get_if<EConst>(&e->node)) {
        if (is_null(c->value.value)) {
            os << "null";
        } else if (auto *i = std::get_if<std::int64_t>(&c->value.value)) {
            os << *i;
        } else if (auto *s = std::get_if<std::string>(&c->value.value)) {
            os << '"';
            for (char ch : *s) {
                if (ch == '"' || ch == '\\') os << '\\';
                if (ch == '\n') {
                    os << "\\n";
                    continue;
                }
                os << ch;
            }
            os << '"';
        } else {
            os << (std::get<bool>(c->value.value) ? "true" : "false");
        }
    } else if (auto *a = std::get_if<EApply>(&e->node)) {
        os << a->func << "(";
        for (size_t i = 0; i < a->args.size(); ++i) {
            if (i) os << ", ";
            print_expr(os, a->args[i]);
        }
        os << ")";
    } else {
        auto &t = std::get<ETupleProject>(e->node);
        print_expr(os, t.base);
        os << "." << t.index;
    }
}

inline void print_plan(std::ostream &os, const PlanPatternPtr &q);

// precedence: or = 1, and = 2, not = 3, atoms = 4
inline void print_pred(std::ostream &os, const PredPatternPtr &p, int minPrec = 1) {
    auto paren = [&](int prec, auto &&body) {
        if (prec < minPrec) {
            os << "(";
            body();
            os << ")";
        } else {
            body();
        }
    };
    if (auto *a = std::get_if<PApply>(&p->node)) {
        os << a->func << "(";
        for (size_t i = 0; i < a->args.size(); ++i) {
            if (i) os << ", ";
            print_expr(os, a->args[i]);
        }
        os << ")";
    } else if (std::holds_alternative<PTop>(p->node)) {
        os << "true";
    } else if (std::holds_alternative<PBottom>(p->node)) {
        os << "false";
    } else if (auto *n = std::get_if<PNot>(&p->node)) {
        paren(3, [&] {
            os << "not ";
            print_pred(os, n->arg, 4);
        });
    } else if (auto *c = std::get_if<PAnd>(&p->node)) {
        paren(2, [&] {
            print_pred(os, c->left, 2);
            os << " and ";
            print_pred(os, c->right, 3);
        });
    } else if (auto *c = std::get_if<POr>(&p->node)) {
        paren(1, [&] {
            print_pred(os, c->left, 1);
            os << " or ";
            print_pred(os, c->right, 2);
        });
    } else if (auto *c = std::get_if<PCompare>(&p->node)) {
        print_expr(os, c->left);
        os << (c->op == PCompare::Op::Eq ? " == " : " != ");
        print_expr(os, c->right);
    } else if (auto *n = std::get_if<PNullTest>(&p->node)) {
        print_expr(os, n->arg);
        os << (n->negated ? " is not null" : " is null");
    } else {
        os << "Exists(";
        print_plan(os, std::get<PExists>(p->node).subplan);
        os << ")";
    }
}

inline void print_agg(std::ostream &os, const AggPattern &a) {
    os << a.func << "(";
    for (size_t i = 0; i < a.args.size(); ++i) {
        if (i) os << ", ";
        print_expr(os, a.args[i]);
    }
    os << ")";
}

inline void print_plan(std::ostream &os, const PlanPatternPtr &q) {
    if (auto *s = std::get_if<SymbolPat>(&q->node)) {
        os << s->name;
    } else if (auto *e = std::get_if<EmptyPat>(&q->node)) {
        os << "Empty<";
        print_type(os, e->rowType);
        os << ">";
    } else if (auto *f = std::get_if<FilterPat>(&q->node)) {
        os << "Filter(";
        print_binder(os, f->binder);
        os << " -> ";
        print_pred(os, f->predicate);
        os << ", ";
        print_plan(os, f->input);
        os << ")";
    } else if (auto *pr = std::get_if<ProjectPat>(&q->node)) {
        os << "Project(";
        print_binder(os, pr->binder);
        os << " -> ";
        print_expr(os, pr->expr);
        os << ", ";
        print_plan(os, pr->input);
        os << ")";
    } else if (auto *j = std::get_if<JoinPat>(&q->node)) {
        os << "Join(";
        print_binder(os, j->left_binder);
        os << " ";
        print_binder(os, j->right_binder);
        os << " -> ";
        print_pred(os, j->predicate);
        os << ", ";
        print_plan(os, j->left);
        os << ", ";
        print_plan(os, j->right);
        os << ")";
    } else if (auto *u = std::get_if<UnionPat>(&q->node)) {
        os << "Union(";
        print_plan(os, u->left);
        os << ", ";
        print_plan(os, u->right);
        os << ")";
    } else if (auto *d = std::get_if<DistinctPat>(&q->node)) {
        os << "Distinct(";
        print_plan(os, d->input);
        os << ")";
    } else if (auto *g = std::get_if<AggregatePat>(&q->node)) {
        os << "Aggregate(";
        print_binder(os, g->binder);
        os << " -> ";
        print_expr(os, g->key);
        os << ", ";
        print_binder(os, g->binder);
        os << " -> ";
        print_agg(os, g->agg);
        os << ", ";
        print_plan(os, g->input);
        os << ")";
    } else {
        auto &c = std::get<CustomPat>(q->node);
        os << c.op_name << "(";
        for (size_t i = 0; i < c.args.size(); ++i) {
            if (i) os << ", ";
            if (auto *pp = std::get_if<PlanPatternPtr>(&c.args[i])) {
                print_plan(os, *pp);
            } else {
                auto &l = std::get<LambdaPat>(c.args[i]);
                for (size_t b = 0; b < l.binders.size(); ++b) {
                    if (b) os << " ";
                    print_binder(os, l.binders[b]);
                }
                os << " -> ";
                if (auto *bp = std::get_if<PredPatternPtr>(&l.body)) print_pred(os, *bp);
                else if (auto *be = std::get_if<ExprPatternPtr>(&l.body)) print_expr(os, *be);
                else print_agg(os, std::get<AggPattern>(l.body));
            }
        }
        os << ")";
    }
}

inline void print_def(std::ostream &os, const CustomOpDef &def) {
    os << "def " << def.name << "(";
    for (size_t i = 0; i < def.params.size(); ++i) {
        auto &p = def.params[i];
        if (i) os << ", ";
        os << p.name << ": ";
        switch (p.kind) {
            case ParamKind::Plan:
                os << "Bag<";
                print_type(os, p.rowType);
                os << ">";
                break;
            case ParamKind::Aggregate:
                os << "Bag<";
                print_type(os, p.params[0]);
                os << "> -> ";
                print_type(os, p.result);
                break;
            default:
                print_arg_types(os, p.params);
                os << " -> ";
                print_type(os, p.kind == ParamKind::Predicate ? TypeRef::boolean() : p.result);
                break;
        }
    }
    os << ") -> Bag<";
    print_type(os, def.outputRowType);
    os << "> =\n  ";
    print_plan(os, def.semantics);
    os << ";\n";
}

inline void print_rule(std::ostream &os, const Rule &r) {
    os << "rule " << r.name << " {\n";
    if (!r.typeDecls.empty()) {
        os << "  types ";
        for (size_t i = 0; i < r.typeDecls.size(); ++i) os << (i ? ", " : "") << r.typeDecls[i].name;
        os << ";\n";
    }
    std::vector<const FuncSymbol *> funcs, aggs;
    for (auto &f : r.funcDecls) (f.kind == FuncKind::Aggregate ? aggs : funcs).push_back(&f);
    if (!funcs.empty()) {
        os << "  funcs ";
        for (size_t i = 0; i < funcs.size(); ++i) {
            if (i) os << ", ";
            os << funcs[i]->name << ": ";
            print_arg_types(os, funcs[i]->params);
            os << " -> ";
            print_type(os, funcs[i]->result);
        }
        os << ";\n";
    }
    if (!aggs.empty()) {
        os << "  aggs ";
        for (size_t i = 0; i < aggs.size(); ++i) {
            if (i) os << ", ";
            os << aggs[i]->name << ": Bag<";
            print_type(os, aggs[i]->params[0]);
            os << "> -> ";
            print_type(os, aggs[i]->result);
        }
        os << ";\n";
    }
    if (!r.planDecls.empty()) {
        os << "  plans ";
        for (size_t i = 0; i < r.planDecls.size(); ++i) {
            if (i) os << ", ";
            os << r.planDecls[i].name << ": Bag<";
            print_type(os, r.planDecls[i].rowType);
            os << ">";
        }
        os << ";\n";
    }
    os << "  from ";
    print_plan(os, r.from);
    os << ";\n  to ";
    print_plan(os, r.to);
    os << ";\n";
    if (!r.constraints.empty()) {
        os << "  where ";
        for (size_t i = 0; i < r.constraints.size(); ++i)
            os << (i ? ", " : "") << "injective(" << r.constraints[i].subject << ")";
        os << ";\n";
    }
    os << "}\n";
}

} // namespace dsl

/// Canonical text form: parse(print(file)) is structurally equal to file,
/// and print is idempotent over parse of its own output.
inline std::string print_rule_file(const RuleFile &file) {
    std::ostringstream os;
    os << "-- rewrite rules\n";
    for (auto &d : file.customDefs) {
        os << "\n";
        dsl::print_def(os, d);
    }
    for (auto &r : file.rules) {
        os << "\n";
        dsl::print_rule(os, r);
    }
    return os.str();
}

/// Parses, registers all custom defs into `registry`, and typechecks every
/// rule. Any problem becomes a diagnostic.
inline std::variant<std::vector<TypedRule>, std::vector<Diagnostic>> load_rules(
    const std::string &source, CustomOpRegistry &registry, RuleFile *parsedOut = nullptr) {
    auto parsed = parse_rule_file(source);
    if (auto *diags = std::get_if<std::vector<Diagnostic>>(&parsed)) return *diags;
    auto &file = std::get<RuleFile>(parsed);
    std::vector<Diagnostic> diags;
    for (auto &def : file.customDefs) {
        if (registry.contains(def.name)) continue; // same def may be repeated across files
        try {
            for (auto &d : register_def(def, registry))
                if (d.severity == Severity::Error) diags.push_back(d);
        } catch (const std::exception &e) {
            diags.push_back({Severity::Error, 0, 0, def.name, std::string("definition error: ") + e.what()});
        }
    }
    std::vector<TypedRule> out;
    for (auto &r : file.rules) {
        auto res = typecheck_rule(r, registry);
        if (auto *errs = std::get_if<std::vector<Diagnostic>>(&res)) {
            for (auto &d : *errs)
                diags.push_back({d.severity, d.line, d.column, d.path, "rule " + r.name + ": " + d.message});
        } else {
            out.push_back(std::get<TypedRule>(res));
        }
    }
    if (parsedOut) *parsedOut = std::move(file);
    if (!diags.empty()) return diags;
    return out;
}

} // namespace rulekit
