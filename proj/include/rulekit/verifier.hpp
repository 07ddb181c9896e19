#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rulekit/evaluator.hpp"
#include "rulekit/engine.hpp"
#include "rulekit/typecheck.hpp"

namespace rulekit {

struct VerifyConfig {
    int trials = 1000;
    int minDomain = 2; // token count per abstract type, Null added on top
    int maxDomain = 4;
    int maxRows = 3;
    int retryBudget = 100;
    std::uint64_t seed = 0;
};

/// A sampled finite interpretation of every uninterpreted symbol of a rule.
/// Abstract types become single Str columns over token domains {t0, t1, ...}
/// plus Null, so no accidental arithmetic structure leaks in.
struct Instance {
    std::map<std::string, std::vector<Value>> domains; // type symbol -> tokens (Null implicit)
    std::map<std::string, std::map<std::vector<Value>, Value>> funcTables;
    std::map<std::string, AggSpec> aggSeeds;
    std::map<std::string, Bag> planTables;
    std::uint64_t seed = 0;
};

struct VerifyReport {
    bool counterexampleFound = false;
    std::optional<Instance> instance;
    Bag bagFrom, bagTo;
    int trialsRun = 0;
    double elapsedSeconds = 0.0;
};

struct ConstraintUnsatisfiable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool pattern_has_custom(const PlanPatternPtr &q);

inline bool pred_has_custom(const PredPatternPtr &p) {
    if (auto *x = std::get_if<PExists>(&p->node)) return pattern_has_custom(x->subplan);
    if (auto *n = std::get_if<PNot>(&p->node)) return pred_has_custom(n->arg);
    if (auto *c = std::get_if<PAnd>(&p->node)) return pred_has_custom(c->left) || pred_has_custom(c->right);
    if (auto *c = std::get_if<POr>(&p->node)) return pred_has_custom(c->left) || pred_has_custom(c->right);
    return false;
}

inline bool pattern_has_custom(const PlanPatternPtr &q) {
    if (std::holds_alternative<CustomPat>(q->node)) return true;
    if (auto *f = std::get_if<FilterPat>(&q->node))
        return pred_has_custom(f->predicate) || pattern_has_custom(f->input);
    if (auto *p = std::get_if<ProjectPat>(&q->node)) return pattern_has_custom(p->input);
    if (auto *j = std::get_if<JoinPat>(&q->node))
        return pred_has_custom(j->predicate) || pattern_has_custom(j->left) || pattern_has_custom(j->right);
    if (auto *u = std::get_if<UnionPat>(&q->node))
        return pattern_has_custom(u->left) || pattern_has_custom(u->right);
    if (auto *d = std::get_if<DistinctPat>(&q->node)) return pattern_has_custom(d->input);
    if (auto *g = std::get_if<AggregatePat>(&q->node)) return pattern_has_custom(g->input);
    return false;
}

/// Flattens an abstract row type into the list of named type symbols of its
/// columns (each abstract type is one column in sampled instances).
inline void flatten_type_columns(const TypeRef &t, std::vector<std::string> &out) {
    if (t.kind == TypeRef::Kind::Named) {
        out.push_back(t.name);
    } else if (t.kind == TypeRef::Kind::Product) {
        for (auto &c : t.components) flatten_type_columns(c, out);
    } else {
        throw UnsupportedPattern("Bool cannot be a sampled row column");
    }
}

struct SampleRng {
    std::mt19937_64 gen;
    explicit SampleRng(std::uint64_t seed) : gen(seed) {}
    // modulo draw: portable across standard libraries, slight bias is fine
    std::uint64_t below(std::uint64_t n) { return n ? gen() % n : 0; }
};

} // namespace detail

/// Rule prepared for bounded checking: both sides expanded to core
/// operators and re-annotated.
struct VerifySetup {
    TypedRule expanded;
};

inline VerifySetup prepare_verification(const TypedRule &rule, const CustomOpRegistry &registry) {
    Rule core = rule.rule;
    core.from = expand(rule.rule.from, registry);
    core.to = expand(rule.rule.to, registry);
    if (detail::pattern_has_custom(core.from) || detail::pattern_has_custom(core.to))
        throw UnsupportedPattern("expansion left custom operators behind (unregistered definition?)");
    auto res = typecheck_rule(core, registry);
    if (auto *errs = std::get_if<std::vector<Diagnostic>>(&res))
        throw UnsupportedPattern("expanded rule does not typecheck: " +
                                 (errs->empty() ? std::string("?") : (*errs)[0].path + ": " + (*errs)[0].message));
    return VerifySetup{std::get<TypedRule>(res)};
}

/// Deterministically samples an instance for one trial. Domain sizes are
/// drawn from [minDomain, maxDomain]; tables from [0, maxRows] rows (empty
/// tables occur naturally in the mix); predicate outputs include Unknown;
/// injective constraints are enforced by rejection, enlarging the codomain
/// when the retry budget runs out.
inline Instance sample_instance(const TypedRule &rule, const VerifyConfig &cfg, std::uint64_t trialIndex) {
    using namespace detail;
    std::uint64_t mixed = fnv1a(fnv1a(14695981039346656037ull, &cfg.seed, sizeof(cfg.seed)), &trialIndex,
                                sizeof(trialIndex));
    SampleRng rng(mixed);
    Instance inst;
    inst.seed = mixed;

    auto token = [](std::uint64_t i) { return Value{"t" + std::to_string(i)}; };

    for (auto &t : rule.rule.typeDecls) {
        std::uint64_t n = cfg.minDomain + rng.below(static_cast<std::uint64_t>(cfg.maxDomain - cfg.minDomain + 1));
        std::vector<Value> dom;
        for (std::uint64_t i = 0; i < n; ++i) dom.push_back(token(i));
        inst.domains.emplace(t.name, std::move(dom));
    }

    auto column_candidates = [&](const std::string &typeName) {
        std::vector<Value> vals = inst.domains.at(typeName);
        vals.push_back(kNull);
        return vals;
    };

    auto enumerate_tuples = [&](const std::vector<std::string> &cols) {
        std::vector<std::vector<Value>> tuples{{}};
        for (auto &c : cols) {
            auto cand = column_candidates(c);
            std::vector<std::vector<Value>> next;
            for (auto &t : tuples)
                for (auto &v : cand) {
                    auto copy = t;
                    copy.push_back(v);
                    next.push_back(std::move(copy));
                }
            tuples = std::move(next);
            if (tuples.size() > 100000)
                throw UnsupportedPattern("sampled function domain is too large to enumerate");
        }
        return tuples;
    };

    auto is_injective = [&](const std::vector<std::string> &symbols,
                            const std::vector<std::vector<Value>> &inputs) {
        std::set<std::vector<Value>> seen;
        for (auto &in : inputs) {
            std::vector<Value> out;
            for (auto &s : symbols) out.push_back(inst.funcTables.at(s).at(in));
            if (!seen.insert(std::move(out)).second) return false;
        }
        return true;
    };

    // Pre-pass: ensure injective-constrained symbols have enough codomain.
    for (auto &c : rule.rule.constraints) {
        auto *decl = rule.rule.find_func(c.subject);
        if (!decl) continue;
        std::vector<std::string> inCols, outCols;
        for (auto &p : decl->params) flatten_type_columns(p, inCols);
        flatten_type_columns(decl->result, outCols);
        auto space = [&](const std::vector<std::string> &cols) {
            std::uint64_t n = 1;
            for (auto &col : cols) n *= inst.domains.at(col).size() + 1;
            return n;
        };
        int guard = 0;
        while (space(outCols) < space(inCols)) {
            // add a token to the smallest output domain
            auto &grow = *std::min_element(outCols.begin(), outCols.end(),
                                           [&](const std::string &a, const std::string &b) {
                                               return inst.domains.at(a).size() < inst.domains.at(b).size();
                                           });
            auto &dom = inst.domains.at(grow);
            dom.push_back(token(dom.size()));
            if (++guard > 64) throw ConstraintUnsatisfiable("cannot enlarge codomain for " + c.subject);
        }
    }

    // Function tables: scalars/predicates are total over the domain product;
    // tuple-valued results get one component table per output column.
    for (auto &f : rule.rule.funcDecls) {
        std::vector<std::string> inCols;
        for (auto &p : f.params) flatten_type_columns(p, inCols);
        if (f.kind == FuncKind::Aggregate) {
            std::vector<std::string> outCols;
            flatten_type_columns(f.result, outCols);
            for (size_t j = 0; j < outCols.size(); ++j) {
                std::string key = outCols.size() == 1 ? f.name : f.name + "#" + std::to_string(j);
                AggSpec spec;
                spec.seed = rng.gen();
                spec.codomain = column_candidates(outCols[j]);
                inst.aggSeeds.emplace(std::move(key), std::move(spec));
            }
            continue;
        }
        auto inputs = enumerate_tuples(inCols);
        if (f.kind == FuncKind::Predicate) {
            auto &table = inst.funcTables[f.name];
            for (auto &in : inputs) {
                // True/False/Unknown with Unknown at ~20% weight
                std::uint64_t r = rng.below(5);
                table[in] = r == 4 ? kNull : Value{r % 2 == 0};
            }
            continue;
        }
        std::vector<std::string> outCols;
        flatten_type_columns(f.result, outCols);
        std::vector<std::string> symbols;
        for (size_t j = 0; j < outCols.size(); ++j)
            symbols.push_back(outCols.size() == 1 ? f.name : f.name + "#" + std::to_string(j));
        bool constrained = std::any_of(rule.rule.constraints.begin(), rule.rule.constraints.end(),
                                       [&](const Constraint &c) { return c.subject == f.name; });
        auto sample_tables = [&]() {
            for (size_t j = 0; j < symbols.size(); ++j) {
                auto cand = column_candidates(outCols[j]);
                auto &table = inst.funcTables[symbols[j]];
                table.clear();
                for (auto &in : inputs) table[in] = cand[rng.below(cand.size())];
            }
        };
        sample_tables();
        if (constrained) {
            int tries = 0;
            while (!is_injective(symbols, inputs)) {
                if (++tries > cfg.retryBudget) {
                    // assign a random injection outright: shuffle the output
                    // tuple space and take a prefix
                    auto outputs = enumerate_tuples(outCols);
                    for (size_t i = outputs.size(); i > 1; --i)
                        std::swap(outputs[i - 1], outputs[rng.below(i)]);
                    if (outputs.size() < inputs.size())
                        throw ConstraintUnsatisfiable("codomain of " + f.name + " is too small");
                    for (size_t i = 0; i < inputs.size(); ++i)
                        for (size_t j = 0; j < symbols.size(); ++j)
                            inst.funcTables[symbols[j]][inputs[i]] = outputs[i][j];
                    break;
                }
                sample_tables();
            }
        }
    }

    // Plan tables: bags of rows over the row type's token domains.
    for (auto &p : rule.rule.planDecls) {
        std::vector<std::string> cols;
        flatten_type_columns(p.rowType, cols);
        std::uint64_t rows = rng.below(static_cast<std::uint64_t>(cfg.maxRows + 1));
        Bag bag;
        for (std::uint64_t i = 0; i < rows; ++i) {
            Row r;
            for (auto &col : cols) {
                auto cand = column_candidates(col);
                r.push_back(cand[rng.below(cand.size())]);
            }
            bag.add(std::move(r));
        }
        inst.planTables.emplace(p.name, std::move(bag));
    }
    return inst;
}

namespace detail {

/// Materializes a sampled instance as a match context over concrete Values
/// plans and uninterpreted-symbol expressions, so both rule sides become
/// ordinary plans the evaluator can run.
inline MatchContext instance_context(const TypedRule &expanded, const Instance &inst) {
    MatchContext ctx;
    for (auto &t : expanded.rule.typeDecls)
        ctx.typeInst.emplace(t.name, Schema{{{t.name, ValueType::Str}}});

    for (auto &p : expanded.rule.planDecls) {
        Schema sch = typeref_schema(p.rowType, ctx.typeInst);
        std::vector<Row> rows;
        auto it = inst.planTables.find(p.name);
        if (it != inst.planTables.end())
            for (auto &[row, c] : it->second.entries())
                for (long i = 0; i < c; ++i) rows.push_back(row);
        ctx.plans.emplace(p.name, values(std::move(sch), std::move(rows)));
    }

    for (auto &f : expanded.rule.funcDecls) {
        FunctionBinding fb;
        int total = 0;
        for (auto &pt : f.params) {
            int w = typeref_width(pt, ctx.typeInst);
            fb.param_widths.push_back(w);
            std::vector<std::string> cols;
            flatten_type_columns(pt, cols);
            for (auto &c : cols) fb.slot_names.push_back(c);
            total += w;
        }
        fb.result = f.result;
        std::vector<ScalarExprPtr> slots;
        for (int i = 0; i < total; ++i) slots.push_back(col(Side::Only, i));
        if (f.kind == FuncKind::Predicate) {
            fb.out_names = {"p"};
            fb.out_types = {ValueType::Bool};
            fb.body = std::vector<ScalarExprPtr>{ucall(f.name, ValueType::Bool, slots)};
        } else if (f.kind == FuncKind::Scalar) {
            std::vector<std::string> outCols;
            flatten_type_columns(f.result, outCols);
            std::vector<ScalarExprPtr> body;
            for (size_t j = 0; j < outCols.size(); ++j) {
                std::string sym = outCols.size() == 1 ? f.name : f.name + "#" + std::to_string(j);
                body.push_back(ucall(sym, ValueType::Str, slots));
                fb.out_names.push_back(outCols[j]);
                fb.out_types.push_back(ValueType::Str);
            }
            fb.body = std::move(body);
        } else {
            std::vector<std::string> outCols;
            flatten_type_columns(f.result, outCols);
            std::vector<AggCall> body;
            for (size_t j = 0; j < outCols.size(); ++j) {
                std::string sym = outCols.size() == 1 ? f.name : f.name + "#" + std::to_string(j);
                body.push_back(agg_uninterp(sym, ValueType::Str, slots));
                fb.out_names.push_back(outCols[j]);
                fb.out_types.push_back(ValueType::Str);
            }
            fb.body = std::move(body);
        }
        ctx.funcs.emplace(f.name, std::move(fb));
    }
    return ctx;
}

inline FunctionEnv instance_env(const Instance &inst) {
    FunctionEnv env;
    env.tables = inst.funcTables;
    env.aggs = inst.aggSeeds;
    return env;
}

} // namespace detail

/// Replays one instance: instantiates both expanded sides as concrete plans
/// and evaluates them. Counterexamples are exactly the instances where the
/// two bags differ.
inline std::pair<Bag, Bag> replay_instance(const VerifySetup &setup, const Instance &inst,
                                           const CustomOpRegistry &registry) {
    MatchContext ctx = detail::instance_context(setup.expanded, inst);
    auto planFrom = apply_transform(setup.expanded.rule.from, setup.expanded.types, ctx, registry);
    auto planTo = apply_transform(setup.expanded.rule.to, setup.expanded.types, ctx, registry);
    FunctionEnv env = detail::instance_env(inst);
    Database db;
    return {eval_plan(planFrom, db, registry, &env), eval_plan(planTo, db, registry, &env)};
}

namespace detail {

inline bool refutes(const VerifySetup &setup, const Instance &inst, const CustomOpRegistry &registry) {
    auto [a, b] = replay_instance(setup, inst, registry);
    return !bag_equal(a, b);
}

/// Greedy shrinking: remove plan rows one at a time, then domain tokens
/// (dropping dependent rows and table entries), to a fixpoint where no
/// single removal still refutes.
inline std::optional<Instance> try_remove_row(const Instance &inst, const std::string &plan, const Row &row) {
    Instance cand = inst;
    Bag smaller;
    for (auto &[r2, c2] : inst.planTables.at(plan).entries()) smaller.add(r2, r2 == row ? c2 - 1 : c2);
    cand.planTables[plan] = std::move(smaller);
    return cand;
}

inline std::optional<Instance> try_remove_token(const Instance &inst, const std::string &type, const Value &victim) {
    Instance cand = inst;
    auto &cd = cand.domains[type];
    cd.erase(std::remove(cd.begin(), cd.end(), victim), cd.end());
    for (auto &[plan, bag] : cand.planTables) {
        Bag kept;
        for (auto &[row, c] : bag.entries())
            if (std::find(row.begin(), row.end(), victim) == row.end()) kept.add(row, c);
        bag = std::move(kept);
    }
    for (auto &[sym, table] : cand.funcTables) {
        std::map<std::vector<Value>, Value> kept;
        for (auto &[in, out] : table) {
            if (std::find(in.begin(), in.end(), victim) != in.end()) continue;
            if (out == victim) return std::nullopt; // token still needed as an output
            kept.emplace(in, out);
        }
        table = std::move(kept);
    }
    for (auto &[sym, spec] : cand.aggSeeds) {
        auto &cod = spec.codomain;
        cod.erase(std::remove(cod.begin(), cod.end(), victim), cod.end());
        if (cod.empty()) return std::nullopt;
    }
    return cand;
}

inline Instance shrink_instance(const VerifySetup &setup, Instance inst, const CustomOpRegistry &registry) {
    bool improved = true;
    while (improved) {
        improved = false;
        // one row occurrence at a time
        for (auto &[plan, bag] : inst.planTables) {
            for (auto &[row, c] : bag.entries()) {
                if (c <= 0) continue;
                auto cand = try_remove_row(inst, plan, row);
                if (cand && refutes(setup, *cand, registry)) {
                    inst = std::move(*cand);
                    improved = true;
                    break;
                }
            }
            if (improved) break;
        }
        if (improved) continue;
        // one domain token at a time
        for (auto &[type, dom] : inst.domains) {
            for (auto &victim : dom) {
                auto cand = try_remove_token(inst, type, victim);
                if (cand && refutes(setup, *cand, registry)) {
                    inst = std::move(*cand);
                    improved = true;
                    break;
                }
            }
            if (improved) break;
        }
    }
    return inst;
}

} // namespace detail

/// Bounded equivalence check: expands both sides to core operators, then
/// samples cfg.trials finite instances, evaluating both sides under each.
/// The first refuting instance (lowest trial index) is shrunk and reported.
/// A clean report is NOT a proof — it only covers the sampled bound.
inline VerifyReport verify_rule(const TypedRule &rule, const CustomOpRegistry &registry,
                                const VerifyConfig &cfg = {}) {
    auto start = std::chrono::steady_clock::now();
    VerifySetup setup = prepare_verification(rule, registry);
    VerifyReport report;
    auto stop = [&]() {
        report.elapsedSeconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    if (pattern_equal(setup.expanded.rule.from, setup.expanded.rule.to)) {
        report.trialsRun = 1;
        stop();
        return report;
    }
    for (int trial = 0; trial < cfg.trials; ++trial) {
        Instance inst = sample_instance(setup.expanded, cfg, static_cast<std::uint64_t>(trial));
        ++report.trialsRun;
        auto [a, b] = replay_instance(setup, inst, registry);
        if (!bag_equal(a, b)) {
            inst = detail::shrink_instance(setup, std::move(inst), registry);
            auto [sa, sb] = replay_instance(setup, inst, registry);
            report.counterexampleFound = true;
            report.instance = std::move(inst);
            report.bagFrom = std::move(sa);
            report.bagTo = std::move(sb);
            stop();
            return report;
        }
    }
    stop();
    return report;
}

} // namespace rulekit
