// End-to-end acceptance checks. Each criterion prints exactly one PASS/FAIL
// line; the process exits nonzero if any criterion fails.
#include "helpers.hpp"
#include "rulekit/codegen.hpp"
#include "rulekit/json_io.hpp"
#include "rulekit/verifier.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

using namespace rulekit;
using namespace testutil;
using nlohmann::json;

namespace {

int failures = 0;

void criterion(const std::string &name, const std::function<bool(std::string &)> &body) {
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception &e) {
        detail = std::string("exception: ") + e.what();
    }
    std::printf("%s: %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.empty() ? "" : " — ",
                detail.c_str());
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TypedRule find_rule(const std::vector<TypedRule> &rules, const std::string &name) {
    auto it = std::find_if(rules.begin(), rules.end(), [&](auto &r) { return r.rule.name == name; });
    if (it == rules.end()) throw std::runtime_error("rule " + name + " not in corpus");
    return *it;
}

} // namespace

int main() {
    CustomOpRegistry reg;
    auto corpus = load_dir(repo_path("corpus"), reg);

    criterion("transpose example rewrites with the expected bindings in under a second", [&](std::string &d) {
        auto t0 = std::chrono::steady_clock::now();
        auto rule = find_rule(corpus, "SemiJoinAggTranspose");
        auto res = apply_rules_to_fixpoint({rule}, build_example_plan(), reg);
        if (res.trace.size() != 1) return false;
        if (!plan_equal(res.plan, build_example_rewritten())) return false;
        json j = trace_entry_to_json(res.trace[0]);
        bool bindingsOk = j["rule"] == "SemiJoinAggTranspose" && j["path"] == json::array() &&
                          j["bindings"]["P"] == "k.cust = y.author AND y.rating <= 1" &&
                          j["bindings"]["G"] == "x.cust" && j["bindings"]["A"] == "Sum(x.amt)" &&
                          j["bindings"]["L"] == "Scan(Order)" && j["bindings"]["R"] == "Scan(Rev)";
        Bag out = eval_plan(res.plan, build_example_db(), reg);
        bool evalOk = out.size() == 1 && out.count({Value{std::string("c1")}, Value{std::int64_t{15}}}) == 1;
        double dt = seconds_since(t0);
        d = "took " + std::to_string(dt) + "s";
        return bindingsOk && evalOk && dt < 1.0;
    });

    criterion("custom-operator expansion produces the inlined filter/exists rule", [&](std::string &) {
        auto rule = find_rule(corpus, "SemiJoinAggTranspose");
        auto aggr = paggregate(Binder{{"x"}}, eapply("G", {evar("x")}), AggPattern{"A", {evar("x")}},
                               psymbol("L"));
        auto expectFrom = pfilter(
            Binder{{"_x1"}},
            pexists(pfilter(Binder{{"_y2"}}, papply("P", {etuple_project(evar("_x1"), 0), evar("_y2")}),
                            psymbol("R"))),
            aggr);
        auto expectTo = paggregate(
            Binder{{"x"}}, eapply("G", {evar("x")}), AggPattern{"A", {evar("x")}},
            pfilter(Binder{{"_x1"}},
                    pexists(pfilter(Binder{{"_y2"}}, papply("P", {eapply("G", {evar("_x1")}), evar("_y2")}),
                                    psymbol("R"))),
                    psymbol("L")));
        return pattern_equal(expand(rule.rule.from, reg), expectFrom) &&
               pattern_equal(expand(rule.rule.to, reg), expectTo);
    });

    criterion("a corpus of 12+ rules in 6+ categories verifies clean within budget", [&](std::string &d) {
        std::set<std::string> categories;
        for (auto &f : rules_files_in(repo_path("corpus"))) {
            std::string text = slurp(f);
            auto pos = text.find("-- category: ");
            if (pos != std::string::npos)
                categories.insert(text.substr(pos + 13, text.find('\n', pos) - pos - 13));
        }
        if (corpus.size() < 12 || categories.size() < 6) return false;
        double worst = 0;
        for (auto &r : corpus) {
            auto rep = verify_rule(r, reg);
            if (rep.counterexampleFound) {
                d = "counterexample for " + r.rule.name;
                return false;
            }
            worst = std::max(worst, rep.elapsedSeconds);
        }
        d = std::to_string(corpus.size()) + " rules, " + std::to_string(categories.size()) +
            " categories, worst rule " + std::to_string(worst) + "s";
        return worst < 5.0;
    });

    criterion("all 8+ seeded mutants are refuted with small, replayable counterexamples", [&](std::string &d) {
        CustomOpRegistry mreg;
        auto mutants = load_dir(repo_path("tests/mutations"), mreg);
        if (mutants.size() < 8) return false;
        for (auto &m : mutants) {
            auto rep = verify_rule(m, mreg);
            if (!rep.counterexampleFound || !rep.instance) {
                d = m.rule.name + " survived";
                return false;
            }
            for (auto &[_, bag] : rep.instance->planTables)
                if (bag.size() > 3) return false;
            for (auto &[_, dom] : rep.instance->domains)
                if (dom.size() > 3) return false;
            auto setup = prepare_verification(m, mreg);
            auto [from, to] = replay_instance(setup, *rep.instance, mreg);
            if (bag_equal(from, to) || !bag_equal(from, rep.bagFrom) || !bag_equal(to, rep.bagTo))
                return false;
        }
        d = std::to_string(mutants.size()) + " mutants killed";
        return true;
    });

    criterion("40+ rule applications agree with evaluation on 20 sampled databases each", [&](std::string &d) {
        int applications = 0;
        VerifyConfig cfg;
        ConstraintGuard accept = [](const Constraint &, const FunctionBinding &) { return true; };
        for (auto &rule : corpus) {
            auto setup = prepare_verification(rule, reg);
            for (std::uint64_t seed = 0; seed < 20; ++seed) {
                cfg.seed = seed;
                Instance inst = sample_instance(setup.expanded, cfg, 0);
                auto ctx = detail::instance_context(setup.expanded, inst);
                auto planFrom = apply_transform(setup.expanded.rule.from, setup.expanded.types, ctx, reg);
                auto res = apply_rule(setup.expanded, planFrom, reg, &accept);
                if (!res) {
                    d = rule.rule.name + " failed to re-match its own instance";
                    return false;
                }
                Database db;
                FunctionEnv env = detail::instance_env(inst);
                if (!bag_equal(eval_plan(planFrom, db, reg, &env), eval_plan(res->plan, db, reg, &env))) {
                    d = rule.rule.name + " disagreed at seed " + std::to_string(seed);
                    return false;
                }
                ++applications;
            }
        }
        d = std::to_string(applications) + " applications checked";
        return applications >= 40;
    });

    criterion("custom semi-join equals its expansion on 100 sampled databases", [&](std::string &) {
        Schema ls{{{"a", ValueType::Int}, {"b", ValueType::Int}}};
        Schema rs{{{"c", ValueType::Int}, {"d", ValueType::Int}}};
        auto pred = call(CallOp::Eq, {col(0), col(2)});
        auto viaCustom = custom("SemiJoin", {std::vector<ScalarExprPtr>{pred}, scan("L", ls), scan("R", rs)});
        auto inner = filter(call(CallOp::Eq, {col(Side::Left, 0), col(Side::Only, 0)}), scan("R", rs));
        auto viaExpansion = filter(exists(inner), scan("L", ls));
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            RowGen gen(seed);
            Database db;
            db.tables["L"] = gen.table(ls, 4);
            db.tables["R"] = gen.table(rs, 4);
            if (!bag_equal(eval_plan(viaCustom, db, reg), eval_plan(viaExpansion, db, reg))) return false;
        }
        return true;
    });

    criterion("generated optimizer rules match the golden files byte for byte", [&](std::string &) {
        auto map = parse_opmap(slurp(repo_path("corpus/cockroach.opmap")));
        Provenance prov;
        prov.version = "0.1.0";
        prov.verdict = "noCounterexampleFound";
        prov.seed = 0;
        prov.trials = 1000;
        return emit_optgen(find_rule(corpus, "SemiJoinAggTranspose"), reg, map, prov) ==
                   slurp(repo_path("corpus/golden/SemiJoinAggTranspose.opt")) &&
               emit_optgen(find_rule(corpus, "PruneEmptyFilter"), reg, map, prov) ==
                   slurp(repo_path("corpus/golden/PruneEmptyFilter.opt"));
    });

    criterion("the corpus round-trips through the printer and survives 10000 fuzz inputs", [&](std::string &) {
        for (auto dir : {std::string("corpus"), std::string("tests/mutations")}) {
            for (auto &path : rules_files_in(repo_path(dir))) {
                auto parsed = parse_rule_file(slurp(path));
                auto *file = std::get_if<RuleFile>(&parsed);
                if (!file) return false;
                std::string once = print_rule_file(*file);
                auto again = parse_rule_file(once);
                auto *file2 = std::get_if<RuleFile>(&again);
                if (!file2 || print_rule_file(*file2) != once) return false;
            }
        }
        std::string seedSrc = slurp(repo_path("corpus/semijoin_agg_transpose.rules"));
        const char vocab[] = "(){}<>,;:.=->aXL def rule from to types funcs aggs plans Bag Bool Filter\"\n 09";
        std::mt19937_64 rng(1);
        for (int i = 0; i < 10000; ++i) {
            std::string input;
            if (i % 2 == 0) {
                size_t n = rng() % 200;
                for (size_t j = 0; j < n; ++j) input.push_back(vocab[rng() % (sizeof(vocab) - 1)]);
            } else {
                input = seedSrc;
                for (size_t j = 0, e = 1 + rng() % 8; j < e && !input.empty(); ++j) {
                    size_t pos = rng() % input.size();
                    input[pos] = vocab[rng() % (sizeof(vocab) - 1)];
                }
            }
            (void)parse_rule_file(input); // must not crash or hang
        }
        return true;
    });

    criterion("every corpus rule file stays within 40 lines", [&](std::string &d) {
        size_t worst = 0;
        for (auto &path : rules_files_in(repo_path("corpus"))) {
            std::string text = slurp(path);
            size_t lines = static_cast<size_t>(std::count(text.begin(), text.end(), '\n'));
            worst = std::max(worst, lines);
            if (lines > 40) {
                d = path + " has " + std::to_string(lines) + " lines";
                return false;
            }
        }
        d = "longest file " + std::to_string(worst) + " lines";
        return true;
    });

    return failures == 0 ? 0 : 1;
}
