#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rulekit/codegen.hpp"
#include "rulekit/dsl.hpp"
#include "rulekit/engine.hpp"
#include "rulekit/evaluator.hpp"
#include "rulekit/json_io.hpp"
#include "rulekit/verifier.hpp"

namespace fs = std::filesystem;
using namespace rulekit;

namespace {

constexpr const char *kVersion = "0.1.0";
constexpr const char *kDisclaimer =
    "note: bounded checking over sampled finite instances; a clean report is not a proof of equivalence";

struct Global {
    std::uint64_t seed = 0;
    bool seedSet = false;
    bool quiet = false;
    bool jsonOut = false;

    std::uint64_t effective_seed() const {
        if (seedSet) return seed;
        if (const char *env = std::getenv("RULEKIT_SEED")) {
            try {
                return std::stoull(env);
            } catch (const std::exception &) {
                // fall through to default
            }
        }
        return 0;
    }
};

int usage_error(const std::string &msg) {
    std::cerr << "error: " << msg << "\n";
    return 2;
}

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_diags(const std::string &file, const std::vector<Diagnostic> &diags) {
    for (auto &d : diags) {
        std::cerr << file << ":";
        if (d.line > 0) std::cerr << d.line << ":" << d.column << ":";
        if (!d.path.empty()) std::cerr << " [" << d.path << "]";
        std::cerr << " " << (d.severity == Severity::Error ? "error: " : "warning: ") << d.message << "\n";
    }
}

/// Collects .rules files from the given paths (directories are scanned,
/// sorted by name for deterministic order).
std::vector<std::string> rule_files(const std::vector<std::string> &paths) {
    std::vector<std::string> out;
    for (auto &p : paths) {
        if (fs::is_directory(p)) {
            std::vector<std::string> dir;
            for (auto &e : fs::directory_iterator(p))
                if (e.path().extension() == ".rules") dir.push_back(e.path().string());
            std::sort(dir.begin(), dir.end());
            out.insert(out.end(), dir.begin(), dir.end());
        } else {
            out.push_back(p);
        }
    }
    return out;
}

struct LoadedFile {
    std::string path;
    RuleFile parsed;
    std::vector<TypedRule> rules;
};

/// Loads every file into one shared registry; returns nullopt after printing
/// diagnostics. `exitCode` distinguishes parse errors (2) from semantic
/// errors (1).
std::optional<std::vector<LoadedFile>> load_all(const std::vector<std::string> &paths,
                                                CustomOpRegistry &registry, int &exitCode) {
    std::vector<LoadedFile> out;
    for (auto &path : rule_files(paths)) {
        std::string text;
        try {
            text = read_file(path);
        } catch (const std::exception &e) {
            std::cerr << "error: " << e.what() << "\n";
            exitCode = 2;
            return std::nullopt;
        }
        auto parsed = parse_rule_file(text);
        if (auto *diags = std::get_if<std::vector<Diagnostic>>(&parsed)) {
            print_diags(path, *diags);
            exitCode = 2;
            return std::nullopt;
        }
        LoadedFile lf;
        lf.path = path;
        auto loaded = load_rules(text, registry, &lf.parsed);
        if (auto *diags = std::get_if<std::vector<Diagnostic>>(&loaded)) {
            print_diags(path, *diags);
            exitCode = 1;
            return std::nullopt;
        }
        lf.rules = std::move(std::get<std::vector<TypedRule>>(loaded));
        out.push_back(std::move(lf));
    }
    return out;
}

int cmd_check(const Global &g, const std::vector<std::string> &paths) {
    CustomOpRegistry registry;
    int code = 0;
    auto loaded = load_all(paths, registry, code);
    if (!loaded) return code;
    int nrules = 0, ndefs = 0;
    for (auto &lf : *loaded) {
        nrules += static_cast<int>(lf.rules.size());
        ndefs += static_cast<int>(lf.parsed.customDefs.size());
    }
    if (g.jsonOut) {
        std::cout << json{{"status", "ok"}, {"rules", nrules}, {"defs", ndefs}}.dump() << "\n";
    } else if (!g.quiet) {
        std::cout << "ok: " << nrules << " rule(s), " << ndefs << " definition(s)\n";
    }
    return 0;
}

int cmd_expand(const Global &g, const std::vector<std::string> &paths, const std::string &only) {
    CustomOpRegistry registry;
    int code = 0;
    auto loaded = load_all(paths, registry, code);
    if (!loaded) return code;
    json out = json::array();
    for (auto &lf : *loaded) {
        for (auto &r : lf.rules) {
            if (!only.empty() && r.rule.name != only) continue;
            Rule core = r.rule;
            core.from = expand(r.rule.from, registry);
            core.to = expand(r.rule.to, registry);
            if (g.jsonOut) {
                std::ostringstream f, t;
                dsl::print_plan(f, core.from);
                dsl::print_plan(t, core.to);
                out.push_back(json{{"rule", r.rule.name}, {"from", f.str()}, {"to", t.str()}});
            } else {
                dsl::print_rule(std::cout, core);
            }
        }
    }
    if (g.jsonOut) std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_verify(const Global &g, const std::vector<std::string> &paths, const VerifyConfig &cfgIn) {
    CustomOpRegistry registry;
    int code = 0;
    auto loaded = load_all(paths, registry, code);
    if (!loaded) return code;
    VerifyConfig cfg = cfgIn;
    cfg.seed = g.effective_seed();
    bool anyCex = false;
    json reports = json::array();
    for (auto &lf : *loaded) {
        for (auto &r : lf.rules) {
            VerifyReport rep;
            try {
                rep = verify_rule(r, registry, cfg);
            } catch (const std::exception &e) {
                std::cerr << "error: rule " << r.rule.name << ": " << e.what() << "\n";
                return 2;
            }
            if (g.jsonOut) {
                reports.push_back(verify_report_to_json(r.rule.name, rep));
            } else {
                std::cout << r.rule.name << ": "
                          << (rep.counterexampleFound ? "COUNTEREXAMPLE" : "no counterexample found") << " ("
                          << rep.trialsRun << " trial(s), " << rep.elapsedSeconds << "s)\n";
                if (rep.counterexampleFound) {
                    std::cout << verify_report_to_json(r.rule.name, rep).dump(2) << "\n";
                    std::cout << "# replay: rulekit verify " << lf.path << " --trials " << cfg.trials
                              << " --seed " << cfg.seed << "\n";
                }
            }
            anyCex = anyCex || rep.counterexampleFound;
        }
    }
    if (g.jsonOut) {
        std::cout << json{{"reports", reports}, {"disclaimer", kDisclaimer}}.dump(2) << "\n";
    } else if (!g.quiet) {
        std::cout << kDisclaimer << "\n";
    }
    return anyCex ? 1 : 0;
}

int cmd_apply(const Global &g, const std::vector<std::string> &rulePaths, const std::string &planPath,
              bool fixpoint, int maxPasses, bool expectMatch) {
    CustomOpRegistry registry;
    int code = 0;
    auto loaded = load_all(rulePaths, registry, code);
    if (!loaded) return code;
    std::vector<TypedRule> rules;
    for (auto &lf : *loaded)
        for (auto &r : lf.rules) rules.push_back(r);
    LogicalPlanPtr plan;
    try {
        plan = plan_file_from_json(json::parse(read_file(planPath)));
    } catch (const std::exception &e) {
        return usage_error(std::string("plan file: ") + e.what());
    }
    ConstraintGuard guard = default_injective_guard;
    std::vector<TraceEntry> trace;
    LogicalPlanPtr result = plan;
    try {
        if (fixpoint) {
            auto fp = apply_rules_to_fixpoint(rules, plan, registry, maxPasses, &guard);
            result = fp.plan;
            trace = std::move(fp.trace);
            if (!fp.reachedFixpoint && !g.quiet)
                std::cerr << "warning: pass limit (" << maxPasses << ") reached before fixpoint\n";
        } else {
            for (auto &r : rules) {
                auto ar = apply_rule(r, plan, registry, &guard);
                if (ar) {
                    result = ar->plan;
                    trace.push_back(TraceEntry{r.rule.name, {}, std::move(ar->context)});
                    break;
                }
            }
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (g.jsonOut) {
        json jt = json::array();
        for (auto &t : trace) jt.push_back(trace_entry_to_json(t));
        std::cout << json{{"plan", plan_to_json(result)}, {"trace", jt}}.dump(2) << "\n";
    } else {
        std::cout << plan_file_to_json(result).dump(2) << "\n";
        for (auto &t : trace) std::cerr << json{{"rule", t.rule}, {"path", t.path}}.dump() << "\n";
    }
    if (expectMatch && trace.empty()) {
        std::cerr << "error: no rule matched (--expect-match)\n";
        return 1;
    }
    return 0;
}

int cmd_eval(const Global &g, const std::vector<std::string> &rulePaths, const std::string &planPath,
             const std::string &dbPath) {
    CustomOpRegistry registry;
    if (!rulePaths.empty()) {
        int code = 0;
        if (!load_all(rulePaths, registry, code)) return code;
    }
    try {
        LogicalPlanPtr plan = plan_file_from_json(json::parse(read_file(planPath)));
        Database db = dbPath.empty() ? Database{} : database_from_json(json::parse(read_file(dbPath)));
        Bag out = eval_plan(plan, db, registry);
        if (g.jsonOut) {
            std::cout << json{{"rows", bag_to_json(out)}}.dump(2) << "\n";
        } else {
            std::cout << bag_to_json(out).dump(2) << "\n";
        }
    } catch (const JsonFormatError &e) {
        return usage_error(e.what());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cmd_emit_optgen(const Global &g, const std::vector<std::string> &rulePaths, const std::string &outDir,
                    const std::string &opmapPath, int trials) {
    CustomOpRegistry registry;
    int code = 0;
    auto loaded = load_all(rulePaths, registry, code);
    if (!loaded) return code;
    OpMap opmap;
    try {
        opmap = parse_opmap(read_file(opmapPath));
    } catch (const std::exception &e) {
        return usage_error(std::string("opmap: ") + e.what());
    }
    std::error_code ec;
    fs::create_directories(outDir, ec);
    VerifyConfig cfg;
    cfg.trials = trials;
    cfg.seed = g.effective_seed();
    for (auto &lf : *loaded) {
        for (auto &r : lf.rules) {
            Provenance prov;
            prov.version = kVersion;
            prov.seed = cfg.seed;
            prov.trials = cfg.trials;
            try {
                auto rep = verify_rule(r, registry, cfg);
                prov.verdict = rep.counterexampleFound ? "counterexample" : "noCounterexampleFound";
            } catch (const std::exception &) {
                prov.verdict = "unverified";
            }
            std::string text;
            try {
                text = emit_optgen(r, registry, opmap, prov);
            } catch (const UnsupportedPatternForTarget &e) {
                std::cerr << "skipped: rule " << r.rule.name << ": " << e.what() << "\n";
                continue;
            } catch (const std::exception &e) {
                std::cerr << "error: rule " << r.rule.name << ": " << e.what() << "\n";
                return 1;
            }
            fs::path file = fs::path(outDir) / (r.rule.name + ".opt");
            std::ofstream out(file, std::ios::binary);
            out << text;
            if (!g.quiet) std::cout << file.string() << "\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"rulekit: verifiable query-rewrite-rule toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Global g;
    auto *seedOpt = app.add_option("--seed", g.seed, "random seed (overrides RULEKIT_SEED)");
    app.fallthrough();
    app.add_flag("--quiet", g.quiet, "suppress informational output");
    app.add_flag("--json", g.jsonOut, "machine-readable JSON output");

    std::vector<std::string> paths;
    std::string planPath, dbPath, outDir, opmapPath = "corpus/cockroach.opmap", onlyRule;
    bool fixpoint = false, expectMatch = false;
    int maxPasses = 10;
    VerifyConfig vcfg;

    auto *check = app.add_subcommand("check", "parse, validate, and typecheck rule files");
    check->add_option("files", paths, "rule files or directories")->required();

    auto *expandCmd = app.add_subcommand("expand", "print rules with custom operators expanded to core form");
    expandCmd->add_option("files", paths, "rule files or directories")->required();
    expandCmd->add_option("--rule", onlyRule, "expand only the named rule");

    auto *verify = app.add_subcommand("verify", "bounded equivalence check of every rule");
    verify->add_option("files", paths, "rule files or directories")->required();
    verify->add_option("--trials", vcfg.trials, "number of sampled instances per rule");
    verify->add_option("--max-domain", vcfg.maxDomain, "max abstract-domain size");
    verify->add_option("--max-rows", vcfg.maxRows, "max rows per sampled table");

    auto *apply = app.add_subcommand("apply", "apply rules to a concrete plan");
    apply->add_option("--rules", paths, "rule files or directories")->required();
    apply->add_option("--plan", planPath, "plan JSON file")->required();
    apply->add_flag("--fixpoint", fixpoint, "apply repeatedly until no rule fires");
    apply->add_option("--max-passes", maxPasses, "fixpoint pass limit");
    apply->add_flag("--expect-match", expectMatch, "exit 1 when no rule fires");

    auto *evalCmd = app.add_subcommand("eval", "evaluate a plan against a database");
    evalCmd->add_option("--plan", planPath, "plan JSON file")->required();
    evalCmd->add_option("--db", dbPath, "database JSON file");
    evalCmd->add_option("--rules", paths, "rule files (registers custom operator definitions)");

    auto *emit = app.add_subcommand("emit-optgen", "emit Optgen-style rules, one .opt file per rule");
    emit->add_option("files", paths, "rule files or directories")->required();
    emit->add_option("-o,--out", outDir, "output directory")->required();
    emit->add_option("--opmap", opmapPath, "operator-name mapping file");
    emit->add_option("--trials", vcfg.trials, "verification trials for the provenance header");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    g.seedSet = seedOpt->count() > 0;

    try {
        if (check->parsed()) return cmd_check(g, paths);
        if (expandCmd->parsed()) return cmd_expand(g, paths, onlyRule);
        if (verify->parsed()) return cmd_verify(g, paths, vcfg);
        if (apply->parsed()) return cmd_apply(g, paths, planPath, fixpoint, maxPasses, expectMatch);
        if (evalCmd->parsed()) return cmd_eval(g, paths, planPath, dbPath);
        if (emit->parsed()) return cmd_emit_optgen(g, paths, outDir, opmapPath, vcfg.trials);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
