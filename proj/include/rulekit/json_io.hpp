#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rulekit/engine.hpp"
#include "rulekit/evaluator.hpp"
#include "rulekit/verifier.hpp"

namespace rulekit {

using json = nlohmann::json;

struct JsonFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Values and schemas

inline json value_to_json(const Value &v) {
    if (is_null(v)) return nullptr;
    if (auto *i = std::get_if<std::int64_t>(&v)) return *i;
    if (auto *s = std::get_if<std::string>(&v)) return *s;
    return std::get<bool>(v);
}

inline Value value_from_json(const json &j) {
    if (j.is_null()) return kNull;
    if (j.is_boolean()) return Value{j.get<bool>()};
    if (j.is_number_integer()) return Value{j.get<std::int64_t>()};
    if (j.is_string()) return Value{j.get<std::string>()};
    throw JsonFormatError("value must be null, bool, integer, or string");
}

inline std::string value_type_name(ValueType t) {
    switch (t) {
        case ValueType::Int: return "Int";
        case ValueType::Str: return "Str";
        case ValueType::Bool: return "Bool";
    }
    return "Int";
}

inline ValueType value_type_from_name(const std::string &n) {
    if (n == "Int") return ValueType::Int;
    if (n == "Str") return ValueType::Str;
    if (n == "Bool") return ValueType::Bool;
    throw JsonFormatError("unknown value type '" + n + "'");
}

inline json schema_to_json(const Schema &s) {
    json out = json::array();
    for (auto &[name, type] : s.columns) out.push_back(json::array({name, value_type_name(type)}));
    return out;
}

inline Schema schema_from_json(const json &j) {
    if (!j.is_array()) throw JsonFormatError("schema must be an array of [name, type] pairs");
    Schema s;
    for (auto &col : j) {
        if (!col.is_array() || col.size() != 2) throw JsonFormatError("schema column must be [name, type]");
        s.columns.emplace_back(col[0].get<std::string>(), value_type_from_name(col[1].get<std::string>()));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Scalar expressions

inline json plan_to_json(const LogicalPlanPtr &p);
inline LogicalPlanPtr plan_from_json(const json &j);

namespace detail {

inline const std::map<std::string, CallOp> &call_op_names() {
    static const std::map<std::string, CallOp> ops{
        {"add", CallOp::Add}, {"sub", CallOp::Sub}, {"mul", CallOp::Mul}, {"eq", CallOp::Eq},
        {"neq", CallOp::Neq}, {"lt", CallOp::Lt}, {"leq", CallOp::Leq}, {"gt", CallOp::Gt},
        {"geq", CallOp::Geq}, {"and", CallOp::And}, {"or", CallOp::Or}, {"not", CallOp::Not},
        {"isNull", CallOp::IsNull}, {"isNotNull", CallOp::IsNotNull}};
    return ops;
}

inline std::string call_op_name(CallOp op) {
    for (auto &[name, o] : call_op_names())
        if (o == op) return name;
    throw JsonFormatError("unencodable call op");
}

inline std::string side_name(Side s) {
    switch (s) {
        case Side::Left: return "left";
        case Side::Right: return "right";
        case Side::Only: return "only";
    }
    return "only";
}

inline Side side_from_name(const std::string &n) {
    if (n == "left") return Side::Left;
    if (n == "right") return Side::Right;
    if (n == "only") return Side::Only;
    throw JsonFormatError("unknown column side '" + n + "'");
}

} // namespace detail

inline json expr_to_json(const ScalarExprPtr &e) {
    if (auto *c = std::get_if<ColRef>(&e->node))
        return json{{"col", {{"side", detail::side_name(c->side)}, {"index", c->index}}}};
    if (auto *l = std::get_if<Literal>(&e->node))
        return json{{"lit", {{"type", value_type_name(l->type)}, {"value", value_to_json(l->value)}}}};
    if (auto *c = std::get_if<Call>(&e->node)) {
        json args = json::array();
        for (auto &a : c->args) args.push_back(expr_to_json(a));
        if (c->op == CallOp::Uninterp)
            return json{{"ucall",
                         {{"symbol", c->symbol}, {"result", value_type_name(c->result_type)}, {"args", args}}}};
        return json{{"call", {{"fn", detail::call_op_name(c->op)}, {"args", args}}}};
    }
    auto &x = std::get<ExistsSubplan>(e->node);
    return json{{"exists", plan_to_json(x.subplan)}};
}

inline ScalarExprPtr expr_from_json(const json &j) {
    try {
        if (!j.is_object() || j.size() != 1) throw JsonFormatError("expression must be a single-key object");
        if (j.contains("col")) {
            auto &c = j.at("col");
            return col(detail::side_from_name(c.at("side").get<std::string>()), c.at("index").get<int>());
        }
        if (j.contains("lit")) {
            auto &l = j.at("lit");
            ValueType t = value_type_from_name(l.at("type").get<std::string>());
            Value v = value_from_json(l.at("value"));
            return std::make_shared<ScalarExpr>(ScalarExpr{Literal{t, std::move(v)}});
        }
        if (j.contains("call")) {
            auto &c = j.at("call");
            auto it = detail::call_op_names().find(c.at("fn").get<std::string>());
            if (it == detail::call_op_names().end())
                throw JsonFormatError("unknown call fn '" + c.at("fn").get<std::string>() + "'");
            std::vector<ScalarExprPtr> args;
            for (auto &a : c.at("args")) args.push_back(expr_from_json(a));
            return call(it->second, std::move(args));
        }
        if (j.contains("ucall")) {
            auto &c = j.at("ucall");
            std::vector<ScalarExprPtr> args;
            for (auto &a : c.at("args")) args.push_back(expr_from_json(a));
            return ucall(c.at("symbol").get<std::string>(),
                         value_type_from_name(c.at("result").get<std::string>()), std::move(args));
        }
        if (j.contains("exists")) return exists(plan_from_json(j.at("exists")));
        throw JsonFormatError("unknown expression key '" + j.begin().key() + "'");
    } catch (const JsonFormatError &) {
        throw;
    } catch (const json::exception &e) {
        throw JsonFormatError(e.what());
    }
}

inline json agg_to_json(const AggCall &a) {
    json args = json::array();
    for (auto &x : a.args) args.push_back(expr_to_json(x));
    switch (a.func) {
        case AggFunc::Sum: return json{{"agg", "sum"}, {"args", args}};
        case AggFunc::Count: return json{{"agg", "count"}, {"args", args}};
        case AggFunc::Min: return json{{"agg", "min"}, {"args", args}};
        case AggFunc::Max: return json{{"agg", "max"}, {"args", args}};
        case AggFunc::Uninterp:
            return json{{"agg", "uninterp"},
                        {"symbol", a.symbol},
                        {"result", value_type_name(a.result_type)},
                        {"args", args}};
    }
    throw JsonFormatError("unencodable aggregate");
}

inline AggCall agg_from_json(const json &j) {
    std::string f = j.at("agg").get<std::string>();
    std::vector<ScalarExprPtr> args;
    for (auto &a : j.at("args")) args.push_back(expr_from_json(a));
    if (f == "sum") return AggCall{AggFunc::Sum, "", ValueType::Int, std::move(args)};
    if (f == "count") return AggCall{AggFunc::Count, "", ValueType::Int, std::move(args)};
    if (f == "min") return AggCall{AggFunc::Min, "", ValueType::Int, std::move(args)};
    if (f == "max") return AggCall{AggFunc::Max, "", ValueType::Int, std::move(args)};
    if (f == "uninterp")
        return AggCall{AggFunc::Uninterp, j.at("symbol").get<std::string>(),
                       value_type_from_name(j.at("result").get<std::string>()), std::move(args)};
    throw JsonFormatError("unknown aggregate '" + f + "'");
}

// ---------------------------------------------------------------------------
// Plans

inline json plan_to_json(const LogicalPlanPtr &p) {
    if (auto *s = std::get_if<ScanNode>(&p->node))
        return json{{"op", "scan"}, {"table", s->table}, {"schema", schema_to_json(s->schema)}};
    if (auto *v = std::get_if<ValuesNode>(&p->node)) {
        json rows = json::array();
        for (auto &r : v->rows) {
            json row = json::array();
            for (auto &x : r) row.push_back(value_to_json(x));
            rows.push_back(std::move(row));
        }
        return json{{"op", "values"}, {"schema", schema_to_json(v->schema)}, {"rows", rows}};
    }
    if (auto *e = std::get_if<EmptyNode>(&p->node))
        return json{{"op", "empty"}, {"schema", schema_to_json(e->schema)}};
    if (auto *f = std::get_if<FilterNode>(&p->node))
        return json{{"op", "filter"}, {"pred", expr_to_json(f->predicate)}, {"input", plan_to_json(f->input)}};
    if (auto *pr = std::get_if<ProjectNode>(&p->node)) {
        json items = json::array();
        for (auto &[e, name] : pr->items) items.push_back(json::array({expr_to_json(e), name}));
        return json{{"op", "project"}, {"items", items}, {"input", plan_to_json(pr->input)}};
    }
    if (auto *jn = std::get_if<JoinNode>(&p->node))
        return json{{"op", "join"},
                    {"pred", expr_to_json(jn->predicate)},
                    {"left", plan_to_json(jn->left)},
                    {"right", plan_to_json(jn->right)}};
    if (auto *u = std::get_if<UnionNode>(&p->node))
        return json{{"op", "union"}, {"left", plan_to_json(u->left)}, {"right", plan_to_json(u->right)}};
    if (auto *d = std::get_if<DistinctNode>(&p->node))
        return json{{"op", "distinct"}, {"input", plan_to_json(d->input)}};
    if (auto *a = std::get_if<AggregateNode>(&p->node)) {
        json keys = json::array(), aggs = json::array();
        for (auto &k : a->group_keys) keys.push_back(expr_to_json(k));
        for (auto &g : a->aggs) aggs.push_back(agg_to_json(g));
        return json{{"op", "aggregate"}, {"keys", keys}, {"aggs", aggs}, {"input", plan_to_json(a->input)}};
    }
    auto &c = std::get<CustomNode>(p->node);
    json args = json::array();
    for (auto &arg : c.args) {
        if (auto *pp = std::get_if<LogicalPlanPtr>(&arg)) {
            args.push_back(json{{"plan", plan_to_json(*pp)}});
        } else if (auto *es = std::get_if<std::vector<ScalarExprPtr>>(&arg)) {
            json xs = json::array();
            for (auto &e : *es) xs.push_back(expr_to_json(e));
            args.push_back(json{{"exprs", xs}});
        } else {
            json gs = json::array();
            for (auto &g : std::get<std::vector<AggCall>>(arg)) gs.push_back(agg_to_json(g));
            args.push_back(json{{"aggs", gs}});
        }
    }
    return json{{"op", "custom"}, {"name", c.op_name}, {"args", args}};
}

inline LogicalPlanPtr plan_from_json(const json &j) {
    try {
        if (!j.is_object() || !j.contains("op")) throw JsonFormatError("plan node must be an object with \"op\"");
        std::string op = j.at("op").get<std::string>();
        if (op == "scan") return scan(j.at("table").get<std::string>(), schema_from_json(j.at("schema")));
        if (op == "values") {
            Schema s = schema_from_json(j.at("schema"));
            std::vector<Row> rows;
            for (auto &r : j.at("rows")) {
                Row row;
                for (auto &x : r) row.push_back(value_from_json(x));
                if (row.size() != s.arity()) throw JsonFormatError("values row width does not match schema");
                rows.push_back(std::move(row));
            }
            return values(std::move(s), std::move(rows));
        }
        if (op == "empty") return empty(schema_from_json(j.at("schema")));
        if (op == "filter") return filter(expr_from_json(j.at("pred")), plan_from_json(j.at("input")));
        if (op == "project") {
            std::vector<std::pair<ScalarExprPtr, std::string>> items;
            for (auto &it : j.at("items")) {
                if (!it.is_array() || it.size() != 2) throw JsonFormatError("project item must be [expr, name]");
                items.emplace_back(expr_from_json(it[0]), it[1].get<std::string>());
            }
            return project(std::move(items), plan_from_json(j.at("input")));
        }
        if (op == "join")
            return join(expr_from_json(j.at("pred")), plan_from_json(j.at("left")), plan_from_json(j.at("right")));
        if (op == "union") return union_all(plan_from_json(j.at("left")), plan_from_json(j.at("right")));
        if (op == "distinct") return distinct(plan_from_json(j.at("input")));
        if (op == "aggregate") {
            std::vector<ScalarExprPtr> keys;
            std::vector<AggCall> aggs;
            for (auto &k : j.at("keys")) keys.push_back(expr_from_json(k));
            for (auto &g : j.at("aggs")) aggs.push_back(agg_from_json(g));
            return aggregate(std::move(keys), std::move(aggs), plan_from_json(j.at("input")));
        }
        if (op == "custom") {
            std::vector<CustomArg> args;
            for (auto &arg : j.at("args")) {
                if (arg.contains("plan")) {
                    args.emplace_back(plan_from_json(arg.at("plan")));
                } else if (arg.contains("exprs")) {
                    std::vector<ScalarExprPtr> es;
                    for (auto &e : arg.at("exprs")) es.push_back(expr_from_json(e));
                    args.emplace_back(std::move(es));
                } else if (arg.contains("aggs")) {
                    std::vector<AggCall> gs;
                    for (auto &g : arg.at("aggs")) gs.push_back(agg_from_json(g));
                    args.emplace_back(std::move(gs));
                } else {
                    throw JsonFormatError("custom arg must contain plan, exprs, or aggs");
                }
            }
            return custom(j.at("name").get<std::string>(), std::move(args));
        }
        throw JsonFormatError("unknown plan op '" + op + "'");
    } catch (const JsonFormatError &) {
        throw;
    } catch (const json::exception &e) {
        throw JsonFormatError(e.what());
    }
}

// A plan file is {"plan": <node tree>}.
inline json plan_file_to_json(const LogicalPlanPtr &p) { return json{{"plan", plan_to_json(p)}}; }
inline LogicalPlanPtr plan_file_from_json(const json &j) {
    if (!j.is_object() || !j.contains("plan")) throw JsonFormatError("plan file must contain a \"plan\" key");
    return plan_from_json(j.at("plan"));
}

// ---------------------------------------------------------------------------
// Databases

inline json database_to_json(const Database &db) {
    json tables = json::object();
    for (auto &[name, table] : db.tables) {
        json rows = json::array();
        for (auto &[row, count] : table.rows.entries())
            for (long i = 0; i < count; ++i) {
                json r = json::array();
                for (auto &v : row) r.push_back(value_to_json(v));
                rows.push_back(std::move(r));
            }
        tables[name] = json{{"schema", schema_to_json(table.schema)}, {"rows", rows}};
    }
    return json{{"tables", tables}};
}

inline Database database_from_json(const json &j) {
    try {
        if (!j.is_object() || !j.contains("tables")) throw JsonFormatError("database file must contain \"tables\"");
        Database db;
        for (auto &[name, tj] : j.at("tables").items()) {
            Table t;
            t.schema = schema_from_json(tj.at("schema"));
            for (auto &rj : tj.at("rows")) {
                Row row;
                for (auto &v : rj) row.push_back(value_from_json(v));
                if (row.size() != t.schema.arity())
                    throw JsonFormatError("row width does not match schema of table '" + name + "'");
                t.rows.add(std::move(row));
            }
            db.tables.emplace(name, std::move(t));
        }
        return db;
    } catch (const JsonFormatError &) {
        throw;
    } catch (const json::exception &e) {
        throw JsonFormatError(e.what());
    }
}

inline json bag_to_json(const Bag &b) {
    json rows = json::array();
    for (auto &[row, count] : b.entries()) {
        json r = json::array();
        for (auto &v : row) r.push_back(value_to_json(v));
        rows.push_back(json{{"row", r}, {"count", count}});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Human-readable rendering of match bindings (used in traces and reports)

namespace detail {

inline std::string render_expr_binding(const ScalarExprPtr &e, const std::vector<std::string> &slots);

inline std::string render_call_binding(const Call &c, const std::vector<std::string> &slots) {
    auto bin = [&](const char *op) {
        return render_expr_binding(c.args[0], slots) + " " + op + " " + render_expr_binding(c.args[1], slots);
    };
    switch (c.op) {
        case CallOp::Add: return bin("+");
        case CallOp::Sub: return bin("-");
        case CallOp::Mul: return bin("*");
        case CallOp::Eq: return bin("=");
        case CallOp::Neq: return bin("!=");
        case CallOp::Lt: return bin("<");
        case CallOp::Leq: return bin("<=");
        case CallOp::Gt: return bin(">");
        case CallOp::Geq: return bin(">=");
        case CallOp::And: return bin("AND");
        case CallOp::Or: return bin("OR");
        case CallOp::Not: return "NOT " + render_expr_binding(c.args[0], slots);
        case CallOp::IsNull: return render_expr_binding(c.args[0], slots) + " IS NULL";
        case CallOp::IsNotNull: return render_expr_binding(c.args[0], slots) + " IS NOT NULL";
        case CallOp::Uninterp: {
            std::string s = c.symbol + "(";
            for (size_t i = 0; i < c.args.size(); ++i)
                s += (i ? ", " : "") + render_expr_binding(c.args[i], slots);
            return s + ")";
        }
    }
    return "?";
}

inline std::string render_expr_binding(const ScalarExprPtr &e, const std::vector<std::string> &slots) {
    if (auto *c = std::get_if<ColRef>(&e->node)) {
        if (c->side == Side::Only && c->index >= 0 && static_cast<size_t>(c->index) < slots.size())
            return slots[c->index];
        return detail::side_name(c->side) + "." + std::to_string(c->index);
    }
    if (auto *l = std::get_if<Literal>(&e->node)) {
        if (is_null(l->value)) return "NULL";
        if (auto *i = std::get_if<std::int64_t>(&l->value)) return std::to_string(*i);
        if (auto *s = std::get_if<std::string>(&l->value)) return "'" + *s + "'";
        return std::get<bool>(l->value) ? "TRUE" : "FALSE";
    }
    if (auto *c = std::get_if<Call>(&e->node)) return render_call_binding(*c, slots);
    return "EXISTS(...)";
}

inline std::string render_agg_binding(const AggCall &a, const std::vector<std::string> &slots) {
    std::string name;
    switch (a.func) {
        case AggFunc::Sum: name = "Sum"; break;
        case AggFunc::Count: name = "Count"; break;
        case AggFunc::Min: name = "Min"; break;
        case AggFunc::Max: name = "Max"; break;
        case AggFunc::Uninterp: name = a.symbol; break;
    }
    std::string s = name + "(";
    for (size_t i = 0; i < a.args.size(); ++i) s += (i ? ", " : "") + render_expr_binding(a.args[i], slots);
    return s + ")";
}

inline std::string render_plan_binding(const LogicalPlanPtr &p) {
    if (auto *s = std::get_if<ScanNode>(&p->node)) return "Scan(" + s->table + ")";
    if (std::holds_alternative<ValuesNode>(p->node)) return "Values(...)";
    if (std::holds_alternative<EmptyNode>(p->node)) return "Empty";
    if (auto *f = std::get_if<FilterNode>(&p->node)) return "Filter(" + render_plan_binding(f->input) + ")";
    if (auto *pr = std::get_if<ProjectNode>(&p->node)) return "Project(" + render_plan_binding(pr->input) + ")";
    if (auto *j = std::get_if<JoinNode>(&p->node))
        return "Join(" + render_plan_binding(j->left) + ", " + render_plan_binding(j->right) + ")";
    if (auto *u = std::get_if<UnionNode>(&p->node))
        return "Union(" + render_plan_binding(u->left) + ", " + render_plan_binding(u->right) + ")";
    if (auto *d = std::get_if<DistinctNode>(&p->node)) return "Distinct(" + render_plan_binding(d->input) + ")";
    if (auto *a = std::get_if<AggregateNode>(&p->node))
        return "Aggregate(" + render_plan_binding(a->input) + ")";
    auto &c = std::get<CustomNode>(p->node);
    std::string out = c.op_name + "(";
    bool first = true;
    for (auto &arg : c.args)
        if (auto *pp = std::get_if<LogicalPlanPtr>(&arg)) {
            if (!first) out += ", ";
            out += render_plan_binding(*pp);
            first = false;
        }
    return out + ")";
}

} // namespace detail

/// JSON view of a match context: every symbol rendered as the concrete
/// expression/plan it was bound to, using "binder.column" display names.
inline json bindings_to_json(const MatchContext &ctx) {
    json out = json::object();
    for (auto &[name, fb] : ctx.funcs) {
        std::vector<std::string> parts;
        if (auto *es = std::get_if<std::vector<ScalarExprPtr>>(&fb.body)) {
            for (auto &e : *es) parts.push_back(detail::render_expr_binding(e, fb.slot_names));
        } else {
            for (auto &a : std::get<std::vector<AggCall>>(fb.body))
                parts.push_back(detail::render_agg_binding(a, fb.slot_names));
        }
        std::string s;
        for (size_t i = 0; i < parts.size(); ++i) s += (i ? ", " : "") + parts[i];
        out[name] = parts.size() == 1 ? parts[0] : "(" + s + ")";
    }
    for (auto &[name, plan] : ctx.plans) out[name] = detail::render_plan_binding(plan);
    return out;
}

inline json trace_entry_to_json(const TraceEntry &t) {
    return json{{"rule", t.rule}, {"path", t.path}, {"bindings", bindings_to_json(t.context)}};
}

// ---------------------------------------------------------------------------
// Verifier instances and reports (replayable counterexamples)

inline json instance_to_json(const Instance &inst) {
    json domains = json::object(), funcs = json::object(), aggs = json::object(), plans = json::object();
    for (auto &[name, dom] : inst.domains) {
        json d = json::array();
        for (auto &v : dom) d.push_back(value_to_json(v));
        domains[name] = std::move(d);
    }
    for (auto &[name, table] : inst.funcTables) {
        json entries = json::array();
        for (auto &[in, out] : table) {
            json args = json::array();
            for (auto &v : in) args.push_back(value_to_json(v));
            entries.push_back(json{{"args", args}, {"result", value_to_json(out)}});
        }
        funcs[name] = std::move(entries);
    }
    for (auto &[name, spec] : inst.aggSeeds) {
        json cod = json::array();
        for (auto &v : spec.codomain) cod.push_back(value_to_json(v));
        aggs[name] = json{{"seed", spec.seed}, {"codomain", cod}};
    }
    for (auto &[name, bag] : inst.planTables) {
        json rows = json::array();
        for (auto &[row, count] : bag.entries())
            for (long i = 0; i < count; ++i) {
                json r = json::array();
                for (auto &v : row) r.push_back(value_to_json(v));
                rows.push_back(std::move(r));
            }
        plans[name] = std::move(rows);
    }
    return json{{"seed", inst.seed},
                {"domains", domains},
                {"funcs", funcs},
                {"aggs", aggs},
                {"tables", plans}};
}

inline Instance instance_from_json(const json &j) {
    try {
        Instance inst;
        inst.seed = j.at("seed").get<std::uint64_t>();
        for (auto &[name, d] : j.at("domains").items()) {
            std::vector<Value> dom;
            for (auto &v : d) dom.push_back(value_from_json(v));
            inst.domains.emplace(name, std::move(dom));
        }
        for (auto &[name, entries] : j.at("funcs").items()) {
            auto &table = inst.funcTables[name];
            for (auto &e : entries) {
                std::vector<Value> in;
                for (auto &v : e.at("args")) in.push_back(value_from_json(v));
                table[std::move(in)] = value_from_json(e.at("result"));
            }
        }
        for (auto &[name, a] : j.at("aggs").items()) {
            AggSpec spec;
            spec.seed = a.at("seed").get<std::uint64_t>();
            for (auto &v : a.at("codomain")) spec.codomain.push_back(value_from_json(v));
            inst.aggSeeds.emplace(name, std::move(spec));
        }
        for (auto &[name, rows] : j.at("tables").items()) {
            Bag bag;
            for (auto &r : rows) {
                Row row;
                for (auto &v : r) row.push_back(value_from_json(v));
                bag.add(std::move(row));
            }
            inst.planTables.emplace(name, std::move(bag));
        }
        return inst;
    } catch (const JsonFormatError &) {
        throw;
    } catch (const json::exception &e) {
        throw JsonFormatError(e.what());
    }
}

inline json verify_report_to_json(const std::string &ruleName, const VerifyReport &r) {
    json out{{"rule", ruleName},
             {"verdict", r.counterexampleFound ? "counterexample" : "noCounterexampleFound"},
             {"trialsRun", r.trialsRun},
             {"elapsedSeconds", r.elapsedSeconds}};
    if (r.counterexampleFound) {
        out["instance"] = instance_to_json(*r.instance);
        out["bagFrom"] = bag_to_json(r.bagFrom);
        out["bagTo"] = bag_to_json(r.bagTo);
    }
    return out;
}

} // namespace rulekit
