#include "vws/knowledge.hpp"

#include "vws/csv.hpp"
#include "vws/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <tuple>
#include <functional>

namespace vws {

const StageTime& PhenologyCalendar::at(const std::string& name) const {
    auto it = stages.find(name);
    if (it == stages.end()) throw ValidationError("plot '" + plot_id + "': stage " + name + " has no date");
    return it->second;
}

std::optional<StageTime> PhenologyCalendar::find(const std::string& name) const {
    auto it = stages.find(name);
    if (it == stages.end()) return std::nullopt;
    return it->second;
}

} // namespace vws

namespace vws::knowledge {

using json = nlohmann::json;

namespace {

const std::set<std::string> kPrimary = {"Variable", "Condition", "Constraint", "ShiftStage"};

PrimaryKind kind_from_name(const std::string& n) {
    if (n == "Variable") return PrimaryKind::Variable;
    if (n == "Condition") return PrimaryKind::Condition;
    if (n == "Constraint") return PrimaryKind::Constraint;
    return PrimaryKind::ShiftStage;
}

Operand parse_operand(const json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw ValidationError(where + ": operand must be a number or a concept name");
}

std::optional<std::string> opt_string(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
}

RelationType parse_relation_type(const std::string& t) {
    if (t == "subsumption") return RelationType::subsumption;
    if (t == "isBefore") return RelationType::isBefore;
    if (t == "hasCondition") return RelationType::hasCondition;
    if (t == "hasConstraint") return RelationType::hasConstraint;
    throw ValidationError("unknown relation type '" + t + "'");
}

double operand_value(const Operand& o, const Bindings& b) {
    if (const double* v = std::get_if<double>(&o)) return *v;
    const auto& name = std::get<std::string>(o);
    auto it = b.find(name);
    if (it == b.end()) throw ValidationError("unbound variable '" + name + "'");
    return it->second;
}

} // namespace

CompareOp parse_op(const std::string& t) {
    if (t == "<") return CompareOp::lt;
    if (t == "<=" || t == "≤") return CompareOp::le;
    if (t == "=" || t == "==") return CompareOp::eq;
    if (t == ">=" || t == "≥") return CompareOp::ge;
    if (t == ">") return CompareOp::gt;
    throw ValidationError("unknown comparison operator '" + t + "'");
}

std::string to_string(CompareOp op) {
    switch (op) {
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::eq: return "=";
    case CompareOp::ge: return ">=";
    case CompareOp::gt: return ">";
    }
    return "?";
}

bool compare(double a, CompareOp op, double b) {
    switch (op) {
    case CompareOp::lt: return a < b;
    case CompareOp::le: return a <= b;
    case CompareOp::eq: return a == b;
    case CompareOp::ge: return a >= b;
    case CompareOp::gt: return a > b;
    }
    return false;
}

bool is_known_unit(const std::string& u) {
    static const std::set<std::string> units = {"mm",  "kPa", "°C",  "degC", "GDD",      "g/L",   "g",
                                                "mm/day", "MPa", "dimensionless", "W/m2", "km/h", "%",
                                                "mg/L", "g/h", "gH2SO4/L", "day", "mm/h"};
    return units.count(u) != 0;
}

const Concept& KnowledgeBase::concept_named(const std::string& name) const {
    auto it = concepts_.find(name);
    if (it == concepts_.end()) throw ValidationError("undeclared concept '" + name + "'");
    return it->second;
}

const std::set<std::string>& KnowledgeBase::direct_subconcepts(const std::string& name) const {
    concept_named(name);
    return down_.at(name);
}

bool KnowledgeBase::subsumed_by(const std::string& sub, const std::string& super) const {
    concept_named(sub);
    concept_named(super);
    if (sub == super) return true;
    std::vector<std::string> stack{sub};
    std::set<std::string> seen;
    while (!stack.empty()) {
        std::string c = stack.back();
        stack.pop_back();
        for (const auto& p : concepts_.at(c).parents) {
            if (p == super) return true;
            if (seen.insert(p).second) stack.push_back(p);
        }
    }
    return false;
}

std::set<PrimaryKind> KnowledgeBase::kinds_of(const std::string& name) const {
    std::set<PrimaryKind> out;
    for (const auto& p : kPrimary)
        if (declares(p) && subsumed_by(name, p)) out.insert(kind_from_name(p));
    return out;
}

std::vector<std::string> KnowledgeBase::conditions_on(const std::string& subject) const {
    std::vector<std::string> out;
    for (const auto& r : relations_)
        if (r.type == RelationType::hasCondition && r.from == subject) out.push_back(r.to);
    return out;
}

std::vector<std::string> KnowledgeBase::constraints_on(const std::string& subject) const {
    std::vector<std::string> out;
    for (const auto& r : relations_)
        if (r.type == RelationType::hasConstraint && r.from == subject) out.push_back(r.to);
    return out;
}

std::optional<ShiftStageRule> KnowledgeBase::shift_rule_for(const std::string& target, const std::string& variety) const {
    std::optional<ShiftStageRule> generic;
    for (const auto& r : shift_rules_) {
        if (r.target_stage != target) continue;
        if (r.variety && *r.variety == variety) return r;
        if (!r.variety && !generic) generic = r;
    }
    return generic;
}

std::optional<double> KnowledgeBase::lwp_stress_level(const std::string& region, const std::string& variety) const {
    int best = -1;
    std::optional<double> value = levels_.lwp_stress_mpa;
    for (const auto& o : levels_.lwp_overrides) {
        if (o.region && *o.region != region) continue;
        if (o.variety && *o.variety != variety) continue;
        int specificity = (o.region ? 1 : 0) + (o.variety ? 2 : 0);
        if (specificity > best) {
            best = specificity;
            value = o.value;
        }
    }
    return value;
}

std::optional<double> KnowledgeBase::maturity_threshold(const std::string& variety) const {
    auto it = levels_.maturity_ratio.find(variety);
    if (it == levels_.maturity_ratio.end()) return std::nullopt;
    return it->second;
}

KnowledgeBase load_kb(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("knowledge file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("knowledge file must be a JSON object");

    KnowledgeBase kb;
    try {
        for (const auto& c : doc.value("concepts", json::array())) {
            Concept k;
            k.name = c.at("name").get<std::string>();
            if (k.name.empty() || k.name == "t") throw ValidationError("invalid concept name '" + k.name + "'");
            if (c.contains("parents")) k.parents = c["parents"].get<std::vector<std::string>>();
            k.unit = opt_string(c, "unit");
            k.date = opt_string(c, "date");
            if (c.contains("default")) k.default_value = c["default"].get<double>();
            if (k.unit && !is_known_unit(*k.unit))
                throw ValidationError("concept '" + k.name + "': unknown unit '" + *k.unit + "'");
            if (c.contains("condition")) {
                const auto& j = c["condition"];
                k.condition = Condition{parse_op(j.at("operator").get<std::string>()),
                                        parse_operand(j.at("left"), k.name), parse_operand(j.at("right"), k.name)};
            }
            if (c.contains("constraint")) {
                const auto& j = c["constraint"];
                Constraint cs;
                cs.variable = j.at("variable").get<std::string>();
                cs.op = parse_op(j.at("operator").get<std::string>());
                cs.operand = parse_operand(j.at("operand"), k.name);
                cs.absolute = j.value("absolute", false);
                if (j.contains("upper_operator")) {
                    cs.upper_op = parse_op(j["upper_operator"].get<std::string>());
                    cs.upper_operand = parse_operand(j.at("upper_operand"), k.name);
                    const double* lo = std::get_if<double>(&cs.operand);
                    const double* hi = std::get_if<double>(&*cs.upper_operand);
                    if (lo && hi && *lo > *hi)
                        throw ValidationError("restriction '" + k.name + "': lower bound exceeds upper bound");
                }
                k.constraint = cs;
            }
            if (!kb.concepts_.emplace(k.name, k).second)
                throw ValidationError("concept '" + k.name + "' declared twice");
        }

        for (const auto& r : doc.value("relations", json::array())) {
            Relation rel{parse_relation_type(r.at("type").get<std::string>()), r.at("from").get<std::string>(),
                         r.at("to").get<std::string>()};
            kb.relations_.push_back(rel);
        }
        for (const auto& s : doc.value("shift_rules", json::array())) {
            ShiftStageRule rule;
            rule.name = s.value("name", std::string{});
            rule.source_stage = s.at("source").get<std::string>();
            rule.target_stage = s.at("target").get<std::string>();
            if (s.contains("offset_gdd")) rule.offset_k = s["offset_gdd"].get<double>();
            rule.variety = opt_string(s, "variety");
            if (rule.offset_k && *rule.offset_k < 0.0)
                throw ValidationError("shift rule '" + rule.name + "': negative offset");
            kb.shift_rules_.push_back(rule);
        }
        if (doc.contains("levels")) {
            const auto& lv = doc["levels"];
            if (lv.contains("lwp_stress_mpa")) {
                const auto& l = lv["lwp_stress_mpa"];
                if (l.contains("default")) kb.levels_.lwp_stress_mpa = l["default"].get<double>();
                for (const auto& o : l.value("overrides", json::array()))
                    kb.levels_.lwp_overrides.push_back({opt_string(o, "region"), opt_string(o, "variety"),
                                                        o.at("value").get<double>()});
            }
            if (lv.contains("maturity_ratio"))
                for (const auto& [variety, v] : lv["maturity_ratio"].items())
                    kb.levels_.maturity_ratio[variety] = v.get<double>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed knowledge file: ") + e.what());
    }

    // Subsumption relations are folded into the parent lists.
    for (const auto& r : kb.relations_) {
        if (r.type != RelationType::subsumption) continue;
        auto it = kb.concepts_.find(r.from);
        if (it == kb.concepts_.end()) throw ValidationError("relation references unknown concept '" + r.from + "'");
        if (std::find(it->second.parents.begin(), it->second.parents.end(), r.to) == it->second.parents.end())
            it->second.parents.push_back(r.to);
    }

    auto require_concept = [&](const std::string& n, const std::string& where) {
        if (!kb.declares(n)) throw ValidationError(where + " references unknown concept '" + n + "'");
    };
    for (const auto& [name, c] : kb.concepts_)
        for (const auto& p : c.parents) require_concept(p, "concept '" + name + "'");
    for (const auto& r : kb.relations_) {
        require_concept(r.from, "relation");
        require_concept(r.to, "relation");
    }
    for (const auto& s : kb.shift_rules_) {
        require_concept(s.source_stage, "shift rule '" + s.name + "'");
        require_concept(s.target_stage, "shift rule '" + s.name + "'");
    }
    auto check_operand = [&](const Operand& o, const std::string& owner) {
        if (const auto* n = std::get_if<std::string>(&o); n && *n != "t") require_concept(*n, "concept '" + owner + "'");
    };
    for (const auto& [name, c] : kb.concepts_) {
        if (c.condition) {
            check_operand(c.condition->left, name);
            check_operand(c.condition->right, name);
        }
        if (c.constraint) {
            if (c.constraint->variable != "t") require_concept(c.constraint->variable, "concept '" + name + "'");
            check_operand(c.constraint->operand, name);
            if (c.constraint->upper_operand) check_operand(*c.constraint->upper_operand, name);
        }
    }

    // Acyclicity of ≼, reporting the first cycle found in name order.
    std::map<std::string, int> state; // 0 unvisited, 1 on stack, 2 done
    std::vector<std::string> path;
    std::function<void(const std::string&)> visit = [&](const std::string& n) {
        state[n] = 1;
        path.push_back(n);
        for (const auto& p : kb.concepts_.at(n).parents) {
            if (state[p] == 1) {
                auto start = std::find(path.begin(), path.end(), p);
                std::string msg = "subsumption cycle: ";
                for (auto it = start; it != path.end(); ++it) msg += *it + " ≼ ";
                msg += p;
                throw ValidationError(msg);
            }
            if (state[p] == 0) visit(p);
        }
        path.pop_back();
        state[n] = 2;
    };
    for (const auto& [name, c] : kb.concepts_)
        if (state[name] == 0) visit(name);

    for (const auto& [name, c] : kb.concepts_) {
        if (c.parents.empty() && !kPrimary.count(name))
            throw ValidationError("concept '" + name + "' is not subsumed by any primary concept");
        kb.down_[name];
        for (const auto& p : c.parents) kb.down_[p].insert(name);
    }
    return kb;
}

KnowledgeBase load_kb_file(const std::string& path) { return load_kb(csv::read_text(path)); }

std::set<std::string> subconcepts(const KnowledgeBase& kb, const std::string& c) {
    kb.concept_named(c);
    std::set<std::string> out{c};
    std::vector<std::string> stack{c};
    while (!stack.empty()) {
        std::string n = stack.back();
        stack.pop_back();
        for (const auto& sub : kb.direct_subconcepts(n))
            if (out.insert(sub).second) stack.push_back(sub);
    }
    return out;
}

std::vector<OrderFinding> check_temporal_order(const KnowledgeBase& kb, const PhenologyCalendar& calendar) {
    std::vector<OrderFinding> out;
    for (const auto& r : kb.relations()) {
        if (r.type != RelationType::isBefore) continue;
        auto a = calendar.find(r.from);
        auto b = calendar.find(r.to);
        if (!a || !b)
            out.push_back({r.from, r.to, OrderStatus::unverifiable});
        else if (!(a->day < b->day))
            out.push_back({r.from, r.to, OrderStatus::violated});
    }
    std::sort(out.begin(), out.end(), [](const OrderFinding& x, const OrderFinding& y) {
        return std::tie(x.before, x.after, x.status) < std::tie(y.before, y.after, y.status);
    });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const OrderFinding& x, const OrderFinding& y) {
                              return x.before == y.before && x.after == y.after && x.status == y.status;
                          }),
              out.end());
    return out;
}

PhenologyCalendar apply_shift(const ShiftStageRule& rule, const PhenologyCalendar& calendar,
                              std::span<const meteo::DailyMeteoRecord> dailies) {
    if (!rule.offset_k) throw ConfigError("shift rule '" + rule.name + "' has no offset and no default was supplied");
    if (*rule.offset_k < 0.0) throw ValidationError("shift rule '" + rule.name + "': negative offset");
    const StageTime& src = calendar.at(rule.source_stage);
    const double goal = src.gdd + *rule.offset_k;
    for (const auto& d : dailies) {
        if (d.date.days() < src.date().days()) continue;
        if (d.gdd_cum >= goal) {
            PhenologyCalendar out = calendar;
            // A zero shift keeps the source instant itself.
            out.stages[rule.target_stage] =
                d.date == src.date() ? src : StageTime{static_cast<double>(d.date.days()), d.gdd_cum};
            return out;
        }
    }
    throw ValidationError("thermal time exhausted before " + rule.source_stage + " + " + std::to_string(*rule.offset_k) +
                          " GDD (" + rule.target_stage + ")");
}

bool evaluate(const Condition& c, const Bindings& b) {
    return compare(operand_value(c.left, b), c.op, operand_value(c.right, b));
}

bool evaluate(const Constraint& c, const Bindings& b) {
    auto it = b.find(c.variable);
    if (it == b.end()) throw ValidationError("unbound variable '" + c.variable + "'");
    const double v = c.absolute ? std::abs(it->second) : it->second;
    bool ok = compare(v, c.op, operand_value(c.operand, b));
    if (c.upper_op) {
        const double hi = operand_value(*c.upper_operand, b);
        const double lo = operand_value(c.operand, b);
        if (lo > hi) throw ValidationError("restriction on '" + c.variable + "': lower bound exceeds upper bound");
        ok = ok && compare(v, *c.upper_op, hi);
    }
    return ok;
}

bool evaluate(const KnowledgeBase& kb, const std::string& concept_name, const Bindings& b) {
    const Concept& c = kb.concept_named(concept_name);
    if (c.condition) return evaluate(*c.condition, b);
    if (c.constraint) return evaluate(*c.constraint, b);
    throw ValidationError("concept '" + concept_name + "' carries no condition or constraint");
}

} // namespace vws::knowledge
