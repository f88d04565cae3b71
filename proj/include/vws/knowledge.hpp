#pragma once

#include "vws/meteo.hpp"
#include "vws/phenology.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace vws::knowledge {

enum class PrimaryKind { Variable, Condition, Constraint, ShiftStage };

enum class CompareOp { lt, le, eq, ge, gt };

CompareOp parse_op(const std::string& text);
std::string to_string(CompareOp op);
bool compare(double lhs, CompareOp op, double rhs);

/// Literal number or a reference to a concept / the reserved time variable `t`.
using Operand = std::variant<double, std::string>;

struct Condition {
    CompareOp op = CompareOp::le;
    Operand left;
    Operand right;
};

/// One-operand comparison applied to `variable`; a Restriction carries a
/// second bound evaluated conjunctively.
struct Constraint {
    std::string variable;
    CompareOp op = CompareOp::le;
    Operand operand;
    bool absolute = false; // compare |value| instead of value
    std::optional<CompareOp> upper_op;
    std::optional<Operand> upper_operand;
};

struct Concept {
    std::string name;
    std::vector<std::string> parents; // direct subsumption (≼) targets
    std::optional<std::string> unit;
    std::optional<double> default_value;
    std::optional<std::string> date;
    std::optional<Condition> condition;
    std::optional<Constraint> constraint;
};

enum class RelationType { subsumption, isBefore, hasCondition, hasConstraint };

struct Relation {
    RelationType type;
    std::string from;
    std::string to;
};

struct ShiftStageRule {
    std::string name;
    std::string source_stage;
    std::string target_stage;
    std::optional<double> offset_k; // GDD; absent means "use the project default"
    std::optional<std::string> variety;

    ShiftStageRule with_default_offset(double default_k) const {
        ShiftStageRule r = *this;
        if (!r.offset_k) r.offset_k = default_k;
        return r;
    }
};

struct LevelOverride {
    std::optional<std::string> region;
    std::optional<std::string> variety;
    double value = 0.0;
};

struct Levels {
    std::optional<double> lwp_stress_mpa;
    std::vector<LevelOverride> lwp_overrides;
    std::map<std::string, double> maturity_ratio; // sugar/acidity threshold per variety
};

/// Immutable once loaded; every invariant is checked in load_kb.
class KnowledgeBase {
public:
    const std::map<std::string, Concept>& concepts() const { return concepts_; }
    const std::vector<Relation>& relations() const { return relations_; }
    const std::vector<ShiftStageRule>& shift_rules() const { return shift_rules_; }
    const Levels& levels() const { return levels_; }

    bool declares(const std::string& name) const { return concepts_.count(name) != 0; }
    /// Concepts whose direct parent list contains `name`.
    const std::set<std::string>& direct_subconcepts(const std::string& name) const;
    const Concept& concept_named(const std::string& name) const;
    /// Primary kinds reachable from `name` through ≼.
    std::set<PrimaryKind> kinds_of(const std::string& name) const;
    /// c' ≼ c using the reflexive-transitive closure.
    bool subsumed_by(const std::string& sub, const std::string& super) const;

    std::vector<std::string> conditions_on(const std::string& subject) const;
    std::vector<std::string> constraints_on(const std::string& subject) const;

    /// Variety-specific rule if declared, else the variety-free rule.
    std::optional<ShiftStageRule> shift_rule_for(const std::string& target, const std::string& variety) const;
    /// Stress level for (region, variety); the most specific override wins.
    std::optional<double> lwp_stress_level(const std::string& region, const std::string& variety) const;
    std::optional<double> maturity_threshold(const std::string& variety) const;

private:
    friend KnowledgeBase load_kb(std::string_view document);
    std::map<std::string, Concept> concepts_;
    std::vector<Relation> relations_;
    std::vector<ShiftStageRule> shift_rules_;
    Levels levels_;
    std::map<std::string, std::set<std::string>> down_; // direct sub-concepts
};

/// Parses the JSON knowledge document and validates it. Throws ValidationError
/// on a ≼ cycle (message carries the cycle path) or an unknown concept.
KnowledgeBase load_kb(std::string_view document);
KnowledgeBase load_kb_file(const std::string& path);

/// Units accepted on Variable concepts.
bool is_known_unit(const std::string& unit);

/// C_c: every c' with c' ≼ c, including c itself.
std::set<std::string> subconcepts(const KnowledgeBase& kb, const std::string& c);

enum class OrderStatus { violated, unverifiable };

struct OrderFinding {
    std::string before;
    std::string after;
    OrderStatus status;
};

/// Checks every isBefore(a, b) as date(a) < date(b). Findings are sorted by
/// (before, after); an empty report means the calendar is consistent.
std::vector<OrderFinding> check_temporal_order(const KnowledgeBase& kb, const PhenologyCalendar& calendar);

/// Target date = first day from the source onward with gdd_cum ≥ gdd(source) + k.
PhenologyCalendar apply_shift(const ShiftStageRule& rule, const PhenologyCalendar& calendar,
                              std::span<const meteo::DailyMeteoRecord> dailies);

using Bindings = std::map<std::string, double>;

bool evaluate(const Condition& condition, const Bindings& bindings);
bool evaluate(const Constraint& constraint, const Bindings& bindings);
/// Evaluates the condition or constraint carried by a declared concept.
bool evaluate(const KnowledgeBase& kb, const std::string& concept_name, const Bindings& bindings);

/// The shipped default knowledge file (concept hierarchy, temporal order and
/// the four t_K* selection rules).
std::string default_knowledge_document();

} // namespace vws::knowledge
