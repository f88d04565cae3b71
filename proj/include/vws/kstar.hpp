#pragma once

#include "vws/knowledge.hpp"
#include "vws/meteo.hpp"
#include "vws/phenology.hpp"
#include "vws/sapflow.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vws::kstar {

struct RatioPoint {
    Date date;
    double gdd = 0.0;
    std::optional<double> r; // T/ETref, missing where ETref ≤ 0 or T is missing
};

struct RatioSeries {
    std::string plot_id;
    std::string treatment;
    std::vector<RatioPoint> points; // consecutive calendar dates
    bool smoothed = false;
};

struct LwpRecord {
    Date date;
    std::string plot_id;
    std::string treatment;
    double lwp_mpa = 0.0;
};

enum class VpdStatistic { daily_max, daily_mean };

struct CandidateRuleConfig {
    double vpd_limit = 3.5;          // kPa
    double lwp_stress_mpa = -0.3;    // predawn LWP strictly below this reveals stress
    double derivative_epsilon = 0.01; // per day
    std::string window_start = stage::budbreak;
    std::string window_end = stage::veraison;
    VpdStatistic vpd_statistic = VpdStatistic::daily_max;
};

/// Reads the window stages, the heat-spike limit, ε and the LWP stress level
/// from the knowledge base; anything absent keeps the value in `base`.
CandidateRuleConfig rule_config_from_kb(const knowledge::KnowledgeBase& kb, const std::string& region,
                                        const std::string& variety, CandidateRuleConfig base = {});

/// Rule identifiers in application order.
inline constexpr const char* kRulePhenology = "phenology";
inline constexpr const char* kRuleLwp = "lwp";
inline constexpr const char* kRuleVpd = "vpd";
inline constexpr const char* kRuleCurve = "curve_shape";

struct Candidate {
    Date date;
    double gdd = 0.0;
    double k_value = 0.0;
    std::vector<std::string> passed_rules;
    double first_derivative = 0.0;
    double second_derivative = 0.0;
};

struct CandidateReport {
    std::vector<Candidate> candidates;
    /// Empty when candidates exist, otherwise names the rule that removed the
    /// last surviving dates.
    std::string diagnostic;
    std::optional<Date> first_stress_date;
    std::vector<Date> vpd_excluded; // dates in the window rejected by the heat-spike rule
};

RatioSeries compute_ratio(const sapflow::TranspirationSeries& t_series,
                          std::span<const meteo::DailyMeteoRecord> dailies);

/// First date whose predawn LWP is strictly below the stress level.
std::optional<Date> first_stress_date(std::span<const LwpRecord> lwp, double stress_level_mpa);

/// Dates t in [start, end] with VPD(t) ≤ limit, t before the first stressed
/// LWP date, |r'(t)| ≤ ε and r''(t) < 0 (central differences on days).
CandidateReport detect_candidates(const RatioSeries& r, const PhenologyCalendar& calendar,
                                  std::span<const LwpRecord> lwp, std::span<const meteo::DailyMeteoRecord> dailies,
                                  const CandidateRuleConfig& cfg);

struct Selection {
    Date date;
    double gdd = 0.0;
    double k_star = 0.0;
    std::optional<int> candidate_index; // 1-based, manual choice
};

/// Auto policy: maximal k_value, earliest date on ties.
Selection select_auto(std::span<const Candidate> candidates);
/// Manual choice, 1-based.
Selection select_manual(std::span<const Candidate> candidates, int index);

struct KcbCurve {
    Date t_kstar;
    double gdd_kstar = 0.0;
    double k_star = 0.0;
    double gdd_budbreak = 0.0;
    double k0 = 0.0;

    /// Linear from (budbreak, k0) to (t_K*, K*) in thermal time, K* afterwards,
    /// k0 before budbreak.
    double value_at(double gdd) const;
};

KcbCurve build_kcb(const Selection& selection, const PhenologyCalendar& calendar, double k0 = 0.0);

struct KsPoint {
    Date date;
    double gdd = 0.0;
    std::optional<double> ks;
    bool clamped = false;
};

struct KsSeries {
    std::string plot_id;
    std::string treatment;
    std::vector<KsPoint> points;
};

/// Ks = T / (KcB·ETref) clamped to [0, ks_cap]; missing where Tmax ≤ 0.
KsSeries compute_ks(const sapflow::TranspirationSeries& t_series, const KcbCurve& kcb,
                    std::span<const meteo::DailyMeteoRecord> dailies, double ks_cap = 1.2);

} // namespace vws::kstar
