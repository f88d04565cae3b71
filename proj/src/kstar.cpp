#include "vws/kstar.hpp"

#include "vws/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace vws::kstar {

namespace {

const double* literal(const knowledge::Operand& o) { return std::get_if<double>(&o); }
const std::string* reference(const knowledge::Operand& o) { return std::get_if<std::string>(&o); }

std::map<int, const meteo::DailyMeteoRecord*> index_dailies(std::span<const meteo::DailyMeteoRecord> dailies) {
    std::map<int, const meteo::DailyMeteoRecord*> m;
    for (const auto& d : dailies) m[d.date.days()] = &d;
    return m;
}

} // namespace

CandidateRuleConfig rule_config_from_kb(const knowledge::KnowledgeBase& kb, const std::string& region,
                                        const std::string& variety, CandidateRuleConfig cfg) {
    using knowledge::CompareOp;
    if (kb.declares("KcB")) {
        for (const auto& name : kb.conditions_on("KcB")) {
            const auto& c = kb.concept_named(name).condition;
            if (!c) continue;
            const std::string* lhs = reference(c->left);
            const std::string* rhs = reference(c->right);
            if (!lhs || *lhs != "t" || !rhs || !kb.declares(*rhs) || !kb.declares("Phenology") ||
                !kb.subsumed_by(*rhs, "Phenology"))
                continue;
            if (c->op == CompareOp::ge || c->op == CompareOp::gt) cfg.window_start = *rhs;
            if (c->op == CompareOp::le || c->op == CompareOp::lt) cfg.window_end = *rhs;
        }
        for (const auto& name : kb.constraints_on("KcB")) {
            const auto& c = kb.concept_named(name).constraint;
            if (!c || c->upper_op) continue;
            const double* v = literal(c->operand);
            if (!v) continue;
            if (c->variable == "VPD") cfg.vpd_limit = *v;
            if (c->variable == "KstarDot" && c->absolute) cfg.derivative_epsilon = *v;
        }
    }
    if (auto lvl = kb.lwp_stress_level(region, variety)) cfg.lwp_stress_mpa = *lvl;
    if (!(cfg.vpd_limit > 0.0)) throw ConfigError("vpd_limit must be positive");
    if (!(cfg.derivative_epsilon > 0.0)) throw ConfigError("derivative epsilon must be positive");
    return cfg;
}

RatioSeries compute_ratio(const sapflow::TranspirationSeries& t_series,
                          std::span<const meteo::DailyMeteoRecord> dailies) {
    RatioSeries out{t_series.plot_id, t_series.treatment, {}, t_series.smoothed};
    if (t_series.daily_t.empty() || dailies.empty())
        throw ValidationError("ratio: empty transpiration or meteorological series");
    const int first = std::max(t_series.daily_t.front().date.days(), dailies.front().date.days());
    const int last = std::min(t_series.daily_t.back().date.days(), dailies.back().date.days());
    if (first > last)
        throw ValidationError("ratio: transpiration and meteorological dates do not overlap for plot '" +
                              t_series.plot_id + "'");
    std::map<int, std::optional<double>> t_by_day;
    for (const auto& v : t_series.daily_t) t_by_day[v.date.days()] = v.mm;
    const auto met = index_dailies(dailies);
    for (int d = first; d <= last; ++d) {
        auto m = met.find(d);
        if (m == met.end()) continue;
        RatioPoint p{Date(d), m->second->gdd_cum, std::nullopt};
        auto t = t_by_day.find(d);
        if (t != t_by_day.end() && t->second && m->second->et_ref > 0.0) p.r = *t->second / m->second->et_ref;
        out.points.push_back(p);
    }
    return out;
}

std::optional<Date> first_stress_date(std::span<const LwpRecord> lwp, double level) {
    std::optional<Date> first;
    for (const auto& rec : lwp)
        if (rec.lwp_mpa < level && (!first || rec.date < *first)) first = rec.date;
    return first;
}

CandidateReport detect_candidates(const RatioSeries& r, const PhenologyCalendar& calendar,
                                  std::span<const LwpRecord> lwp, std::span<const meteo::DailyMeteoRecord> dailies,
                                  const CandidateRuleConfig& cfg) {
    CandidateReport rep;
    const Date start = calendar.at(cfg.window_start).date();
    const Date end = calendar.at(cfg.window_end).date();
    rep.first_stress_date = first_stress_date(lwp, cfg.lwp_stress_mpa);
    const auto met = index_dailies(dailies);

    std::map<int, double> ratio;
    for (const auto& p : r.points)
        if (p.r) ratio[p.date.days()] = *p.r;
    auto value = [&](int d) -> std::optional<double> {
        auto it = ratio.find(d);
        if (it == ratio.end()) return std::nullopt;
        return it->second;
    };

    std::size_t after_window = 0, after_lwp = 0, after_vpd = 0;
    for (const auto& p : r.points) {
        const Date t = p.date;
        if (t < start || t > end) continue;
        ++after_window;
        if (rep.first_stress_date && !(t < *rep.first_stress_date)) continue;
        ++after_lwp;
        auto m = met.find(t.days());
        if (m == met.end()) continue;
        const double vpd = cfg.vpd_statistic == VpdStatistic::daily_max ? m->second->vpd_max : m->second->vpd_mean;
        if (!(vpd <= cfg.vpd_limit)) {
            rep.vpd_excluded.push_back(t);
            continue;
        }
        ++after_vpd;
        auto prev = value(t.days() - 1);
        auto cur = value(t.days());
        auto next = value(t.days() + 1);
        if (!prev || !cur || !next) continue;
        const double d1 = (*next - *prev) / 2.0;
        const double d2 = *next - 2.0 * *cur + *prev;
        if (!(std::abs(d1) <= cfg.derivative_epsilon && d2 < 0.0)) continue;
        rep.candidates.push_back(Candidate{t, p.gdd, *cur, {kRulePhenology, kRuleLwp, kRuleVpd, kRuleCurve}, d1, d2});
    }
    if (rep.candidates.empty()) {
        if (after_window == 0)
            rep.diagnostic = kRulePhenology;
        else if (after_lwp == 0)
            rep.diagnostic = kRuleLwp;
        else if (after_vpd == 0)
            rep.diagnostic = kRuleVpd;
        else
            rep.diagnostic = kRuleCurve;
    }
    return rep;
}

Selection select_auto(std::span<const Candidate> candidates) {
    if (candidates.empty()) throw ValidationError("no t_K* candidate to select from");
    const Candidate* best = &candidates.front();
    for (const auto& c : candidates)
        if (c.k_value > best->k_value || (c.k_value == best->k_value && c.date < best->date)) best = &c;
    return Selection{best->date, best->gdd, best->k_value, std::nullopt};
}

Selection select_manual(std::span<const Candidate> candidates, int index) {
    if (candidates.empty()) throw ValidationError("no t_K* candidate to select from");
    if (index < 1 || static_cast<std::size_t>(index) > candidates.size())
        throw ValidationError("candidate index " + std::to_string(index) + " out of range 1.." +
                              std::to_string(candidates.size()));
    const Candidate& c = candidates[static_cast<std::size_t>(index - 1)];
    return Selection{c.date, c.gdd, c.k_value, index};
}

double KcbCurve::value_at(double gdd) const {
    if (gdd >= gdd_kstar) return k_star;
    if (gdd <= gdd_budbreak) return k0;
    return k0 + (k_star - k0) * (gdd - gdd_budbreak) / (gdd_kstar - gdd_budbreak);
}

KcbCurve build_kcb(const Selection& selection, const PhenologyCalendar& calendar, double k0) {
    const StageTime& bb = calendar.at(stage::budbreak);
    if (!(bb.gdd < selection.gdd) || !(bb.date() < selection.date))
        throw ValidationError("t_K* (" + selection.date.to_string() + ") must come after budbreak (" +
                              bb.date().to_string() + ") in thermal time");
    return KcbCurve{selection.date, selection.gdd, selection.k_star, bb.gdd, k0};
}

KsSeries compute_ks(const sapflow::TranspirationSeries& t_series, const KcbCurve& kcb,
                    std::span<const meteo::DailyMeteoRecord> dailies, double ks_cap) {
    if (!(ks_cap > 0.0)) throw ConfigError("ks_cap must be positive");
    KsSeries out{t_series.plot_id, t_series.treatment, {}};
    const auto met = index_dailies(dailies);
    for (const auto& v : t_series.daily_t) {
        auto m = met.find(v.date.days());
        if (m == met.end()) continue;
        KsPoint p{v.date, m->second->gdd_cum, std::nullopt, false};
        const double kc = v.date >= kcb.t_kstar ? kcb.k_star : kcb.value_at(m->second->gdd_cum);
        const double tmax = kc * m->second->et_ref;
        if (v.mm && tmax > 0.0) {
            double ks = *v.mm / tmax;
            if (ks > ks_cap) {
                ks = ks_cap;
                p.clamped = true;
            } else if (ks < 0.0) {
                ks = 0.0;
                p.clamped = true;
            }
            p.ks = ks;
        }
        out.points.push_back(p);
    }
    return out;
}

} // namespace vws::kstar
