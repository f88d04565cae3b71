#include "vws/aggregate.hpp"

#include "vws/csv.hpp"
#include "vws/error.hpp"

#include <algorithm>
#include <cmath>

namespace vws::aggregate {

namespace {

struct Knot {
    double gdd;
    double ks;
};

// Present values in date order. A run of more than kMaxKsGapDays missing
// values whose bridging segment overlaps the window is an error.
std::vector<Knot> knots_for(const kstar::KsSeries& ks, double start, double end) {
    std::vector<Knot> out;
    int missing_run = 0;
    std::optional<Date> run_start;
    for (const auto& p : ks.points) {
        if (!p.ks) {
            if (missing_run++ == 0) run_start = p.date;
            continue;
        }
        if (missing_run > kMaxKsGapDays && !out.empty() && p.gdd > start && out.back().gdd < end)
            throw ValidationError("Ks series for '" + ks.plot_id + "' has " + std::to_string(missing_run) +
                                  " missing days from " + run_start->to_string() + " inside the integration window");
        missing_run = 0;
        out.push_back({p.gdd, *p.ks});
    }
    return out;
}

} // namespace

double trapz_ks(const kstar::KsSeries& ks, double start, double end) {
    if (!(start < end)) throw ValidationError("integration window must satisfy start < end");
    const auto k = knots_for(ks, start, end);
    if (k.size() < 2 || start < k.front().gdd || end > k.back().gdd)
        throw ValidationError("window [" + std::to_string(start) + ", " + std::to_string(end) +
                              "] GDD outside Ks coverage for '" + ks.plot_id + "'");
    double acc = 0.0;
    for (std::size_t i = 1; i < k.size(); ++i) {
        const double g0 = k[i - 1].gdd, g1 = k[i].gdd;
        if (g1 <= g0) continue;
        const double a = std::max(g0, start), b = std::min(g1, end);
        if (b <= a) continue;
        const double slope = (k[i].ks - k[i - 1].ks) / (g1 - g0);
        const double ya = k[i - 1].ks + slope * (a - g0);
        const double yb = k[i - 1].ks + slope * (b - g0);
        acc += 0.5 * (ya + yb) * (b - a);
    }
    return acc;
}

MaturityResult maturity_date(std::span<const FruitSample> samples, double threshold) {
    MaturityResult res;
    std::vector<const FruitSample*> valid;
    for (const auto& s : samples) {
        if (s.acidity == 0.0) {
            res.warnings.push_back("sample " + s.date.to_string() + " skipped: acidity is zero");
            continue;
        }
        valid.push_back(&s);
    }
    if (valid.size() < 2) throw ValidationError("maturity needs at least two samples with sugar and acidity");
    std::sort(valid.begin(), valid.end(), [](const FruitSample* a, const FruitSample* b) { return a->date < b->date; });
    double prev_ratio = 0.0;
    for (std::size_t i = 0; i < valid.size(); ++i) {
        const double ratio = valid[i]->sugar / valid[i]->acidity;
        if (ratio >= threshold) {
            if (i == 0) {
                res.day = valid[0]->date.days();
            } else {
                const double d0 = valid[i - 1]->date.days(), d1 = valid[i]->date.days();
                res.day = d0 + (threshold - prev_ratio) / (ratio - prev_ratio) * (d1 - d0);
            }
            return res;
        }
        prev_ratio = ratio;
    }
    return res;
}

AggregateRecord build_aggregates(const kstar::KsSeries& ks, const PhenologyCalendar& cal) {
    const double nou = cal.at(stage::nouaison).gdd;
    const double ver = cal.at(stage::veraison).gdd;
    const double harv = cal.at(stage::harvest).gdd;
    AggregateRecord r;
    r.plot_id = ks.plot_id;
    r.treatment = ks.treatment;
    r.nou_harv = trapz_ks(ks, nou, harv);
    r.nou_ver = trapz_ks(ks, nou, ver);
    r.ver_harv = trapz_ks(ks, ver, harv);
    if (auto mat = cal.find(stage::maturity)) {
        const double m = std::min(mat->gdd, harv);
        r.ver_mat = m > ver ? trapz_ks(ks, ver, m) : 0.0;
    }
    return r;
}

std::string to_csv(std::span<const AggregateRecord> records) {
    csv::Writer w(kAggregateHeader);
    for (const auto& r : records)
        w.row({r.site, r.variety, r.treatment, csv::fmt(r.nou_harv, 3), csv::fmt(r.nou_ver, 3), csv::fmt(r.ver_harv, 3),
               csv::fmt_or_na(r.ver_mat, 3)});
    return w.str();
}

std::vector<AggregateRecord> parse_aggregates_csv(std::string_view text, const std::string& source) {
    auto t = csv::parse(text, kAggregateHeader, source);
    std::vector<AggregateRecord> out;
    for (const auto& row : t.rows) {
        AggregateRecord r;
        r.site = csv::text(t, row, 0);
        r.variety = csv::text(t, row, 1);
        r.treatment = csv::text(t, row, 2);
        r.nou_harv = csv::number(t, row, 3);
        r.nou_ver = csv::number(t, row, 4);
        r.ver_harv = csv::number(t, row, 5);
        if (row.fields[6] != "NA") r.ver_mat = csv::number(t, row, 6);
        for (double v : {r.nou_harv, r.nou_ver, r.ver_harv, r.ver_mat.value_or(0.0)})
            if (v < 0.0) throw CsvError(source, row.line, 4, "aggregate values must be non-negative");
        out.push_back(r);
    }
    return out;
}

} // namespace vws::aggregate
