#include "vws/io.hpp"

#include "vws/csv.hpp"
#include "vws/error.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace vws::io {

namespace {

DateTime timestamp_at(const csv::Table& t, const csv::Row& r, std::size_t col) {
    const std::string& s = csv::text(t, r, col);
    try {
        return DateTime::parse(s);
    } catch (const std::exception& e) {
        throw CsvError(t.source, r.line, col + 1, "bad timestamp '" + s + "'");
    }
}

Date date_at(const csv::Table& t, const csv::Row& r, std::size_t col) {
    const std::string& s = csv::text(t, r, col);
    try {
        return Date::parse(s);
    } catch (const std::exception& e) {
        throw CsvError(t.source, r.line, col + 1, "bad date '" + s + "'");
    }
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string bool_field(bool b) { return b ? "1" : "0"; }

} // namespace

MeteoInput parse_meteo(std::string_view text, const std::string& source) {
    const csv::Table t = csv::parse(text, kMeteoHeader, source);
    MeteoInput out;
    std::map<DateTime, std::vector<std::size_t>> lines;
    for (const auto& row : t.rows) {
        meteo::HourlyMeteoRecord r;
        r.timestamp = timestamp_at(t, row, 0);
        r.temp_air = csv::optional_number(t, row, 1);
        r.rel_humidity = csv::optional_number(t, row, 2);
        r.wind_speed = csv::optional_number(t, row, 3);
        r.solar_radiation = csv::optional_number(t, row, 4);
        r.precipitation = csv::optional_number(t, row, 5);
        lines[r.timestamp].push_back(row.line);
        try {
            meteo::validate(r);
        } catch (const ValidationError& e) {
            out.rejected.push_back({row.line, e.what()});
            continue;
        }
        out.records.push_back(r);
    }
    std::string dups;
    for (const auto& [ts, at] : lines) {
        if (at.size() < 2) continue;
        if (!dups.empty()) dups += "; ";
        dups += ts.to_string() + " (lines";
        for (auto l : at) dups += " " + std::to_string(l);
        dups += ")";
    }
    if (!dups.empty()) throw ValidationError(source + ": duplicate timestamps: " + dups);
    std::sort(out.records.begin(), out.records.end(),
              [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    return out;
}

std::string write_meteo(std::span<const meteo::HourlyMeteoRecord> records) {
    csv::Writer w(kMeteoHeader);
    for (const auto& r : records)
        w.row({r.timestamp.to_string(), csv::fmt_or_na(r.temp_air, 3), csv::fmt_or_na(r.rel_humidity, 3),
               csv::fmt_or_na(r.wind_speed, 3), csv::fmt_or_na(r.solar_radiation, 3),
               csv::fmt_or_na(r.precipitation, 3)});
    return w.str();
}

std::string write_dailies(std::span<const meteo::DailyMeteoRecord> dailies) {
    csv::Writer w(kDailiesHeader);
    for (const auto& d : dailies)
        w.row({d.date.to_string(), csv::fmt(d.t_mean, 4), csv::fmt(d.t_min, 4), csv::fmt(d.t_max, 4),
               csv::fmt(d.et_ref, 6), csv::fmt(d.vpd_max, 6), csv::fmt(d.gdd_cum, 4)});
    return w.str();
}

std::vector<meteo::DailyMeteoRecord> parse_dailies(std::string_view text, const std::string& source) {
    const csv::Table t = csv::parse(text, kDailiesHeader, source);
    std::vector<meteo::DailyMeteoRecord> out;
    for (const auto& row : t.rows) {
        meteo::DailyMeteoRecord d;
        d.date = date_at(t, row, 0);
        d.t_mean = csv::number(t, row, 1);
        d.t_min = csv::number(t, row, 2);
        d.t_max = csv::number(t, row, 3);
        d.et_ref = csv::number(t, row, 4);
        d.vpd_max = csv::number(t, row, 5);
        d.vpd_mean = d.vpd_max;
        d.gdd_cum = csv::number(t, row, 6);
        out.push_back(d);
    }
    return out;
}

SapInput parse_sap(std::string_view text, const std::string& source) {
    const csv::Table t = csv::parse(text, kSapHeader, source);
    SapInput out;
    std::map<std::string, sapflow::SensorStream> streams;
    std::map<std::string, std::map<DateTime, std::vector<std::size_t>>> seen;
    for (const auto& row : t.rows) {
        const DateTime ts = timestamp_at(t, row, 0);
        const std::string& sensor = csv::text(t, row, 1);
        const std::string& plot = csv::text(t, row, 2);
        const std::string& treatment = csv::text(t, row, 3);
        const auto rate = csv::optional_number(t, row, 4);
        auto [it, fresh] = streams.try_emplace(sensor);
        auto& s = it->second;
        if (fresh) {
            s.sensor_id = sensor;
            s.plot_id = plot;
            s.treatment = treatment;
        } else if (s.plot_id != plot || s.treatment != treatment) {
            throw CsvError(source, row.line, 3,
                           "sensor '" + sensor + "' already belongs to " + s.plot_id + "/" + s.treatment);
        }
        seen[sensor][ts].push_back(row.line);
        if (!rate) {
            out.rejected.push_back({row.line, "missing rate"});
            continue;
        }
        s.records.push_back({ts, *rate, sapflow::QcFlag::ok});
    }
    std::string dups;
    for (const auto& [sensor, by_time] : seen)
        for (const auto& [ts, at] : by_time) {
            if (at.size() < 2) continue;
            if (!dups.empty()) dups += "; ";
            dups += sensor + " " + ts.to_string() + " (lines";
            for (auto l : at) dups += " " + std::to_string(l);
            dups += ")";
        }
    if (!dups.empty()) throw ValidationError(source + ": duplicate timestamps: " + dups);
    for (auto& [id, s] : streams) {
        std::sort(s.records.begin(), s.records.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
        out.sensors.push_back(std::move(s));
    }
    return out;
}

std::string write_sap(std::span<const sapflow::SensorStream> sensors) {
    csv::Writer w(kSapHeader);
    for (const auto& s : sensors)
        for (const auto& r : s.records)
            w.row({r.timestamp.to_string(), s.sensor_id, s.plot_id, s.treatment, csv::fmt(r.rate_g_per_h, 3)});
    return w.str();
}

std::string write_transpiration(const sapflow::TranspirationSeries& raw, const sapflow::TranspirationSeries& smoothed) {
    csv::Writer w(kTranspirationHeader);
    for (const auto* series : {&raw, &smoothed})
        for (const auto& d : series->daily_t)
            w.row({d.date.to_string(), series->plot_id, series->treatment, csv::fmt_or_na(d.mm, 6),
                   bool_field(series->smoothed)});
    return w.str();
}

PhenologyDates parse_phenology(std::string_view text, const std::string& source) {
    const csv::Table t = csv::parse(text, kPhenologyHeader, source);
    static const std::vector<std::string> known{stage::budbreak, stage::bloom,    stage::nouaison,
                                                stage::veraison, stage::maturity, stage::harvest};
    PhenologyDates out;
    for (const auto& row : t.rows) {
        const std::string& plot = csv::text(t, row, 0);
        const std::string name = lower(csv::text(t, row, 1));
        auto it = std::find_if(known.begin(), known.end(), [&](const std::string& k) { return lower(k) == name; });
        if (it == known.end()) throw CsvError(source, row.line, 2, "unknown stage '" + csv::text(t, row, 1) + "'");
        const Date d = date_at(t, row, 2);
        if (!out[plot].emplace(*it, d).second)
            throw CsvError(source, row.line, 2, "stage " + *it + " given twice for plot " + plot);
    }
    return out;
}

std::string write_phenology(const PhenologyDates& dates) {
    csv::Writer w(kPhenologyHeader);
    for (const auto& [plot, stages] : dates) {
        std::vector<std::pair<Date, std::string>> ordered;
        for (const auto& [name, d] : stages) ordered.emplace_back(d, name);
        std::sort(ordered.begin(), ordered.end());
        for (const auto& [d, name] : ordered) w.row({plot, name, d.to_string()});
    }
    return w.str();
}

std::vector<kstar::LwpRecord> parse_lwp(std::string_view text, const std::string& source) {
    const csv::Table t = csv::parse(text, kLwpHeader, source);
    std::vector<kstar::LwpRecord> out;
    std::set<std::tuple<std::string, std::string, int>> seen;
    for (const auto& row : t.rows) {
        kstar::LwpRecord r;
        r.date = date_at(t, row, 0);
        r.plot_id = csv::text(t, row, 1);
        r.treatment = csv::text(t, row, 2);
        r.lwp_mpa = csv::number(t, row, 3);
        if (r.lwp_mpa > 0.0) throw CsvError(source, row.line, 4, "leaf water potential must not be positive");
        if (!seen.emplace(r.plot_id, r.treatment, r.date.days()).second)
            throw ValidationError(source + ": duplicate reading for " + r.plot_id + "/" + r.treatment + " on " +
                                  r.date.to_string() + " (line " + std::to_string(row.line) + ")");
        out.push_back(r);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
    return out;
}

std::string write_lwp(std::span<const kstar::LwpRecord> records) {
    csv::Writer w(kLwpHeader);
    for (const auto& r : records) w.row({r.date.to_string(), r.plot_id, r.treatment, csv::fmt(r.lwp_mpa, 3)});
    return w.str();
}

std::vector<aggregate::FruitSample> parse_fruit(std::string_view text, const std::string& source) {
    const csv::Table t = csv::parse(text, kFruitHeader, source);
    std::vector<aggregate::FruitSample> out;
    for (const auto& row : t.rows) {
        aggregate::FruitSample s;
        s.date = date_at(t, row, 0);
        s.plot_id = csv::text(t, row, 1);
        s.treatment = csv::text(t, row, 2);
        s.berry_weight = csv::number(t, row, 3);
        s.sugar = csv::number(t, row, 4);
        s.acidity = csv::number(t, row, 5);
        s.anthocyanins = csv::optional_number(t, row, 6);
        s.assimilable_nitrogen = csv::optional_number(t, row, 7);
        if (s.berry_weight < 0 || s.sugar < 0 || s.acidity < 0)
            throw CsvError(source, row.line, 4, "fruit measurements must be non-negative");
        out.push_back(s);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
    return out;
}

std::string write_fruit(std::span<const aggregate::FruitSample> samples) {
    csv::Writer w(kFruitHeader);
    for (const auto& s : samples)
        w.row({s.date.to_string(), s.plot_id, s.treatment, csv::fmt(s.berry_weight, 4), csv::fmt(s.sugar, 3),
               csv::fmt(s.acidity, 3), csv::fmt_or_na(s.anthocyanins, 3), csv::fmt_or_na(s.assimilable_nitrogen, 3)});
    return w.str();
}

std::string write_ratio(const kstar::RatioSeries& ratio) {
    csv::Writer w(kRatioHeader);
    for (const auto& p : ratio.points) w.row({p.date.to_string(), csv::fmt(p.gdd, 4), csv::fmt_or_na(p.r, 6)});
    return w.str();
}

std::string write_ks(const kstar::KsSeries& ks) {
    csv::Writer w(kKsHeader);
    for (const auto& p : ks.points)
        w.row({p.date.to_string(), ks.plot_id, ks.treatment, csv::fmt(p.gdd, 4), csv::fmt_or_na(p.ks, 6),
               bool_field(p.clamped)});
    return w.str();
}

kstar::KsSeries parse_ks(std::string_view text, const std::string& source) {
    const csv::Table t = csv::parse(text, kKsHeader, source);
    kstar::KsSeries ks;
    for (const auto& row : t.rows) {
        kstar::KsPoint p;
        p.date = date_at(t, row, 0);
        const std::string& plot = csv::text(t, row, 1);
        const std::string& treatment = csv::text(t, row, 2);
        if (ks.points.empty()) {
            ks.plot_id = plot;
            ks.treatment = treatment;
        } else if (plot != ks.plot_id || treatment != ks.treatment) {
            throw CsvError(source, row.line, 2, "a Ks file holds one plot and treatment");
        }
        p.gdd = csv::number(t, row, 3);
        p.ks = csv::optional_number(t, row, 4);
        p.clamped = csv::text(t, row, 5) == "1";
        ks.points.push_back(p);
    }
    return ks;
}

} // namespace vws::io
