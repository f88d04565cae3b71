#include "vws/sapflow.hpp"

#include "vws/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace vws::sapflow {

std::string to_string(QcFlag f) {
    switch (f) {
    case QcFlag::ok: return "ok";
    case QcFlag::nighttime: return "nighttime";
    case QcFlag::weak: return "weak";
    case QcFlag::erroneous: return "erroneous";
    }
    return "?";
}

namespace {

bool is_night(const DateTime& ts, const QcRuleset& rules, const SolarLookup& solar) {
    if (solar) {
        if (auto rad = solar(ts)) return *rad < rules.night_solar_threshold;
    }
    const int h = ts.minute_of_day() / 60;
    if (rules.night_start_hour > rules.night_end_hour) return h >= rules.night_start_hour || h < rules.night_end_hour;
    return h >= rules.night_start_hour && h < rules.night_end_hour;
}

} // namespace

QcResult qc_sensor(const SensorStream& stream, const QcRuleset& rules, const SolarLookup& solar) {
    if (stream.records.empty()) throw ValidationError("sensor '" + stream.sensor_id + "' has no records");
    QcResult res;
    res.stream = stream;
    for (std::size_t i = 0; i < res.stream.records.size(); ++i) {
        auto& r = res.stream.records[i];
        if (i > 0 && !(res.stream.records[i - 1].timestamp < r.timestamp))
            throw ValidationError("sensor '" + stream.sensor_id + "': timestamps not strictly increasing at " +
                                  r.timestamp.to_string());
        if (is_night(r.timestamp, rules, solar)) {
            r.flag = QcFlag::nighttime;
            continue;
        }
        ++res.daytime_records;
        if (!std::isfinite(r.rate_g_per_h) || r.rate_g_per_h < 0.0 || r.rate_g_per_h > rules.erroneous_ceiling)
            r.flag = QcFlag::erroneous;
        else if (r.rate_g_per_h < rules.weak_rate)
            r.flag = QcFlag::weak;
        else
            r.flag = QcFlag::ok;
        if (r.flag != QcFlag::ok) ++res.filtered_daytime;
    }
    res.reliable = res.daytime_records > 0 && res.filtered_fraction() < rules.reliability_max_fraction;
    return res;
}

double scale_to_mm(double rate_g_per_h, double ground_area_per_vine_m2) {
    if (!(ground_area_per_vine_m2 > 0.0))
        throw ValidationError("ground area per vine must be positive, got " + std::to_string(ground_area_per_vine_m2));
    return rate_g_per_h / (1000.0 * ground_area_per_vine_m2);
}

TranspirationSeries daily_transpiration(std::span<const QcResult> sensors, double ground_area_m2,
                                        const std::function<double(const std::string&)>& sensor_scale) {
    if (!(ground_area_m2 > 0.0))
        throw ValidationError("ground area per vine must be positive, got " + std::to_string(ground_area_m2));
    TranspirationSeries out;
    if (!sensors.empty()) {
        out.plot_id = sensors.front().stream.plot_id;
        out.treatment = sensors.front().stream.treatment;
    }
    // Sensors are visited in id order so the floating-point sum does not depend
    // on the caller's ordering.
    std::vector<const QcResult*> reliable;
    for (const auto& s : sensors)
        if (s.reliable) reliable.push_back(&s);
    if (reliable.empty())
        throw ValidationError("no reliable sap-flow sensor for plot '" + out.plot_id + "' treatment '" + out.treatment + "'");
    std::sort(reliable.begin(), reliable.end(),
              [](const QcResult* a, const QcResult* b) { return a->stream.sensor_id < b->stream.sensor_id; });

    std::map<int, std::pair<double, int>> per_day; // day -> (sum of sensor mm, sensor count)
    for (const QcResult* s : reliable) {
        const double coef = sensor_scale ? sensor_scale(s->stream.sensor_id) : 1.0;
        std::map<int, double> grams;
        for (const auto& r : s->stream.records)
            if (r.flag == QcFlag::ok) grams[r.timestamp.date().days()] += r.rate_g_per_h * coef;
        for (const auto& [day, g] : grams) {
            auto& slot = per_day[day];
            slot.first += scale_to_mm(g, ground_area_m2);
            slot.second += 1;
        }
    }
    if (per_day.empty()) return out;
    const int first = per_day.begin()->first;
    const int last = per_day.rbegin()->first;
    for (int d = first; d <= last; ++d) {
        auto it = per_day.find(d);
        DailyValue v{Date(d), std::nullopt};
        if (it != per_day.end()) v.mm = it->second.first / it->second.second;
        out.daily_t.push_back(v);
    }
    return out;
}

namespace {

double window_mean(std::span<const double> v, std::ptrdiff_t i, std::ptrdiff_t half) {
    double sum = 0.0;
    int count = 0;
    for (std::ptrdiff_t j = i - half; j <= i + half; ++j) {
        const double x = v[static_cast<std::size_t>(j)];
        if (!std::isnan(x)) {
            sum += x;
            ++count;
        }
    }
    return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

void check_window(std::size_t n, int window) {
    if (window < 3 || window % 2 == 0) throw ValidationError("smoothing window must be odd and >= 3");
    if (n < static_cast<std::size_t>(window))
        throw ValidationError("series of " + std::to_string(n) + " days is shorter than the smoothing window " +
                              std::to_string(window));
}

} // namespace

std::vector<double> moving_average_serial(std::span<const double> values, int window) {
    check_window(values.size(), window);
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    const std::ptrdiff_t half = window / 2;
    std::vector<double> out(values.size());
    for (std::ptrdiff_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = window_mean(values, i, std::min({half, i, n - 1 - i}));
    return out;
}

std::vector<double> moving_average(std::span<const double> values, int window) {
    check_window(values.size(), window);
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    const std::ptrdiff_t half = window / 2;
    std::vector<double> out(values.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = window_mean(values, i, std::min({half, i, n - 1 - i}));
    return out;
}

TranspirationSeries smooth_ma(const TranspirationSeries& series, int window) {
    // Trim to the first/last observed day so the endpoints are defined.
    auto present = [](const DailyValue& v) { return v.mm.has_value(); };
    auto b = std::find_if(series.daily_t.begin(), series.daily_t.end(), present);
    auto e = std::find_if(series.daily_t.rbegin(), series.daily_t.rend(), present).base();
    if (b >= e) throw ValidationError("transpiration series for '" + series.plot_id + "' has no observed day");
    std::vector<DailyValue> span(b, e);

    std::vector<double> raw;
    raw.reserve(span.size());
    for (const auto& v : span) raw.push_back(v.mm ? *v.mm : std::numeric_limits<double>::quiet_NaN());
    std::vector<double> sm = moving_average(raw, window);

    for (std::size_t i = 0; i < sm.size(); ++i) {
        if (!std::isnan(sm[i])) continue;
        std::size_t lo = i;
        while (std::isnan(sm[lo])) --lo;
        std::size_t hi = i;
        while (std::isnan(sm[hi])) ++hi;
        const double f = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
        sm[i] = sm[lo] + f * (sm[hi] - sm[lo]);
    }

    TranspirationSeries out{series.plot_id, series.treatment, {}, true};
    for (std::size_t i = 0; i < span.size(); ++i) out.daily_t.push_back({span[i].date, std::max(0.0, sm[i])});
    return out;
}

} // namespace vws::sapflow
