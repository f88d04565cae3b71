#include "vws/meteo.hpp"

#include "vws/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace vws::meteo {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSolarConstant = 0.0820;      // MJ m⁻² min⁻¹
constexpr double kStefanBoltzmannHourly = 2.043e-10; // MJ K⁻⁴ m⁻² h⁻¹
constexpr double kWattsToMjPerHour = 0.0036;

double require(const std::optional<double>& v, const char* what, const SiteConfig& site) {
    if (!v) throw ConfigError(std::string("site '") + site.id + "' is missing " + what);
    return *v;
}

double require_field(const std::optional<double>& v, const char* what, const DateTime& ts) {
    if (!v) throw ValidationError(std::string("record ") + ts.to_string() + " is missing " + what);
    return *v;
}

// Extraterrestrial radiation over the one-hour period centred on `ts`.
double extraterrestrial_hourly(const DateTime& ts, double lat_deg, double lon_east_deg, double utc_offset_h) {
    const double phi = lat_deg * kPi / 180.0;
    const int doy = ts.date().day_of_year();
    const double dr = 1.0 + 0.033 * std::cos(2.0 * kPi * doy / 365.0);
    const double decl = 0.409 * std::sin(2.0 * kPi * doy / 365.0 - 1.39);
    const double b = 2.0 * kPi * (doy - 81) / 364.0;
    const double sc = 0.1645 * std::sin(2.0 * b) - 0.1255 * std::cos(b) - 0.025 * std::sin(b);
    // FAO-56 measures longitudes in degrees west of Greenwich.
    const double lz = -15.0 * utc_offset_h;
    const double lm = -lon_east_deg;
    const double omega = kPi / 12.0 * ((ts.hour_of_day() + 0.06667 * (lz - lm) + sc) - 12.0);
    const double ws = std::acos(std::clamp(-std::tan(phi) * std::tan(decl), -1.0, 1.0));
    double w1 = std::clamp(omega - kPi / 24.0, -ws, ws);
    double w2 = std::clamp(omega + kPi / 24.0, -ws, ws);
    if (w1 >= w2) return 0.0;
    const double ra = 12.0 * 60.0 / kPi * kSolarConstant * dr *
                      ((w2 - w1) * std::sin(phi) * std::sin(decl) +
                       std::cos(phi) * std::cos(decl) * (std::sin(w2) - std::sin(w1)));
    return std::max(ra, 0.0);
}

} // namespace

double saturation_vapour_pressure(double temp_c) { return 0.6108 * std::exp(17.27 * temp_c / (temp_c + 237.3)); }

double compute_vpd(double temp_c, double rel_humidity_pct) {
    if (!(rel_humidity_pct >= 0.0 && rel_humidity_pct <= 100.0))
        throw ValidationError("relative humidity " + std::to_string(rel_humidity_pct) + " outside [0, 100]");
    return std::max(0.0, saturation_vapour_pressure(temp_c) * (1.0 - rel_humidity_pct / 100.0));
}

double compute_vpd(const HourlyMeteoRecord& record) {
    return compute_vpd(require_field(record.temp_air, "temp_air", record.timestamp),
                       require_field(record.rel_humidity, "rel_humidity", record.timestamp));
}

void validate(const HourlyMeteoRecord& r) {
    auto fail = [&](const std::string& what) {
        throw ValidationError("record " + r.timestamp.to_string() + ": " + what);
    };
    if (r.rel_humidity && !(*r.rel_humidity >= 0.0 && *r.rel_humidity <= 100.0))
        fail("rel_humidity " + std::to_string(*r.rel_humidity) + " outside [0, 100]");
    if (r.wind_speed && *r.wind_speed < 0.0) fail("negative wind_speed");
    if (r.solar_radiation && *r.solar_radiation < 0.0) fail("negative solar_radiation");
    if (r.precipitation && *r.precipitation < 0.0) fail("negative precipitation");
    if (r.temp_air && !(*r.temp_air > -90.0 && *r.temp_air < 70.0)) fail("implausible temp_air");
}

Fao56HourlyTerms fao56_hourly_terms(const HourlyMeteoRecord& record, const SiteConfig& site) {
    const double lat = require(site.latitude_deg, "latitude", site);
    const double lon = require(site.longitude_deg, "longitude", site);
    const double z = require(site.elevation_m, "elevation", site);
    validate(record);
    const double t = require_field(record.temp_air, "temp_air", record.timestamp);
    const double rh = require_field(record.rel_humidity, "rel_humidity", record.timestamp);
    const double wind_kmh = require_field(record.wind_speed, "wind_speed", record.timestamp);
    const double rs_wm2 = require_field(record.solar_radiation, "solar_radiation", record.timestamp);

    Fao56HourlyTerms k;
    k.es = saturation_vapour_pressure(t);
    k.ea = k.es * rh / 100.0;
    k.delta = 4098.0 * k.es / ((t + 237.3) * (t + 237.3));
    k.pressure = 101.3 * std::pow((293.0 - 0.0065 * z) / 293.0, 5.26);
    k.gamma = 0.665e-3 * k.pressure;
    const double uz = wind_kmh / 3.6;
    k.u2 = site.wind_height_m == 2.0 ? uz : uz * 4.87 / std::log(67.8 * site.wind_height_m - 5.42);
    k.rs = rs_wm2 * kWattsToMjPerHour;
    k.ra = extraterrestrial_hourly(record.timestamp, lat, lon, site.utc_offset_hours);
    k.rso = (0.75 + 2e-5 * z) * k.ra;
    k.daytime = k.ra > 0.0;
    k.rs_rso = k.rso > 0.0 ? std::min(k.rs / k.rso, 1.0) : site.night_rs_rso;
    const double tk = t + 273.16;
    k.rnl = kStefanBoltzmannHourly * tk * tk * tk * tk * (0.34 - 0.14 * std::sqrt(k.ea)) * (1.35 * k.rs_rso - 0.35);
    k.rn = (1.0 - site.albedo) * k.rs - k.rnl;
    k.g = (k.daytime ? 0.1 : 0.5) * k.rn;
    const double num = 0.408 * k.delta * (k.rn - k.g) + k.gamma * 37.0 / (t + 273.0) * k.u2 * (k.es - k.ea);
    const double den = k.delta + k.gamma * (1.0 + 0.34 * k.u2);
    k.et_ref_raw = num / den;
    k.et_ref = std::max(0.0, k.et_ref_raw);
    return k;
}

double compute_etref_hourly(const HourlyMeteoRecord& record, const SiteConfig& site) {
    return fao56_hourly_terms(record, site).et_ref;
}

namespace {

bool has_etref_inputs(const HourlyMeteoRecord& r) {
    return r.temp_air && r.rel_humidity && r.wind_speed && r.solar_radiation;
}

} // namespace

std::vector<double> etref_hourly_batch(std::span<const HourlyMeteoRecord> records, const SiteConfig& site) {
    require(site.latitude_deg, "latitude", site);
    require(site.longitude_deg, "longitude", site);
    require(site.elevation_m, "elevation", site);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(records.size());
    std::vector<double> out(records.size(), std::numeric_limits<double>::quiet_NaN());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& r = records[static_cast<std::size_t>(i)];
        if (has_etref_inputs(r)) out[static_cast<std::size_t>(i)] = fao56_hourly_terms(r, site).et_ref;
    }
    return out;
}

std::vector<double> etref_hourly_batch_serial(std::span<const HourlyMeteoRecord> records, const SiteConfig& site) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back(has_etref_inputs(r) ? compute_etref_hourly(r, site) : std::numeric_limits<double>::quiet_NaN());
    return out;
}

namespace {

struct Sample {
    double hour; // hours since the start of the day
    double temp;
    double vpd;
    double et_rate;
};

double trapezoid(const std::vector<Sample>& s, double Sample::*field) {
    double acc = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i)
        acc += 0.5 * (s[i].*field + s[i - 1].*field) * (s[i].hour - s[i - 1].hour);
    return acc;
}

} // namespace

DailyAggregation daily_from_hourly(std::span<const HourlyMeteoRecord> series, const SiteConfig& site) {
    DailyAggregation out;
    if (series.empty()) return out;
    for (std::size_t i = 1; i < series.size(); ++i)
        if (!(series[i - 1].timestamp < series[i].timestamp))
            throw ValidationError("timestamps not strictly increasing at " + series[i].timestamp.to_string());
    for (const auto& r : series) validate(r);

    const std::vector<double> et = etref_hourly_batch(series, site);

    const Date first = series.front().timestamp.date();
    const Date last = series.back().timestamp.date();
    std::size_t cursor = 0;
    for (Date d = first; d <= last; d = d + 1) {
        const DateTime day_start(d, 0);
        const DateTime day_end(d + 1, 0);
        while (cursor < series.size() && series[cursor].timestamp < day_start) ++cursor;
        std::vector<Sample> samples;
        for (std::size_t i = cursor; i < series.size() && series[i].timestamp <= day_end; ++i) {
            const auto& r = series[i];
            if (std::isnan(et[i])) continue;
            samples.push_back(Sample{static_cast<double>(r.timestamp.minutes() - day_start.minutes()) / 60.0, *r.temp_air,
                                     compute_vpd(*r.temp_air, *r.rel_humidity), et[i]});
        }
        auto incomplete = [&](const std::string& why) {
            out.incomplete_days.push_back(d);
            out.warnings.push_back(d.to_string() + ": day excluded (" + why + ")");
        };
        if (samples.size() < 2) {
            incomplete(std::to_string(samples.size()) + " usable record(s)");
            continue;
        }
        double max_gap = std::max(samples.front().hour, 24.0 - samples.back().hour);
        for (std::size_t i = 1; i < samples.size(); ++i) max_gap = std::max(max_gap, samples[i].hour - samples[i - 1].hour);
        if (max_gap > kMaxInterpolatedGapHours) {
            incomplete("gap of " + std::to_string(max_gap) + " h");
            continue;
        }
        const double span = samples.back().hour - samples.front().hour;
        DailyMeteoRecord rec;
        rec.date = d;
        rec.t_mean = trapezoid(samples, &Sample::temp) / span;
        rec.vpd_mean = trapezoid(samples, &Sample::vpd) / span;
        rec.et_ref = trapezoid(samples, &Sample::et_rate) / span * 24.0;
        rec.t_min = rec.t_max = samples.front().temp;
        rec.vpd_max = samples.front().vpd;
        for (const auto& s : samples) {
            rec.t_min = std::min(rec.t_min, s.temp);
            rec.t_max = std::max(rec.t_max, s.temp);
            rec.vpd_max = std::max(rec.vpd_max, s.vpd);
        }
        rec.t_mean = std::clamp(rec.t_mean, rec.t_min, rec.t_max);
        out.dailies.push_back(rec);
    }
    return out;
}

Date default_gdd_origin(int year) { return Date::from_ymd(year, 4, 1); }

std::vector<double> thermal_time(std::span<const DailyMeteoRecord> dailies, Date origin) {
    std::vector<double> gdd(dailies.size(), 0.0);
    if (dailies.empty()) return gdd;
    std::vector<std::string> missing;
    for (std::size_t i = 1; i < dailies.size(); ++i) {
        if (!(dailies[i - 1].date < dailies[i].date))
            throw ValidationError("daily dates not strictly increasing at " + dailies[i].date.to_string());
        for (Date d = dailies[i - 1].date + 1; d < dailies[i].date; d = d + 1)
            if (d >= origin) missing.push_back(d.to_string());
    }
    if (dailies.front().date > origin)
        throw ValidationError("daily series starts " + dailies.front().date.to_string() + ", after the thermal-time origin " +
                              origin.to_string());
    if (!missing.empty()) {
        std::string msg = "gaps in daily coverage; missing dates:";
        for (const auto& m : missing) msg += " " + m;
        throw ValidationError(msg);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < dailies.size(); ++i) {
        if (dailies[i].date >= origin) acc += std::max(0.0, dailies[i].t_mean - kGddBaseTemp);
        gdd[i] = acc;
    }
    return gdd;
}

void assign_thermal_time(std::vector<DailyMeteoRecord>& dailies, Date origin) {
    auto gdd = thermal_time(dailies, origin);
    for (std::size_t i = 0; i < dailies.size(); ++i) dailies[i].gdd_cum = gdd[i];
}

double gdd_at(std::span<const DailyMeteoRecord> dailies, double day_number) {
    if (dailies.empty()) throw ValidationError("no daily records to interpolate thermal time");
    if (day_number < dailies.front().date.days() || day_number > dailies.back().date.days())
        throw ValidationError("day outside daily coverage for thermal-time lookup");
    auto it = std::lower_bound(dailies.begin(), dailies.end(), day_number,
                               [](const DailyMeteoRecord& r, double x) { return r.date.days() < x; });
    if (it->date.days() == day_number || it == dailies.begin()) return it->gdd_cum;
    auto prev = it - 1;
    const double f = (day_number - prev->date.days()) / static_cast<double>(it->date.days() - prev->date.days());
    return prev->gdd_cum + f * (it->gdd_cum - prev->gdd_cum);
}

} // namespace vws::meteo
