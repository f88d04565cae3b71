#pragma once

#include "vws/date.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vws::meteo {

/// Station description needed by the hourly Penman-Monteith equation.
struct SiteConfig {
    std::string id;
    std::optional<double> latitude_deg;  // north positive
    std::optional<double> longitude_deg; // east positive
    std::optional<double> elevation_m;
    double utc_offset_hours = 0.0;       // offset of the local clock used in timestamps
    double wind_height_m = 2.0;
    double albedo = 0.23;
    double night_rs_rso = 0.8; // relative shortwave radiation assumed while the sun is down
};

/// One hourly station record. Empty CSV fields map to std::nullopt.
struct HourlyMeteoRecord {
    DateTime timestamp;
    std::optional<double> temp_air;        // °C
    std::optional<double> rel_humidity;    // %
    std::optional<double> wind_speed;      // km/h
    std::optional<double> solar_radiation; // W/m²
    std::optional<double> precipitation;   // mm
};

struct DailyMeteoRecord {
    Date date;
    double t_mean = 0.0;
    double t_min = 0.0;
    double t_max = 0.0;
    double et_ref = 0.0;   // mm/day
    double vpd_max = 0.0;  // kPa
    double vpd_mean = 0.0; // kPa, not part of the CSV schema
    double gdd_cum = 0.0;  // °C·day from the thermal-time origin
};

/// Intermediate terms of the FAO-56 hourly computation, all in FAO units
/// (kPa, MJ m⁻² h⁻¹, m/s).
struct Fao56HourlyTerms {
    double es = 0.0;          // saturation vapour pressure
    double ea = 0.0;          // actual vapour pressure
    double delta = 0.0;       // slope of the saturation curve, kPa/°C
    double pressure = 0.0;    // atmospheric pressure
    double gamma = 0.0;       // psychrometric constant, kPa/°C
    double u2 = 0.0;          // wind speed at 2 m
    double rs = 0.0;          // incoming shortwave
    double ra = 0.0;          // extraterrestrial radiation over the hour
    double rso = 0.0;         // clear-sky radiation
    double rs_rso = 0.0;      // relative shortwave radiation used for Rnl
    double rnl = 0.0;         // net longwave
    double rn = 0.0;          // net radiation
    double g = 0.0;           // soil heat flux
    bool daytime = false;
    double et_ref_raw = 0.0;  // before clamping
    double et_ref = 0.0;      // mm/h, clamped at 0
};

/// FAO-56 saturation vapour pressure e°(T), kPa.
double saturation_vapour_pressure(double temp_c);

/// VPD = e°(T)·(1 − RH/100). Throws ValidationError if RH is outside [0, 100].
double compute_vpd(double temp_c, double rel_humidity_pct);
double compute_vpd(const HourlyMeteoRecord& record);

/// Checks the HourlyMeteoRecord invariants on the fields that are present.
void validate(const HourlyMeteoRecord& record);

Fao56HourlyTerms fao56_hourly_terms(const HourlyMeteoRecord& record, const SiteConfig& site);

/// Hourly reference evapotranspiration (mm/h) for the hour centred on the
/// record timestamp. Throws ConfigError if latitude, longitude or elevation is
/// missing.
double compute_etref_hourly(const HourlyMeteoRecord& record, const SiteConfig& site);

/// Batch kernel: OpenMP over records. Records missing an input yield NaN.
std::vector<double> etref_hourly_batch(std::span<const HourlyMeteoRecord> records, const SiteConfig& site);
/// Serial reference of etref_hourly_batch kept for testing and benchmarking.
std::vector<double> etref_hourly_batch_serial(std::span<const HourlyMeteoRecord> records, const SiteConfig& site);

struct DailyAggregation {
    std::vector<DailyMeteoRecord> dailies; // gdd_cum left at 0; see thermal_time
    std::vector<Date> incomplete_days;
    std::vector<std::string> warnings;
};

/// Maximum gap (hours) bridged by linear interpolation inside a day.
inline constexpr double kMaxInterpolatedGapHours = 3.0;

/// Daily summaries by trapeze integration over each calendar day [00:00, 24:00].
/// The next day's 00:00 sample closes the polyline when present. Requires
/// strictly increasing timestamps.
DailyAggregation daily_from_hourly(std::span<const HourlyMeteoRecord> series, const SiteConfig& site);

/// Default thermal-time origin: April 1 of the given year.
Date default_gdd_origin(int year);

/// Base temperature for growing degree days, °C.
inline constexpr double kGddBaseTemp = 10.0;

/// Cumulative max(0, t_mean − 10) from `origin`; days before the origin get 0.
/// Throws ValidationError listing missing dates when coverage has gaps.
std::vector<double> thermal_time(std::span<const DailyMeteoRecord> dailies, Date origin);

/// Convenience: fills gdd_cum in place.
void assign_thermal_time(std::vector<DailyMeteoRecord>& dailies, Date origin);

/// Interpolates gdd_cum at a (possibly fractional) day number.
double gdd_at(std::span<const DailyMeteoRecord> dailies, double day_number);

} // namespace vws::meteo
