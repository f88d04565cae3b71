#pragma once

#include "vws/date.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vws::sapflow {

enum class QcFlag { ok, nighttime, weak, erroneous };

std::string to_string(QcFlag f);

struct SapRecord {
    DateTime timestamp;
    double rate_g_per_h = 0.0;
    QcFlag flag = QcFlag::ok;
};

struct SensorStream {
    std::string sensor_id;
    std::string plot_id;
    std::string treatment;
    std::vector<SapRecord> records;
};

/// Expert filtering thresholds. Every value is configuration.
struct QcRuleset {
    double night_solar_threshold = 10.0; // W/m²; below it a record is nighttime
    int night_start_hour = 20;           // fallback window when no radiation is known
    int night_end_hour = 6;
    double weak_rate = 1.0;              // g/h, daytime rates below are weak
    double erroneous_ceiling = 5000.0;   // g/h
    double reliability_max_fraction = 0.05;
};

/// Solar radiation lookup (W/m²) for a timestamp, or nullopt when unknown.
using SolarLookup = std::function<std::optional<double>(const DateTime&)>;

struct QcResult {
    SensorStream stream;
    std::size_t daytime_records = 0;
    std::size_t filtered_daytime = 0;
    bool reliable = false;

    double filtered_fraction() const {
        return daytime_records ? static_cast<double>(filtered_daytime) / static_cast<double>(daytime_records) : 0.0;
    }
};

/// Flags every record and decides reliability on daytime records only:
/// reliable when the filtered fraction is strictly below 5%.
QcResult qc_sensor(const SensorStream& stream, const QcRuleset& rules, const SolarLookup& solar = {});

/// g/h of water per vine to mm/h over the vine's ground area (1 mm on 1 m² is 1000 g).
double scale_to_mm(double rate_g_per_h, double ground_area_per_vine_m2);

struct DailyValue {
    Date date;
    std::optional<double> mm; // missing when no reliable sensor reported
};

struct TranspirationSeries {
    std::string plot_id;
    std::string treatment;
    std::vector<DailyValue> daily_t; // consecutive dates
    bool smoothed = false;
};

/// Per day: sum of ok hourly rates per reliable sensor, scaled to mm/day,
/// averaged across the reliable sensors with data that day. The optional
/// per-sensor coefficient carries upstream leaf-area scaling.
TranspirationSeries daily_transpiration(std::span<const QcResult> sensors, double ground_area_m2,
                                        const std::function<double(const std::string&)>& sensor_scale = {});

/// Centred moving average skipping missing values. The window shrinks
/// symmetrically at the edges (3 at the second/penultimate points, the raw value
/// at the endpoints). Interior holes wider than the window are bridged by
/// linear interpolation so the result has no missing values inside its span.
TranspirationSeries smooth_ma(const TranspirationSeries& series, int window = 5);

/// Serial reference of the smoothing kernel on a raw vector (NaN = missing).
std::vector<double> moving_average_serial(std::span<const double> values, int window);
/// OpenMP variant of moving_average_serial.
std::vector<double> moving_average(std::span<const double> values, int window);

} // namespace vws::sapflow
