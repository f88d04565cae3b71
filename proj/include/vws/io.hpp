#pragma once

#include "vws/aggregate.hpp"
#include "vws/kstar.hpp"
#include "vws/meteo.hpp"
#include "vws/phenology.hpp"
#include "vws/sapflow.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vws::io {

inline constexpr const char* kMeteoHeader = "timestamp,temp_air,rel_humidity,wind_speed,solar_radiation,precipitation";
inline constexpr const char* kDailiesHeader = "date,t_mean,t_min,t_max,et_ref,vpd_max,gdd_cum";
inline constexpr const char* kSapHeader = "timestamp,sensor_id,plot_id,treatment,rate_g_per_h";
inline constexpr const char* kTranspirationHeader = "date,plot_id,treatment,t_mm_per_day,smoothed";
inline constexpr const char* kPhenologyHeader = "plot_id,stage,date";
inline constexpr const char* kLwpHeader = "date,plot_id,treatment,lwp_mpa";
inline constexpr const char* kFruitHeader =
    "date,plot_id,treatment,berry_weight,sugar,acidity,anthocyanins,assimilable_nitrogen";
inline constexpr const char* kRatioHeader = "date,gdd,ratio";
inline constexpr const char* kKsHeader = "date,plot_id,treatment,gdd,ks,clamped";

/// A row dropped during ingestion, with the reason.
struct RowIssue {
    std::size_t line = 0;
    std::string reason;
};

struct MeteoInput {
    std::vector<meteo::HourlyMeteoRecord> records; // sorted by timestamp
    std::vector<RowIssue> rejected;
};

/// Rows failing a physical-range check are rejected and reported; malformed
/// fields and duplicate timestamps raise.
MeteoInput parse_meteo(std::string_view text, const std::string& source = "<memory>");
std::string write_meteo(std::span<const meteo::HourlyMeteoRecord> records);

std::string write_dailies(std::span<const meteo::DailyMeteoRecord> dailies);
std::vector<meteo::DailyMeteoRecord> parse_dailies(std::string_view text, const std::string& source = "<memory>");

struct SapInput {
    std::vector<sapflow::SensorStream> sensors; // ordered by sensor id, records by time
    std::vector<RowIssue> rejected;
};
SapInput parse_sap(std::string_view text, const std::string& source = "<memory>");
std::string write_sap(std::span<const sapflow::SensorStream> sensors);

/// Raw then smoothed rows, each block in date order.
std::string write_transpiration(const sapflow::TranspirationSeries& raw, const sapflow::TranspirationSeries& smoothed);

/// Stage dates per plot, stage names normalized to their concept spelling.
using PhenologyDates = std::map<std::string, std::map<std::string, Date>>;
PhenologyDates parse_phenology(std::string_view text, const std::string& source = "<memory>");
std::string write_phenology(const PhenologyDates& dates);

std::vector<kstar::LwpRecord> parse_lwp(std::string_view text, const std::string& source = "<memory>");
std::string write_lwp(std::span<const kstar::LwpRecord> records);

std::vector<aggregate::FruitSample> parse_fruit(std::string_view text, const std::string& source = "<memory>");
std::string write_fruit(std::span<const aggregate::FruitSample> samples);

std::string write_ratio(const kstar::RatioSeries& ratio);

std::string write_ks(const kstar::KsSeries& ks);
kstar::KsSeries parse_ks(std::string_view text, const std::string& source = "<memory>");

} // namespace vws::io
