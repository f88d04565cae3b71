#pragma once

#include "vws/kstar.hpp"
#include "vws/phenology.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vws::aggregate {

struct FruitSample {
    std::string plot_id;
    std::string treatment;
    Date date;
    double berry_weight = 0.0; // g
    double sugar = 0.0;        // g/L
    double acidity = 0.0;      // gH2SO4/L
    std::optional<double> anthocyanins;
    std::optional<double> assimilable_nitrogen;
};

/// Longest run of missing daily Ks values bridged by interpolation.
inline constexpr int kMaxKsGapDays = 5;

/// Trapezoidal integral of Ks against gdd_cum over [start_gdd, end_gdd].
/// Values at the window ends are interpolated linearly.
double trapz_ks(const kstar::KsSeries& ks, double start_gdd, double end_gdd);

struct MaturityResult {
    std::optional<double> day; // fractional day number; nullopt when never reached
    std::vector<std::string> warnings;
};

/// First moment sugar/acidity reaches `threshold`, interpolating the ratio
/// linearly between sampling dates.
MaturityResult maturity_date(std::span<const FruitSample> samples, double threshold);

struct AggregateRecord {
    std::string site;
    std::string variety;
    std::string plot_id;
    std::string treatment;
    double nou_harv = 0.0;
    double nou_ver = 0.0;
    double ver_harv = 0.0;
    std::optional<double> ver_mat;
};

/// The four window integrals; VerMat is absent when the calendar has no
/// maturity. A maturity later than harvest is clipped to harvest.
AggregateRecord build_aggregates(const kstar::KsSeries& ks, const PhenologyCalendar& calendar);

inline constexpr const char* kAggregateHeader = "site,variety,treatment,nou_harv,nou_ver,ver_harv,ver_mat";

std::string to_csv(std::span<const AggregateRecord> records);
std::vector<AggregateRecord> parse_aggregates_csv(std::string_view text, const std::string& source = "<memory>");

} // namespace vws::aggregate
