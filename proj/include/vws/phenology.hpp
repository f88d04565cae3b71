#pragma once

#include "vws/date.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <string>

namespace vws {

/// Canonical stage concept names.
namespace stage {
inline constexpr const char* budbreak = "Budbreak";
inline constexpr const char* bloom = "Bloom";
inline constexpr const char* nouaison = "Nouaison";
inline constexpr const char* veraison = "Veraison";
inline constexpr const char* maturity = "Maturity";
inline constexpr const char* harvest = "Harvest";
} // namespace stage

/// When a stage was reached: a (possibly fractional) day number and the
/// cumulative thermal time at that moment.
struct StageTime {
    double day = 0.0;
    double gdd = 0.0;

    Date date() const { return Date(static_cast<int>(std::floor(day))); }
};

struct PhenologyCalendar {
    std::string plot_id;
    std::map<std::string, StageTime> stages;

    bool has(const std::string& name) const { return stages.count(name) != 0; }
    const StageTime& at(const std::string& name) const;
    std::optional<StageTime> find(const std::string& name) const;
};

} // namespace vws
