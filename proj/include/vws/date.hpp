#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace vws {

/// Calendar date stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(int days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day);
    /// Parses `YYYY-MM-DD`; throws ValidationError otherwise.
    static Date parse(std::string_view text);

    constexpr int days() const noexcept { return days_; }
    int year() const;
    unsigned month() const;
    unsigned day() const;
    /// 1-based day of the year.
    int day_of_year() const;
    std::string to_string() const;

    constexpr Date operator+(int n) const noexcept { return Date(days_ + n); }
    constexpr Date operator-(int n) const noexcept { return Date(days_ - n); }
    constexpr int operator-(Date other) const noexcept { return days_ - other.days_; }
    constexpr auto operator<=>(const Date&) const = default;

private:
    int days_ = 0;
};

/// Local timestamp with minute resolution.
class DateTime {
public:
    constexpr DateTime() = default;
    constexpr DateTime(Date date, int minute_of_day) : minutes_(std::int64_t{date.days()} * 1440 + minute_of_day) {}

    /// Parses ISO-8601 `YYYY-MM-DDTHH:MM[:SS]` (a space separator is accepted).
    static DateTime parse(std::string_view text);

    Date date() const noexcept;
    int minute_of_day() const noexcept;
    double hour_of_day() const noexcept { return minute_of_day() / 60.0; }
    constexpr std::int64_t minutes() const noexcept { return minutes_; }
    std::string to_string() const;

    DateTime plus_minutes(std::int64_t m) const noexcept {
        DateTime r;
        r.minutes_ = minutes_ + m;
        return r;
    }
    constexpr auto operator<=>(const DateTime&) const = default;

private:
    std::int64_t minutes_ = 0;
};

} // namespace vws
