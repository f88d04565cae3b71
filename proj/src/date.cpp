#include "vws/date.hpp"

#include "vws/error.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace vws {

namespace {

std::chrono::year_month_day ymd_of(int days) {
    return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days}}};
}

int parse_int(std::string_view s, std::string_view whole) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError("malformed date/time '" + std::string(whole) + "'");
    return v;
}

} // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok())
        throw ValidationError("invalid calendar date " + std::to_string(year) + "-" + std::to_string(month) + "-" +
                              std::to_string(day));
    return Date(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

Date Date::parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw ValidationError("malformed date '" + std::string(text) + "', expected YYYY-MM-DD");
    return from_ymd(parse_int(text.substr(0, 4), text), static_cast<unsigned>(parse_int(text.substr(5, 2), text)),
                    static_cast<unsigned>(parse_int(text.substr(8, 2), text)));
}

int Date::year() const { return static_cast<int>(ymd_of(days_).year()); }
unsigned Date::month() const { return static_cast<unsigned>(ymd_of(days_).month()); }
unsigned Date::day() const { return static_cast<unsigned>(ymd_of(days_).day()); }

int Date::day_of_year() const { return days_ - from_ymd(year(), 1, 1).days() + 1; }

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
    return buf;
}

DateTime DateTime::parse(std::string_view text) {
    if (text.size() < 16 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':')
        throw ValidationError("malformed timestamp '" + std::string(text) + "', expected YYYY-MM-DDTHH:MM");
    Date d = Date::parse(text.substr(0, 10));
    int hh = parse_int(text.substr(11, 2), text);
    int mm = parse_int(text.substr(14, 2), text);
    if (text.size() > 16) {
        if (text.size() != 19 || text[16] != ':')
            throw ValidationError("malformed timestamp '" + std::string(text) + "'");
        int ss = parse_int(text.substr(17, 2), text);
        if (ss < 0 || ss > 59)
            throw ValidationError("malformed timestamp '" + std::string(text) + "'");
    }
    if (hh < 0 || hh > 23 || mm < 0 || mm > 59)
        throw ValidationError("malformed timestamp '" + std::string(text) + "'");
    return DateTime(d, hh * 60 + mm);
}

Date DateTime::date() const noexcept {
    std::int64_t d = minutes_ >= 0 ? minutes_ / 1440 : -((-minutes_ + 1439) / 1440);
    return Date(static_cast<int>(d));
}

int DateTime::minute_of_day() const noexcept {
    return static_cast<int>(minutes_ - std::int64_t{date().days()} * 1440);
}

std::string DateTime::to_string() const {
    char buf[32];
    int m = minute_of_day();
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d", date().to_string().c_str(), m / 60, m % 60);
    return buf;
}

} // namespace vws
