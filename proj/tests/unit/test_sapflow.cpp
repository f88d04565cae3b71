#include "doctest.h"

#include "vws/error.hpp"
#include "vws/rng.hpp"
#include "vws/sapflow.hpp"

#include <cmath>
#include <limits>

using namespace vws;
using namespace vws::sapflow;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One record per hour; daytime is 06:00–19:59 under the fallback window.
SensorStream stream(const std::string& id, int days, double day_rate) {
    SensorStream s{id, "P1", "irrigated", {}};
    const DateTime t0(Date::from_ymd(2012, 6, 1), 0);
    for (int h = 0; h < 24 * days; ++h) {
        const int hour = h % 24;
        s.records.push_back({t0.plus_minutes(h * 60), hour >= 6 && hour < 20 ? day_rate : 0.0, QcFlag::ok});
    }
    return s;
}

std::size_t daytime_count(const SensorStream& s) {
    std::size_t n = 0;
    for (const auto& r : s.records)
        if (r.timestamp.minute_of_day() / 60 >= 6 && r.timestamp.minute_of_day() / 60 < 20) ++n;
    return n;
}

} // namespace

TEST_SUITE("sapflow") {

TEST_CASE("records are flagged by time of day and magnitude") {
    auto s = stream("a", 1, 100.0);
    s.records[10].rate_g_per_h = 0.5;    // weak
    s.records[11].rate_g_per_h = 6000.0; // above ceiling
    s.records[12].rate_g_per_h = -2.0;   // negative
    s.records[2].rate_g_per_h = 9000.0;  // at night: only flagged nighttime
    const auto r = qc_sensor(s, QcRuleset{});
    CHECK(r.stream.records[2].flag == QcFlag::nighttime);
    CHECK(r.stream.records[10].flag == QcFlag::weak);
    CHECK(r.stream.records[11].flag == QcFlag::erroneous);
    CHECK(r.stream.records[12].flag == QcFlag::erroneous);
    CHECK(r.stream.records[13].flag == QcFlag::ok);
    CHECK(r.daytime_records == 14);
    CHECK(r.filtered_daytime == 3);
}

TEST_CASE("a radiation lookup overrides the fallback night window") {
    auto s = stream("a", 1, 100.0);
    const SolarLookup dark = [](const DateTime&) -> std::optional<double> { return 0.0; };
    const auto r = qc_sensor(s, QcRuleset{}, dark);
    CHECK(r.daytime_records == 0);
    CHECK_FALSE(r.reliable);
    const SolarLookup bright = [](const DateTime&) -> std::optional<double> { return 500.0; };
    CHECK(qc_sensor(s, QcRuleset{}, bright).daytime_records == 24);
}

TEST_CASE("reliability requires strictly fewer than 5% filtered daytime records") {
    auto s = stream("a", 10, 100.0); // 140 daytime records
    REQUIRE(daytime_count(s) == 140);
    // 7 of 140 = 5% exactly: unreliable.
    int bad = 0;
    for (auto& r : s.records)
        if (r.rate_g_per_h > 0.0 && bad < 7) {
            r.rate_g_per_h = 0.2;
            ++bad;
        }
    auto q = qc_sensor(s, QcRuleset{});
    CHECK(q.filtered_fraction() == doctest::Approx(0.05));
    CHECK_FALSE(q.reliable);
    // 6 of 140 is below 5%: reliable.
    for (auto& r : s.records)
        if (r.rate_g_per_h == 0.2) {
            r.rate_g_per_h = 100.0;
            break;
        }
    q = qc_sensor(s, QcRuleset{});
    CHECK(q.reliable);
}

TEST_CASE("reliability is monotone in the number of corrupted records") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto s = stream("a", 5, 50.0);
        bool was_reliable = true;
        for (int k = 0; k < 30; ++k) {
            auto& r = s.records[6 + rng.below(14) + 24 * rng.below(5)];
            r.rate_g_per_h = 0.0;
            const bool now = qc_sensor(s, QcRuleset{}).reliable;
            CHECK((was_reliable || !now));
            was_reliable = now;
        }
    }
}

TEST_CASE("grams per hour convert to millimetres over the ground area") {
    CHECK(scale_to_mm(1000.0, 1.0) == doctest::Approx(1.0));
    CHECK(scale_to_mm(2500.0, 2.5) == doctest::Approx(1.0));
    CHECK_THROWS_AS(scale_to_mm(1.0, 0.0), ValidationError);
}

TEST_CASE("daily transpiration averages the reliable sensors only") {
    const auto a = qc_sensor(stream("a", 3, 100.0), QcRuleset{});
    const auto b = qc_sensor(stream("b", 3, 200.0), QcRuleset{});
    auto broken = stream("c", 3, 100.0);
    for (auto& r : broken.records) r.rate_g_per_h = 0.1;
    const auto c = qc_sensor(broken, QcRuleset{});
    REQUIRE_FALSE(c.reliable);
    std::vector<QcResult> all{b, c, a};
    const auto t = daily_transpiration(all, 2.0);
    REQUIRE(t.daily_t.size() == 3);
    // 14 daytime hours: 1.4 kg and 2.8 kg over 2 m² → 0.7 and 1.4 mm.
    for (const auto& d : t.daily_t) CHECK(*d.mm == doctest::Approx(1.05));

    const auto scaled = daily_transpiration(all, 2.0, [](const std::string& id) { return id == "b" ? 0.5 : 1.0; });
    CHECK(*scaled.daily_t[0].mm == doctest::Approx(0.7));

    std::vector<QcResult> none{c};
    CHECK_THROWS_AS(daily_transpiration(none, 2.0), ValidationError);
}

TEST_CASE("days without any reliable reading stay missing") {
    auto s = stream("a", 4, 100.0);
    // Drop the records of the third day entirely.
    std::erase_if(s.records, [](const SapRecord& r) { return r.timestamp.date() == Date::from_ymd(2012, 6, 3); });
    std::vector<QcResult> q{qc_sensor(s, QcRuleset{})};
    const auto t = daily_transpiration(q, 1.0);
    REQUIRE(t.daily_t.size() == 4);
    CHECK_FALSE(t.daily_t[2].mm.has_value());
}

TEST_CASE("moving average shrinks its window at the edges") {
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 10};
    const auto m = moving_average_serial(v, 5);
    CHECK(m[0] == 1.0);
    CHECK(m[1] == doctest::Approx(2.0));
    CHECK(m[2] == doctest::Approx(3.0));
    CHECK(m[3] == doctest::Approx(4.0));
    CHECK(m[4] == doctest::Approx((3 + 4 + 5 + 6 + 10) / 5.0));
    CHECK(m[5] == doctest::Approx((5 + 6 + 10) / 3.0));
    CHECK(m[6] == 10.0);
    CHECK_THROWS_AS(moving_average_serial(v, 4), ValidationError);
    CHECK_THROWS_AS(moving_average_serial(std::vector<double>{1, 2}, 5), ValidationError);
}

TEST_CASE("moving average skips missing values and matches the serial reference") {
    Rng rng(5);
    std::vector<double> v(400);
    for (auto& x : v) x = rng.uniform() < 0.1 ? kNaN : rng.uniform(0.0, 5.0);
    const auto a = moving_average(v, 5);
    const auto b = moving_average_serial(v, 5);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (std::isnan(b[i]))
            CHECK(std::isnan(a[i]));
        else
            CHECK(a[i] == b[i]);
    }
    const std::vector<double> w{1, kNaN, 3, 5, 7};
    CHECK(moving_average_serial(w, 3)[1] == doctest::Approx(2.0));
}

TEST_CASE("smoothing preserves constants and fills interior holes") {
    TranspirationSeries s{"P", "T", {}, false};
    for (int i = 0; i < 30; ++i) s.daily_t.push_back({Date::from_ymd(2012, 6, 1) + i, 2.5});
    for (int i = 10; i < 18; ++i) s.daily_t[i].mm.reset();
    s.daily_t[0].mm.reset();
    const auto sm = smooth_ma(s, 5);
    CHECK(sm.smoothed);
    REQUIRE(sm.daily_t.size() == 29); // leading missing day trimmed
    for (const auto& d : sm.daily_t) {
        REQUIRE(d.mm.has_value());
        CHECK(*d.mm == doctest::Approx(2.5));
    }
}

TEST_CASE("smoothed values stay within the range of the raw values") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        TranspirationSeries s{"P", "T", {}, false};
        double lo = 1e9, hi = -1e9;
        for (int i = 0; i < 60; ++i) {
            std::optional<double> v;
            if (rng.uniform() > 0.15 || i == 0 || i == 59) {
                v = rng.uniform(0.0, 4.0);
                lo = std::min(lo, *v);
                hi = std::max(hi, *v);
            }
            s.daily_t.push_back({Date::from_ymd(2012, 5, 1) + i, v});
        }
        for (const auto& d : smooth_ma(s, 5).daily_t) {
            CHECK(*d.mm >= lo - 1e-12);
            CHECK(*d.mm <= hi + 1e-12);
        }
    }
}

}
