#include "doctest.h"

#include "oracles/oracles.hpp"
#include "vws/error.hpp"
#include "vws/meteo.hpp"
#include "vws/rng.hpp"

#include <cmath>

using namespace vws;
using namespace vws::meteo;

namespace {

SiteConfig site_at(double lat, double lon, double z, double utc) {
    SiteConfig s;
    s.id = "s";
    s.latitude_deg = lat;
    s.longitude_deg = lon;
    s.elevation_m = z;
    s.utc_offset_hours = utc;
    return s;
}

HourlyMeteoRecord rec(Date d, int minute, double t, double rh, double wind, double rs) {
    return HourlyMeteoRecord{DateTime(d, minute), t, rh, wind, rs, 0.0};
}

} // namespace

TEST_SUITE("meteo") {

TEST_CASE("saturation vapour pressure matches tabulated values") {
    // FAO-56 Annex 2, Table 2.3.
    CHECK(saturation_vapour_pressure(20.0) == doctest::Approx(2.338).epsilon(1e-3));
    CHECK(saturation_vapour_pressure(38.0) == doctest::Approx(6.625).epsilon(1e-3));
    CHECK(saturation_vapour_pressure(1.0) == doctest::Approx(0.657).epsilon(2e-3));
}

TEST_CASE("VPD bounds") {
    CHECK(compute_vpd(30.0, 100.0) == 0.0);
    CHECK(compute_vpd(30.0, 0.0) == doctest::Approx(saturation_vapour_pressure(30.0)));
    CHECK(compute_vpd(38.0, 52.0) == doctest::Approx(6.625 - 3.445).epsilon(2e-3));
    CHECK_THROWS_AS(compute_vpd(25.0, 120.0), ValidationError);
    CHECK_THROWS_AS(compute_vpd(25.0, -1.0), ValidationError);
}

TEST_CASE("hourly ETref reproduces the FAO-56 N'Diaye worked example") {
    // 1 October, 16°13'N 16°15'W, 8 m; the worked example takes the time-zone
    // centre at 15°W, one hour behind UTC.
    const auto site = site_at(16.0 + 13.0 / 60.0, -(16.0 + 15.0 / 60.0), 8.0, -1.0);
    const Date d = Date::from_ymd(2012, 10, 1);
    const double rs_wm2 = 2.450 / 0.0036;
    const auto day = fao56_hourly_terms(rec(d, 14 * 60 + 30, 38.0, 52.0, 3.3 * 3.6, rs_wm2), site);
    CHECK(day.es == doctest::Approx(6.625).epsilon(1e-3));
    CHECK(day.ea == doctest::Approx(3.445).epsilon(1e-3));
    CHECK(day.delta == doctest::Approx(0.358).epsilon(3e-3));
    CHECK(day.gamma == doctest::Approx(0.0673).epsilon(3e-3));
    CHECK(day.ra == doctest::Approx(3.543).epsilon(0.01));
    CHECK(day.rn == doctest::Approx(1.749).epsilon(0.01));
    CHECK(day.et_ref == doctest::Approx(0.63).epsilon(0.01));

    const auto night = fao56_hourly_terms(rec(d, 2 * 60 + 30, 28.0, 90.0, 1.9 * 3.6, 0.0), site);
    CHECK_FALSE(night.daytime);
    CHECK(night.rs_rso == doctest::Approx(0.8));
    CHECK(night.rn == doctest::Approx(-0.100).epsilon(0.05));
    CHECK(night.et_ref == doctest::Approx(0.0).epsilon(0.01));
}

TEST_CASE("hourly ETref agrees with the worksheet oracle on random weather") {
    Rng rng(7);
    const auto site = site_at(43.5, 3.9, 60.0, 1.0);
    const oracle::WorksheetSite ws{43.5, 3.9, 60.0, 1.0};
    for (int i = 0; i < 500; ++i) {
        const Date d = Date::from_ymd(2012, 1, 1) + static_cast<int>(rng.below(366));
        const int minute = static_cast<int>(rng.below(24)) * 60 + 30;
        const double t = rng.uniform(-5.0, 40.0), rh = rng.uniform(5.0, 100.0), w = rng.uniform(0.0, 30.0);
        const double rs = rng.uniform(0.0, 1000.0);
        const double lib = compute_etref_hourly(rec(d, minute, t, rh, w, rs), site);
        const auto o = oracle::fao56_worksheet({d.year(), static_cast<int>(d.month()), static_cast<int>(d.day()),
                                                minute / 60.0, t, rh, w, rs},
                                               ws);
        CHECK(lib == doctest::Approx(o.et_ref).epsilon(1e-9));
        CHECK(compute_vpd(t, rh) == doctest::Approx(o.vpd).epsilon(1e-12));
    }
}

TEST_CASE("missing site parameters raise a configuration error") {
    SiteConfig s;
    s.id = "bare";
    const auto r = rec(Date::from_ymd(2012, 6, 1), 720, 25.0, 50.0, 5.0, 600.0);
    CHECK_THROWS_AS(compute_etref_hourly(r, s), ConfigError);
    std::vector<HourlyMeteoRecord> v{r};
    CHECK_THROWS_AS(etref_hourly_batch(v, s), ConfigError);
}

TEST_CASE("batch kernel equals its serial reference and marks incomplete records") {
    Rng rng(3);
    const auto site = site_at(43.1, 3.1, 30.0, 1.0);
    std::vector<HourlyMeteoRecord> v;
    for (int h = 0; h < 24 * 20; ++h) {
        auto r = rec(Date::from_ymd(2012, 7, 1), 0, rng.uniform(10, 35), rng.uniform(20, 90), rng.uniform(0, 20),
                     rng.uniform(0, 900));
        r.timestamp = DateTime(Date::from_ymd(2012, 7, 1), 0).plus_minutes(h * 60);
        if (h % 37 == 0) r.wind_speed.reset();
        v.push_back(r);
    }
    const auto par = etref_hourly_batch(v, site);
    const auto ser = etref_hourly_batch_serial(v, site);
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
        if (std::isnan(ser[i]))
            CHECK(std::isnan(par[i]));
        else
            CHECK(par[i] == ser[i]);
    }
    CHECK(std::isnan(par[0]));
}

TEST_CASE("daily aggregation integrates the hourly polyline") {
    const auto site = site_at(43.1, 3.1, 30.0, 1.0);
    std::vector<HourlyMeteoRecord> v;
    const Date d0 = Date::from_ymd(2012, 6, 1);
    for (int h = 0; h <= 48; ++h) {
        HourlyMeteoRecord r = rec(d0, 0, 10.0 + h % 24, 60.0, 7.2, h % 24 >= 6 && h % 24 <= 19 ? 500.0 : 0.0);
        r.timestamp = DateTime(d0, 0).plus_minutes(h * 60);
        v.push_back(r);
    }
    const auto agg = daily_from_hourly(v, site);
    REQUIRE(agg.dailies.size() >= 2);
    const auto& day = agg.dailies[0];
    CHECK(day.date == d0);
    CHECK(day.t_min == doctest::Approx(10.0));
    CHECK(day.t_max == doctest::Approx(33.0));
    // Trapeze over 0..24 h of 10 + h with the next day's 00:00 sample (10 °C).
    double area = 0.0;
    for (int h = 0; h < 24; ++h) area += 0.5 * ((10.0 + h) + (h == 23 ? 10.0 : 11.0 + h));
    CHECK(day.t_mean == doctest::Approx(area / 24.0));

    const auto et = etref_hourly_batch_serial(v, site);
    double et_area = 0.0;
    for (int h = 0; h < 24; ++h) et_area += 0.5 * (et[h] + et[h + 1]);
    CHECK(day.et_ref == doctest::Approx(et_area).epsilon(1e-12));
    CHECK(day.vpd_max == doctest::Approx(compute_vpd(33.0, 60.0)));
}

TEST_CASE("days with long gaps are reported incomplete") {
    const auto site = site_at(43.1, 3.1, 30.0, 1.0);
    std::vector<HourlyMeteoRecord> v;
    const Date d0 = Date::from_ymd(2012, 6, 1);
    for (int h = 0; h <= 24; ++h) {
        if (h >= 8 && h <= 12) continue; // 6-hour hole
        HourlyMeteoRecord r = rec(d0, 0, 20.0, 60.0, 7.2, 300.0);
        r.timestamp = DateTime(d0, 0).plus_minutes(h * 60);
        v.push_back(r);
    }
    const auto agg = daily_from_hourly(v, site);
    REQUIRE_FALSE(agg.incomplete_days.empty());
    CHECK(agg.incomplete_days.front() == d0);
    CHECK_FALSE(agg.warnings.empty());
}

TEST_CASE("non-increasing timestamps are rejected") {
    const auto site = site_at(43.1, 3.1, 30.0, 1.0);
    const Date d0 = Date::from_ymd(2012, 6, 1);
    std::vector<HourlyMeteoRecord> v{rec(d0, 60, 20, 50, 5, 100), rec(d0, 60, 21, 50, 5, 100)};
    CHECK_THROWS_AS(daily_from_hourly(v, site), ValidationError);
}

TEST_CASE("thermal time accumulates from April 1 with base 10") {
    std::vector<DailyMeteoRecord> d;
    const Date start = Date::from_ymd(2012, 3, 30);
    const double temps[] = {20, 20, 15, 8, 12.5};
    for (int i = 0; i < 5; ++i) {
        DailyMeteoRecord r;
        r.date = start + i;
        r.t_mean = temps[i];
        d.push_back(r);
    }
    CHECK(default_gdd_origin(2012) == Date::from_ymd(2012, 4, 1));
    const auto g = thermal_time(d, default_gdd_origin(2012));
    REQUIRE(g.size() == 5);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == doctest::Approx(5.0));
    CHECK(g[3] == doctest::Approx(5.0));
    CHECK(g[4] == doctest::Approx(7.5));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] >= g[i - 1]);

    assign_thermal_time(d, default_gdd_origin(2012));
    CHECK(gdd_at(d, static_cast<double>((start + 4).days())) == doctest::Approx(7.5));
    CHECK(gdd_at(d, (start + 3).days() + 0.5) == doctest::Approx(6.25));

    d.erase(d.begin() + 3);
    CHECK_THROWS_AS(thermal_time(d, default_gdd_origin(2012)), ValidationError);
}

}
