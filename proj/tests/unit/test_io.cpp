#include "doctest.h"

#include "vws/error.hpp"
#include "vws/io.hpp"

#include <string>

using namespace vws;
using namespace vws::io;

namespace {

std::string meteo_text(const std::vector<std::string>& rows) {
    std::string s = std::string(kMeteoHeader) + "\n";
    for (const auto& r : rows) s += r + "\n";
    return s;
}

} // namespace

TEST_SUITE("io") {

TEST_CASE("meteo rows outside physical ranges are rejected with their line") {
    const auto in = parse_meteo(meteo_text({"2012-06-01T00:30,18.0,70,5,0,0", "2012-06-01T01:30,17.5,120,5,0,0",
                                            "2012-06-01T02:30,17.0,80,-3,0,0", "2012-06-01T03:30,16.5,85,4,0,"}));
    CHECK(in.records.size() == 2);
    REQUIRE(in.rejected.size() == 2);
    CHECK(in.rejected[0].line == 3);
    CHECK(in.rejected[0].reason.find("rel_humidity") != std::string::npos);
    CHECK(in.rejected[1].line == 4);
    CHECK_FALSE(in.records[1].precipitation.has_value());
}

TEST_CASE("duplicate meteo timestamps raise and name both lines") {
    try {
        parse_meteo(meteo_text({"2012-06-01T00:30,18,70,5,0,0", "2012-06-01T00:30,18,70,5,0,0"}));
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("duplicate") != std::string::npos);
        CHECK(msg.find("lines 2 3") != std::string::npos);
    }
}

TEST_CASE("malformed fields raise a located error") {
    try {
        parse_meteo(meteo_text({"2012-06-01T00:30,warm,70,5,0,0"}));
        FAIL("expected an error");
    } catch (const CsvError& e) {
        CHECK(e.line() == 2);
        CHECK(e.column() == 2);
    }
    CHECK_THROWS_AS(parse_meteo("timestamp,temp\n"), ValidationError);
}

TEST_CASE("meteo records are sorted and round-trip") {
    const auto in = parse_meteo(meteo_text({"2012-06-01T02:30,18,70,5,0,0", "2012-06-01T01:30,17,75,4,0,0.2"}));
    REQUIRE(in.records.size() == 2);
    CHECK(in.records[0].timestamp < in.records[1].timestamp);
    const auto back = parse_meteo(write_meteo(in.records));
    REQUIRE(back.records.size() == 2);
    CHECK(*back.records[0].precipitation == doctest::Approx(0.2));
}

TEST_CASE("sap-flow rows are grouped by sensor") {
    const std::string text = std::string(kSapHeader) +
                             "\n2012-06-01T10:00,s2,P1,irrigated,120.5\n2012-06-01T10:00,s1,P1,irrigated,100\n"
                             "2012-06-01T09:00,s1,P1,irrigated,90\n2012-06-01T11:00,s1,P1,irrigated,\n";
    const auto in = parse_sap(text);
    REQUIRE(in.sensors.size() == 2);
    CHECK(in.sensors[0].sensor_id == "s1");
    REQUIRE(in.sensors[0].records.size() == 2);
    CHECK(in.sensors[0].records[0].rate_g_per_h == 90.0);
    CHECK(in.rejected.size() == 1);
    CHECK_THROWS_AS(parse_sap(std::string(kSapHeader) + "\n2012-06-01T10:00,s1,P1,irrigated,1\n"
                                                        "2012-06-01T10:00,s1,P1,irrigated,2\n"),
                    ValidationError);
}

TEST_CASE("phenology stage names are normalized") {
    const auto p = parse_phenology(std::string(kPhenologyHeader) + "\nP1,budbreak,2012-04-05\nP1,VERAISON,2012-07-20\n");
    CHECK(p.at("P1").at("Budbreak") == Date::from_ymd(2012, 4, 5));
    CHECK(p.at("P1").at("Veraison") == Date::from_ymd(2012, 7, 20));
    CHECK_THROWS_AS(parse_phenology(std::string(kPhenologyHeader) + "\nP1,flowering,2012-04-05\n"), ValidationError);
    const auto again = parse_phenology(write_phenology(p));
    CHECK(again == p);
}

TEST_CASE("LWP readings must be non-positive and unique per day") {
    const auto l = parse_lwp(std::string(kLwpHeader) + "\n2012-06-01,P1,irrigated,-0.25\n");
    REQUIRE(l.size() == 1);
    CHECK(l[0].lwp_mpa == -0.25);
    CHECK_THROWS_AS(parse_lwp(std::string(kLwpHeader) + "\n2012-06-01,P1,irrigated,0.3\n"), ValidationError);
    CHECK_THROWS_AS(parse_lwp(std::string(kLwpHeader) + "\n2012-06-01,P1,irrigated,-0.2\n2012-06-01,P1,irrigated,-0.3\n"),
                    ValidationError);
    CHECK(parse_lwp(write_lwp(l)).size() == 1);
}

TEST_CASE("fruit samples keep optional columns") {
    const auto f = parse_fruit(std::string(kFruitHeader) + "\n2012-08-01,P1,rainfed,1.4,180,6.5,NA,\n");
    REQUIRE(f.size() == 1);
    CHECK(f[0].sugar == 180.0);
    CHECK_FALSE(f[0].anthocyanins.has_value());
    CHECK(parse_fruit(write_fruit(f))[0].acidity == doctest::Approx(6.5));
}

TEST_CASE("Ks series round-trip with missing values") {
    kstar::KsSeries ks{"P1", "irrigated", {}};
    ks.points.push_back({Date::from_ymd(2012, 6, 1), 500.5, 0.75, false});
    ks.points.push_back({Date::from_ymd(2012, 6, 2), 510.0, std::nullopt, false});
    ks.points.push_back({Date::from_ymd(2012, 6, 3), 520.0, 1.2, true});
    const auto back = parse_ks(write_ks(ks));
    REQUIRE(back.points.size() == 3);
    CHECK(back.plot_id == "P1");
    CHECK(*back.points[0].ks == doctest::Approx(0.75));
    CHECK_FALSE(back.points[1].ks.has_value());
    CHECK(back.points[2].clamped);
}

TEST_CASE("dailies round-trip") {
    meteo::DailyMeteoRecord d;
    d.date = Date::from_ymd(2012, 6, 1);
    d.t_mean = 21.5;
    d.t_min = 14.0;
    d.t_max = 29.0;
    d.et_ref = 5.25;
    d.vpd_max = 2.75;
    d.gdd_cum = 400.5;
    std::vector<meteo::DailyMeteoRecord> v{d};
    const auto text = write_dailies(v);
    CHECK(text.rfind(kDailiesHeader, 0) == 0);
    const auto back = parse_dailies(text);
    REQUIRE(back.size() == 1);
    CHECK(back[0].et_ref == doctest::Approx(5.25));
    CHECK(back[0].gdd_cum == doctest::Approx(400.5));
}

}
