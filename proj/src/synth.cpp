#include "vws/synth.hpp"

#include "vws/csv.hpp"
#include "vws/io.hpp"
#include "vws/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vws::synth {

namespace {

double triangle(double u, double a, double b) {
    const double m = 0.5 * (a + b);
    if (u <= a || u >= b) return 0.0;
    return u < m ? (u - a) / (m - a) : (b - u) / (b - m);
}

std::vector<double> ma5(const std::vector<double>& raw) {
    std::vector<double> out(raw.size());
    const std::size_t n = raw.size();
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t h = (j == 0 || j + 1 == n) ? 0 : (j == 1 || j + 2 == n) ? 1 : 2;
        double s = 0.0;
        for (std::size_t k = j - h; k <= j + h; ++k) s += raw[k];
        out[j] = s / static_cast<double>(2 * h + 1);
    }
    return out;
}

cart::Dataset cart_predictors(std::size_t n, std::size_t p, Rng& rng) {
    cart::Dataset d;
    for (std::size_t v = 0; v < p; ++v) {
        cart::Predictor pr;
        pr.name = "x" + std::to_string(v + 1);
        pr.categorical = rng.uniform() < 0.25;
        if (pr.categorical) {
            const std::size_t k = 2 + rng.below(4);
            for (std::size_t l = 0; l < k; ++l) pr.levels.push_back(std::string(1, static_cast<char>('a' + l)));
            for (std::size_t i = 0; i < n; ++i) pr.values.push_back(static_cast<double>(rng.below(k)));
        } else {
            // A coarse grid in some columns produces tied values.
            const bool coarse = rng.uniform() < 0.3;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = rng.uniform(0.0, 10.0);
                pr.values.push_back(coarse ? std::round(x) : x);
            }
        }
        d.predictors.push_back(std::move(pr));
    }
    return d;
}

} // namespace

double three_peak_beta(double u) {
    return triangle(u, 0.10, 0.25) - triangle(u, 0.40, 0.55) + triangle(u, 0.70, 0.85);
}

FunctionalData functional(std::size_t n, std::uint64_t seed, double noise, double (*beta)(double), std::size_t p) {
    FunctionalData out;
    out.grid = flrti::make_grid(0.0, 1.0, p);
    for (double u : out.grid) out.truth.push_back(beta(u));
    const auto w = flrti::trapezoid_weights(out.grid);
    Rng rng(seed);
    out.samples.resize(n);
    for (auto& s : out.samples) {
        const double onset = rng.uniform(0.1, 0.6), depth = rng.uniform(0.2, 0.7);
        double e = 0.0;
        std::vector<double> raw;
        for (double u : out.grid) {
            e = 0.6 * e + 0.08 * rng.normal();
            raw.push_back(1.0 - depth * std::max(0.0, u - onset) / (1.0 - onset) + e);
        }
        s.x = ma5(raw);
        s.y = 0.0;
        for (std::size_t j = 0; j < p; ++j) s.y += w[j] * s.x[j] * out.truth[j];
    }
    double mean = 0.0, ss = 0.0;
    for (const auto& s : out.samples) mean += s.y;
    mean /= static_cast<double>(n);
    for (const auto& s : out.samples) ss += (s.y - mean) * (s.y - mean);
    out.signal_sd = std::sqrt(ss / static_cast<double>(n));
    const double sd = out.signal_sd > 0.0 ? noise * out.signal_sd : noise;
    for (auto& s : out.samples) s.y += sd * rng.normal();
    return out;
}

cart::Dataset cart_random(std::size_t n, std::size_t p, std::uint64_t seed) {
    Rng rng(seed);
    cart::Dataset d = cart_predictors(n, p, rng);
    const auto& x = d.predictors.front();
    for (std::size_t i = 0; i < n; ++i) {
        const double signal = x.categorical ? 2.0 * x.values[i] : (x.values[i] > 5.0 ? 3.0 : 0.0);
        d.y.push_back(signal + rng.normal());
    }
    return d;
}

cart::Dataset cart_noise(std::size_t n, std::size_t p, std::uint64_t seed) {
    Rng rng(seed);
    cart::Dataset d = cart_predictors(n, p, rng);
    for (std::size_t i = 0; i < n; ++i) d.y.push_back(rng.normal());
    return d;
}

DailySeason daily_season(std::uint64_t seed) {
    Rng rng(seed);
    DailySeason s;
    const Date start = Date::from_ymd(2012, 4, 1);
    const int days = 190;
    double gdd = 0.0, anomaly = 0.0;
    for (int i = 0; i < days; ++i) {
        meteo::DailyMeteoRecord d;
        d.date = start + i;
        anomaly = 0.7 * anomaly + 1.5 * rng.normal();
        d.t_mean = 15.0 + 9.0 * std::sin(std::numbers::pi * i / 200.0) + anomaly;
        d.t_min = d.t_mean - 6.0;
        d.t_max = d.t_mean + 6.0;
        d.et_ref = std::max(0.5, 2.5 + 3.0 * std::sin(std::numbers::pi * i / 190.0) + 0.4 * rng.normal());
        d.vpd_max = std::max(0.3, 1.2 + 2.0 * std::sin(std::numbers::pi * i / 190.0) + 0.8 * rng.normal());
        d.vpd_mean = 0.5 * d.vpd_max;
        gdd += std::max(0.0, d.t_mean - meteo::kGddBaseTemp);
        d.gdd_cum = gdd;
        s.dailies.push_back(d);
    }
    auto at_day = [&](int i) { return StageTime{static_cast<double>(s.dailies[i].date.days()), s.dailies[i].gdd_cum}; };
    const int budbreak = 5 + static_cast<int>(rng.below(15));
    const int bloom = 55 + static_cast<int>(rng.below(15));
    const int veraison = 110 + static_cast<int>(rng.below(20));
    const int harvest = 160 + static_cast<int>(rng.below(20));
    s.calendar.plot_id = "P";
    s.calendar.stages[stage::budbreak] = at_day(budbreak);
    s.calendar.stages[stage::bloom] = at_day(bloom);
    s.calendar.stages[stage::veraison] = at_day(veraison);
    s.calendar.stages[stage::harvest] = at_day(harvest);

    // Canopy-driven ratio: sigmoid rise, plateau, optional dip; stress onset somewhere in summer.
    const double kmax = rng.uniform(0.35, 0.9);
    const int mid = budbreak + 20 + static_cast<int>(rng.below(40));
    const double width = rng.uniform(4.0, 14.0);
    const int stress = bloom + static_cast<int>(rng.below(90));
    const double noise = rng.uniform(0.0, 0.06);
    sapflow::TranspirationSeries raw{"P", "T", {}, false};
    for (int i = 0; i < days; ++i) {
        double k = kmax / (1.0 + std::exp(-(i - mid) / width));
        if (i > stress) k *= std::max(0.3, 1.0 - 0.01 * (i - stress));
        k *= 1.0 + noise * rng.normal();
        std::optional<double> t = std::max(0.0, k * s.dailies[i].et_ref);
        if (rng.uniform() < 0.03) t.reset();
        raw.daily_t.push_back({s.dailies[i].date, t});
    }
    s.smoothed = sapflow::smooth_ma(raw, 5);
    for (int i = 50; i < days; i += 7) {
        const double deficit = i > stress ? std::min(1.0, 0.012 * (i - stress)) : 0.0;
        s.lwp.push_back({s.dailies[i].date, "P", "T", std::min(-0.02, -0.12 - 0.8 * deficit + 0.03 * rng.normal())});
    }
    return s;
}

// ---------------------------------------------------------------- fixture project

namespace {

struct SiteSpec {
    std::string id;
    double lat, lon, elevation;
    std::string region;
    double warmth; // °C offset of the seasonal mean
};

struct PlotSpec {
    std::string id, site, variety;
    double kmax;        // canopy plateau of T/ETref
    double bloom_shift; // GDD
};

double sun_sin_elevation(const DateTime& t, const SiteSpec& s, double utc_offset) {
    constexpr double pi = std::numbers::pi;
    const int doy = t.date().day_of_year();
    const double decl = 0.409 * std::sin(2.0 * pi / 365.0 * doy - 1.39);
    const double solar_hour = t.hour_of_day() - utc_offset + s.lon / 15.0;
    const double omega = pi / 12.0 * (solar_hour - 12.0);
    const double phi = s.lat * pi / 180.0;
    return std::sin(phi) * std::sin(decl) + std::cos(phi) * std::cos(decl) * std::cos(omega);
}

std::vector<meteo::HourlyMeteoRecord> hourly_weather(const SiteSpec& s, Date first, int days, double utc_offset,
                                                     Rng& rng) {
    constexpr double pi = std::numbers::pi;
    std::vector<meteo::HourlyMeteoRecord> out;
    double anomaly = 0.0;
    for (int d = 0; d < days; ++d) {
        const Date date = first + d;
        const int doy = date.day_of_year();
        anomaly = 0.75 * anomaly + 1.2 * rng.normal();
        const double season = std::sin(2.0 * pi * (doy - 105) / 365.0);
        const double t_mean = 16.5 + s.warmth + 7.5 * season + anomaly;
        const bool rainy = rng.uniform() < 0.08 - 0.065 * std::max(0.0, season);
        const double clear = rainy ? rng.uniform(0.25, 0.5) : rng.uniform(0.8, 1.0);
        const double amp = 3.0 + 4.0 * clear;
        const double rh_mean = std::clamp(62.0 - 12.0 * season + (rainy ? 15.0 : 0.0) + 6.0 * rng.normal(), 30.0, 90.0);
        const double wind = 6.0 + 6.0 * rng.uniform();
        for (int h = 0; h < 24; ++h) {
            meteo::HourlyMeteoRecord r;
            r.timestamp = DateTime(date, h * 60);
            const double t = t_mean + amp * std::cos(2.0 * pi * (h - 15) / 24.0);
            r.temp_air = std::round(t * 10.0) / 10.0;
            r.rel_humidity = std::round(std::clamp(rh_mean - 2.4 * (t - t_mean), 12.0, 99.0) * 10.0) / 10.0;
            r.wind_speed = std::round((wind * (1.0 + 0.35 * std::sin(2.0 * pi * (h - 9) / 24.0))) * 10.0) / 10.0;
            const double se = sun_sin_elevation(r.timestamp, s, utc_offset);
            r.solar_radiation = std::round(std::max(0.0, 1050.0 * clear * std::pow(std::max(0.0, se), 1.15)));
            r.precipitation = rainy && h >= 14 && h < 17 ? 1.6 : 0.0;
            out.push_back(r);
        }
    }
    return out;
}

} // namespace

void write_fixture_project(const std::filesystem::path& dir, std::uint64_t seed) {
    namespace fs = std::filesystem;
    using nlohmann::json;
    Rng rng(seed);
    const double utc_offset = 1.0;
    const Date first = Date::from_ymd(2012, 3, 25);
    const int days = 200; // through 2012-10-10
    const std::vector<SiteSpec> sites{{"pech_rouge", 43.14, 3.13, 30.0, "languedoc", 0.6},
                                      {"villeneuve", 43.53, 3.85, 60.0, "languedoc", 0.0}};
    const std::vector<PlotSpec> plots{{"PR1", "pech_rouge", "syrah", 0.62, 0.0},
                                      {"PR2", "pech_rouge", "grenache", 0.55, 30.0},
                                      {"PR3", "pech_rouge", "mourvedre", 0.50, 60.0},
                                      {"VL1", "villeneuve", "syrah", 0.66, 10.0},
                                      {"VL2", "villeneuve", "grenache", 0.58, 40.0},
                                      {"VL3", "villeneuve", "carignan", 0.52, 20.0}};
    const std::vector<std::string> treatments{"irrigated", "rainfed"};
    const std::map<std::string, double> maturity{{"syrah", 30.0}, {"grenache", 32.0}, {"mourvedre", 28.0},
                                                 {"carignan", 29.0}};
    const double area = 2.5;

    json cfg;
    cfg["seed"] = 20120;
    cfg["knowledge_file"] = "knowledge.json";
    for (const auto& s : sites)
        cfg["sites"][s.id] = {{"latitude", s.lat},     {"longitude", s.lon},    {"elevation", s.elevation},
                              {"utc_offset", utc_offset}, {"region", s.region}};
    cfg["plots"] = json::array();
    cfg["nouaison_shift_gdd"] = 100.0;
    cfg["flrti"] = {{"n_perm", 0}};

    // Knowledge: the shipped default plus maturity thresholds per variety.
    json kb = json::parse(knowledge::default_knowledge_document());
    for (const auto& [v, r] : maturity) kb["levels"]["maturity_ratio"][v] = r;

    std::map<std::string, std::vector<meteo::DailyMeteoRecord>> dailies;
    std::map<std::string, std::vector<meteo::HourlyMeteoRecord>> hourly;
    for (const auto& s : sites) {
        hourly[s.id] = hourly_weather(s, first, days, utc_offset, rng);
        meteo::SiteConfig sc;
        sc.id = s.id;
        sc.latitude_deg = s.lat;
        sc.longitude_deg = s.lon;
        sc.elevation_m = s.elevation;
        sc.utc_offset_hours = utc_offset;
        auto agg = meteo::daily_from_hourly(hourly[s.id], sc);
        meteo::assign_thermal_time(agg.dailies, Date::from_ymd(2012, 4, 1));
        dailies[s.id] = agg.dailies;
        csv::write_text((dir / "raw" / ("meteo_" + s.id + ".csv")).string(), io::write_meteo(hourly[s.id]));
    }

    io::PhenologyDates phen;
    std::vector<sapflow::SensorStream> sensors;
    std::vector<kstar::LwpRecord> lwp;
    std::vector<aggregate::FruitSample> fruit;
    for (const auto& p : plots) {
        const auto& dl = dailies[p.site];
        auto day_at_gdd = [&](double g) {
            for (const auto& d : dl)
                if (d.gdd_cum >= g) return d.date;
            return dl.back().date;
        };
        auto index_of = [&](Date d) { return static_cast<std::size_t>(d - dl.front().date); };
        const double g_budbreak = 45.0 + rng.uniform(0.0, 20.0);
        const double g_bloom = 380.0 + p.bloom_shift;
        const double g_veraison = 1180.0 + p.bloom_shift + rng.uniform(-30.0, 30.0);
        const double g_harvest = 1700.0 + 1.5 * p.bloom_shift + rng.uniform(-40.0, 40.0);
        phen[p.id][stage::budbreak] = day_at_gdd(g_budbreak);
        phen[p.id][stage::bloom] = day_at_gdd(g_bloom);
        phen[p.id][stage::veraison] = day_at_gdd(g_veraison);
        phen[p.id][stage::harvest] = day_at_gdd(g_harvest);

        json plot_cfg{{"id", p.id}, {"site", p.site}, {"variety", p.variety}, {"area_m2", area},
                      {"treatments", treatments}, {"sensor_scale", json::object()}};
        for (const auto& t : treatments) {
            const bool irrigated = t == "irrigated";
            // Canopy plateau reached near bloom; stress sets in later under irrigation.
            const double g_mid = g_bloom - 170.0 + rng.uniform(-20.0, 20.0);
            const double g_width = 55.0 + rng.uniform(0.0, 10.0);
            const double g_stress = g_mid + 2.0 * g_width + (irrigated ? 50.0 : 45.0) + rng.uniform(-15.0, 15.0);
            const double decline = irrigated ? 0.0008 : 0.0012; // per GDD
            const double ks_floor = irrigated ? 0.55 : 0.3;
            std::vector<double> ks_true(dl.size()), t_mm(dl.size());
            double wobble = 0.0;
            // Stomatal regulation damps the response to single-day demand peaks.
            std::vector<double> demand(dl.size());
            for (std::size_t i = 0; i < dl.size(); ++i) {
                double m = 0.0;
                int c = 0;
                for (std::size_t j = i >= 6 ? i - 6 : 0; j <= i; ++j, ++c) m += dl[j].et_ref;
                demand[i] = std::sqrt(std::max(0.0, dl[i].et_ref) * m / c);
            }
            for (std::size_t i = 0; i < dl.size(); ++i) {
                const double g = dl[i].gdd_cum;
                const double kcb = g < g_budbreak ? 0.0 : p.kmax / (1.0 + std::exp(-(g - g_mid) / g_width));
                ks_true[i] = g > g_stress ? std::max(ks_floor, 1.0 - decline * (g - g_stress)) : 1.0;
                wobble = 0.5 * wobble + 0.012 * rng.normal();
                t_mm[i] = std::max(0.0, kcb * ks_true[i] * (1.0 + wobble) * demand[i]);
            }
            for (int k = 1; k <= 2; ++k) {
                sapflow::SensorStream s;
                s.sensor_id = p.id + "-" + t.substr(0, 3) + "-" + std::to_string(k);
                s.plot_id = p.id;
                s.treatment = t;
                const double scale = k == 2 ? 1.08 : 1.0;
                if (scale != 1.0) plot_cfg["sensor_scale"][s.sensor_id] = scale;
                // One sensor misbehaves badly enough to fail the reliability rule.
                const double bad_rate = (p.id == "PR2" && t == "rainfed" && k == 2) ? 0.12 : 0.002;
                const auto& hw = hourly[p.site];
                // Sensors are installed once the canopy has leafed out.
                for (std::size_t day = 0; day < dl.size(); ++day) {
                    if (dl[day].gdd_cum < 200.0) continue;
                    double weight_sum = 0.0;
                    for (int h = 0; h < 24; ++h) {
                        const auto& rec = hw[day * 24 + h];
                        if (*rec.solar_radiation >= 10.0) weight_sum += *rec.solar_radiation;
                    }
                    const double grams = t_mm[day] * area * 1000.0 / scale;
                    const double day_factor = 1.0 + 0.02 * rng.normal();
                    for (int h = 0; h < 24; ++h) {
                        const auto& rec = hw[day * 24 + h];
                        sapflow::SapRecord r;
                        r.timestamp = rec.timestamp;
                        double rate = 0.4;
                        if (*rec.solar_radiation >= 10.0 && weight_sum > 0.0) {
                            rate = grams * *rec.solar_radiation / weight_sum * day_factor * (1.0 + 0.05 * rng.normal());
                            if (rng.uniform() < bad_rate) rate = 6000.0 + 3000.0 * rng.uniform();
                        }
                        r.rate_g_per_h = std::round(std::max(0.0, rate) * 10.0) / 10.0;
                        s.records.push_back(r);
                    }
                }
                sensors.push_back(std::move(s));
            }
            // Weekly predawn readings from mid-May.
            for (Date d = Date::from_ymd(2012, 5, 14); d <= phen[p.id][stage::harvest]; d = d + 7) {
                const double v = -0.1 - 1.6 * (1.0 - ks_true[index_of(d)]) + 0.02 * rng.normal();
                lwp.push_back({d, p.id, t, std::round(std::min(-0.02, v) * 100.0) / 100.0});
            }
            // Fruit sampling from a week before veraison to harvest.
            double mean_ks = 0.0;
            int count = 0;
            for (std::size_t i = index_of(phen[p.id][stage::bloom]); i <= index_of(phen[p.id][stage::veraison]); ++i) {
                mean_ks += ks_true[i];
                ++count;
            }
            mean_ks /= count;
            const double size = 0.9 + 0.9 * mean_ks + (p.variety == "grenache" ? 0.25 : 0.0) + 0.05 * rng.normal();
            std::vector<Date> samples;
            for (Date d = phen[p.id][stage::veraison] - 7; d < phen[p.id][stage::harvest]; d = d + 7) samples.push_back(d);
            samples.push_back(phen[p.id][stage::harvest]);
            for (Date d : samples) {
                const double g = dl[index_of(d)].gdd_cum - g_veraison;
                aggregate::FruitSample f;
                f.plot_id = p.id;
                f.treatment = t;
                f.date = d;
                f.berry_weight = std::round(size * (0.75 + 0.25 * std::min(1.0, std::max(0.0, (g + 200.0) / 600.0))) *
                                            1000.0) / 1000.0;
                f.sugar = std::round(245.0 / (1.0 + std::exp(-(g - 150.0) / 120.0)) * (1.0 + 0.02 * rng.normal()) * 10.0) / 10.0;
                f.acidity = std::round((4.0 + 20.0 * std::exp(-std::max(0.0, g) / 260.0)) * (1.0 + 0.02 * rng.normal()) * 100.0) / 100.0;
                fruit.push_back(f);
            }
        }
        cfg["plots"].push_back(plot_cfg);
    }
    std::sort(sensors.begin(), sensors.end(),
              [](const auto& a, const auto& b) { return a.sensor_id < b.sensor_id; });
    csv::write_text((dir / "project.json").string(), cfg.dump(2) + "\n");
    csv::write_text((dir / "knowledge.json").string(), kb.dump(2) + "\n");
    csv::write_text((dir / "raw" / "sapflow.csv").string(), io::write_sap(sensors));
    csv::write_text((dir / "raw" / "phenology.csv").string(), io::write_phenology(phen));
    csv::write_text((dir / "raw" / "lwp.csv").string(), io::write_lwp(lwp));
    csv::write_text((dir / "raw" / "fruit.csv").string(), io::write_fruit(fruit));
}

} // namespace vws::synth
