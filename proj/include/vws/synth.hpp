#pragma once

// Seeded synthetic data for tests, benchmarks and the shipped fixture project.

#include "vws/cart.hpp"
#include "vws/flrti.hpp"
#include "vws/kstar.hpp"
#include "vws/meteo.hpp"
#include "vws/phenology.hpp"
#include "vws/sapflow.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace vws::synth {

/// Two positive peaks and one negative trough on [0, 1], zero elsewhere.
double three_peak_beta(double u);

struct FunctionalData {
    std::vector<double> grid;
    std::vector<double> truth; // β on the grid
    std::vector<flrti::FunctionalSample> samples;
    double signal_sd = 0.0;
};

/// Ks-like curves (plateau, decline of random onset and depth, AR(1) noise,
/// 5-point moving average) on `p` points of [0, 1]. The response is the
/// trapezoid integral against `beta` plus Gaussian noise of sd
/// noise·sd(signal); with β ≡ 0 the noise sd is `noise` itself.
FunctionalData functional(std::size_t n, std::uint64_t seed, double noise, double (*beta)(double),
                          std::size_t p = 100);

/// Random regression dataset with `p` predictors, numeric or categorical,
/// and a response depending on the first predictor plus noise.
cart::Dataset cart_random(std::size_t n, std::size_t p, std::uint64_t seed);
/// Same predictors, response pure Gaussian noise.
cart::Dataset cart_noise(std::size_t n, std::size_t p, std::uint64_t seed);

/// A daily-resolution season: weather, phenology, LWP readings and a smoothed
/// transpiration series, randomized enough to exercise every candidate rule.
struct DailySeason {
    std::vector<meteo::DailyMeteoRecord> dailies;
    PhenologyCalendar calendar;
    std::vector<kstar::LwpRecord> lwp;
    sapflow::TranspirationSeries smoothed;
};
DailySeason daily_season(std::uint64_t seed);

/// Writes a complete project: project.json, knowledge.json and raw CSV files
/// under raw/ (meteo_<site>.csv, sapflow.csv, phenology.csv, lwp.csv, fruit.csv).
void write_fixture_project(const std::filesystem::path& dir, std::uint64_t seed = 2012);

} // namespace vws::synth
