// Serial references against their OpenMP variants on the data-parallel kernels.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include "vws/cart.hpp"
#include "vws/flrti.hpp"
#include "vws/meteo.hpp"
#include "vws/rng.hpp"
#include "vws/sapflow.hpp"
#include "vws/synth.hpp"

#include <benchmark/benchmark.h>

using namespace vws;

namespace {

std::vector<meteo::HourlyMeteoRecord> hourly_year() {
    Rng rng(1);
    std::vector<meteo::HourlyMeteoRecord> v;
    const DateTime t0(Date::from_ymd(2012, 1, 1), 30);
    for (int h = 0; h < 24 * 366; ++h)
        v.push_back({t0.plus_minutes(h * 60), rng.uniform(0, 35), rng.uniform(20, 95), rng.uniform(0, 25),
                     (h % 24 >= 6 && h % 24 < 20) ? rng.uniform(0, 900) : 0.0, 0.0});
    return v;
}

meteo::SiteConfig site() {
    meteo::SiteConfig s;
    s.id = "bench";
    s.latitude_deg = 43.1;
    s.longitude_deg = 3.1;
    s.elevation_m = 30.0;
    s.utc_offset_hours = 1.0;
    return s;
}

void BM_EtrefSerial(benchmark::State& st) {
    const auto v = hourly_year();
    const auto s = site();
    for (auto _ : st) benchmark::DoNotOptimize(meteo::etref_hourly_batch_serial(v, s));
}
void BM_EtrefParallel(benchmark::State& st) {
    const auto v = hourly_year();
    const auto s = site();
    for (auto _ : st) benchmark::DoNotOptimize(meteo::etref_hourly_batch(v, s));
}

std::vector<double> sap_values() {
    Rng rng(2);
    std::vector<double> v(200000);
    for (auto& x : v) x = rng.uniform() < 0.03 ? std::nan("") : rng.uniform(0, 800);
    return v;
}

void BM_MovingAverageSerial(benchmark::State& st) {
    const auto v = sap_values();
    for (auto _ : st) benchmark::DoNotOptimize(sapflow::moving_average_serial(v, 5));
}
void BM_MovingAverageParallel(benchmark::State& st) {
    const auto v = sap_values();
    for (auto _ : st) benchmark::DoNotOptimize(sapflow::moving_average(v, 5));
}

void BM_CartCvSerial(benchmark::State& st) {
    const auto d = synth::cart_random(200, 4, 9);
    const cart::GrowParams gp;
    const auto full = cart::grow(d, gp);
    for (auto _ : st) benchmark::DoNotOptimize(cart::prune_cv_serial(full, d, gp));
}
void BM_CartCvParallel(benchmark::State& st) {
    const auto d = synth::cart_random(200, 4, 9);
    const cart::GrowParams gp;
    const auto full = cart::grow(d, gp);
    for (auto _ : st) benchmark::DoNotOptimize(cart::prune_cv(full, d, gp));
}

void BM_FlrtiCvSerial(benchmark::State& st) {
    const auto data = synth::functional(60, 3, 0.1, synth::three_peak_beta, 40);
    for (auto _ : st)
        benchmark::DoNotOptimize(flrti::cross_validate_serial(data.grid, data.samples, flrti::kDefaultSigmaGrid,
                                                              flrti::kDefaultOmegaGrid));
}
void BM_FlrtiCvParallel(benchmark::State& st) {
    const auto data = synth::functional(60, 3, 0.1, synth::three_peak_beta, 40);
    for (auto _ : st)
        benchmark::DoNotOptimize(
            flrti::cross_validate(data.grid, data.samples, flrti::kDefaultSigmaGrid, flrti::kDefaultOmegaGrid));
}

} // namespace

BENCHMARK(BM_EtrefSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EtrefParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MovingAverageSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MovingAverageParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CartCvSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CartCvParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FlrtiCvSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FlrtiCvParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
