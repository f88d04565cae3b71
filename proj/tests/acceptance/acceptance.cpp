// Acceptance report: one PASS/FAIL line per criterion.
//
//   vws_acceptance                      every criterion
//   vws_acceptance --only cart          one criterion
//   vws_acceptance --only flrti:zeros   one part of a criterion
//
// The exit status is non-zero when any selected check fails.

#include "oracles/oracles.hpp"
#include "unit/project_fixture.hpp"

#include "vws/aggregate.hpp"
#include "vws/cart.hpp"
#include "vws/csv.hpp"
#include "vws/flrti.hpp"
#include "vws/io.hpp"
#include "vws/knowledge.hpp"
#include "vws/kstar.hpp"
#include "vws/meteo.hpp"
#include "vws/project.hpp"
#include "vws/rng.hpp"
#include "vws/synth.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace vws;
namespace fs = std::filesystem;

namespace {

testing::TemplateCleanup cleanup_template;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Part = std::function<Outcome()>;

struct Criterion {
    std::string name;
    std::vector<std::pair<std::string, Part>> parts;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int precision = 3) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------- FAO-56

Outcome fao56_equivalence() {
    // Three days of hourly weather with a diurnal cycle, written as a CSV file
    // and read back through the ingestion parser.
    const Date d0 = Date::from_ymd(2012, 7, 10);
    std::string text = std::string(io::kMeteoHeader) + "\n";
    Rng rng(56);
    for (int h = 0; h < 72; ++h) {
        const Date d = d0 + h / 24;
        const int hour = h % 24;
        const double phase = 2.0 * M_PI * (hour + 0.5 - 15.0) / 24.0;
        const double t = 23.0 + 8.0 * std::cos(phase) + rng.uniform(-0.5, 0.5);
        const double rh = std::clamp(55.0 - 25.0 * std::cos(phase) + rng.uniform(-3.0, 3.0), 5.0, 100.0);
        const double wind = rng.uniform(2.0, 18.0);
        const double sun = std::sin(M_PI * (hour + 0.5 - 6.0) / 14.0);
        const double rs = hour >= 6 && hour < 20 ? std::max(0.0, 850.0 * sun) : 0.0;
        char line[128];
        std::snprintf(line, sizeof line, "%sT%02d:30,%.2f,%.1f,%.2f,%.1f,0\n", d.to_string().c_str(), hour, t, rh,
                      wind, rs);
        text += line;
    }

    meteo::SiteConfig site;
    site.id = "synthetic";
    site.latitude_deg = 43.53;
    site.longitude_deg = 3.87;
    site.elevation_m = 45.0;
    site.utc_offset_hours = 1.0;
    const oracle::WorksheetSite ws{43.53, 3.87, 45.0, 1.0};

    const auto t0 = std::chrono::steady_clock::now();
    const auto in = io::parse_meteo(text, "synthetic.csv");
    const auto et = meteo::etref_hourly_batch(in.records, site);
    std::vector<double> vpd;
    for (const auto& r : in.records) vpd.push_back(meteo::compute_vpd(*r.temp_air, *r.rel_humidity));
    const double elapsed = seconds_since(t0);

    if (in.records.size() != 72 || !in.rejected.empty()) return {false, "synthetic file did not parse cleanly"};
    double worst_et = 0.0, worst_vpd = 0.0;
    for (std::size_t i = 0; i < in.records.size(); ++i) {
        const auto& r = in.records[i];
        const Date d = r.timestamp.date();
        const auto o = oracle::fao56_worksheet({d.year(), static_cast<int>(d.month()), static_cast<int>(d.day()),
                                                r.timestamp.minute_of_day() / 60.0, *r.temp_air, *r.rel_humidity,
                                                *r.wind_speed, *r.solar_radiation},
                                               ws);
        worst_et = std::max(worst_et, std::abs(et[i] - o.et_ref));
        worst_vpd = std::max(worst_vpd, std::abs(vpd[i] - o.vpd));
    }
    const bool pass = worst_et <= 1e-6 && worst_vpd <= 1e-6 && elapsed < 1.0;
    return {pass, "72 hours, max |dETref| " + num(worst_et) + " mm/h, max |dVPD| " + num(worst_vpd) + " kPa, " +
                      num(elapsed) + " s"};
}

// ---------------------------------------------------------------- candidates

Outcome candidate_soundness() {
    const kstar::CandidateRuleConfig cfg;
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t emitted = 0, false_admits = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto s = synth::daily_season(seed);
        const auto ratio = kstar::compute_ratio(s.smoothed, s.dailies);
        const auto rep = kstar::detect_candidates(ratio, s.calendar, s.lwp, s.dailies, cfg);
        for (const auto& c : rep.candidates) {
            ++emitted;
            const auto chk = oracle::recheck(c.date, ratio, s.calendar, s.lwp, s.dailies, cfg.vpd_limit,
                                             cfg.lwp_stress_mpa, cfg.derivative_epsilon);
            false_admits += !chk.all();
        }
    }
    const double elapsed = seconds_since(t0);
    return {false_admits == 0 && emitted > 0 && elapsed < 10.0,
            "50 seasons, " + std::to_string(emitted) + " candidates, " + std::to_string(false_admits) +
                " false admits, " + num(elapsed) + " s"};
}

Outcome candidate_count() {
    testing::TempDir dir("acc_count");
    testing::prepared_project(dir.path());
    project::Project p(dir.path());
    for (const auto& [id, site] : p.config().sites) p.run_meteo(id);
    bool pass = true;
    std::string counts;
    for (const auto& [plot, treatment] : p.pairs()) {
        p.run_sapflow(plot, treatment);
        const auto n = p.run_candidates(plot, treatment).report.candidates.size();
        pass &= n >= 4 && n <= 9;
        counts += (counts.empty() ? "" : " ") + plot + "/" + treatment + "=" + std::to_string(n);
    }
    return {pass, counts};
}

// ---------------------------------------------------------------- Ks

Outcome ks_construction() {
    const Date start = Date::from_ymd(2012, 4, 1);
    std::vector<meteo::DailyMeteoRecord> w;
    for (int i = 0; i < 120; ++i) {
        meteo::DailyMeteoRecord d;
        d.date = start + i;
        d.et_ref = 4.0 + std::sin(i * 0.3);
        d.vpd_max = 2.0;
        d.gdd_cum = 9.0 * (i + 1);
        w.push_back(d);
    }
    PhenologyCalendar cal;
    cal.plot_id = "P";
    cal.stages[stage::budbreak] = {static_cast<double>(w[9].date.days()), w[9].gdd_cum};
    cal.stages[stage::veraison] = {static_cast<double>(w[100].date.days()), w[100].gdd_cum};

    // A clean day: transpiration proportional to ETref with the ratio peaking at
    // the selected date, plus one spike that would exceed the cap.
    const int sel_day = 55;
    const double k_star = 0.55;
    sapflow::TranspirationSeries t{"P", "T", {}, true};
    for (int i = 0; i < 120; ++i) {
        const double ratio = k_star * std::min(1.0, static_cast<double>(i + 1) / (sel_day + 1));
        t.daily_t.push_back({w[i].date, ratio * w[i].et_ref});
    }
    t.daily_t[80].mm = 50.0;
    const kstar::Selection sel{w[sel_day].date, w[sel_day].gdd_cum, k_star, 1};
    const auto kcb = kstar::build_kcb(sel, cal);
    const auto ks = kstar::compute_ks(t, kcb, w, 1.2);
    const double at_sel = ks.points[sel_day].ks.value_or(-1.0);

    bool bounded = true;
    for (const auto& pt : ks.points)
        if (pt.ks) bounded &= *pt.ks >= 0.0 && *pt.ks <= 1.2;
    // Bounds also hold on randomized seasons with the auto selection.
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto s = synth::daily_season(seed);
        const auto rep = kstar::detect_candidates(kstar::compute_ratio(s.smoothed, s.dailies), s.calendar, s.lwp,
                                                  s.dailies, kstar::CandidateRuleConfig{});
        if (rep.candidates.empty()) continue;
        const auto sel_s = kstar::select_auto(rep.candidates);
        if (sel_s.gdd <= s.calendar.at(stage::budbreak).gdd) continue;
        const auto ks_s = kstar::compute_ks(s.smoothed, kstar::build_kcb(sel_s, s.calendar), s.dailies, 1.2);
        for (const auto& pt : ks_s.points)
            if (pt.ks) bounded &= *pt.ks >= 0.0 && *pt.ks <= 1.2;
    }

    const bool continuous = kcb.value_at(sel.gdd) == k_star && kcb.value_at(sel.gdd + 1.0) == k_star &&
                            std::abs(kcb.value_at(std::nextafter(sel.gdd, 0.0)) - k_star) <= 1e-12;
    const bool one = std::abs(at_sel - 1.0) <= 1e-9;
    return {one && bounded && continuous, "Ks(t_K*) - 1 = " + num(at_sel - 1.0) + ", bounds " +
                                              (bounded ? "hold" : "violated") + ", KcB at t_K* " +
                                              (continuous ? "continuous" : "discontinuous")};
}

// ---------------------------------------------------------------- aggregation

PhenologyCalendar agg_stages(double nou, double ver, double harv) {
    PhenologyCalendar c;
    c.stages[stage::nouaison] = {0.0, nou};
    c.stages[stage::veraison] = {0.0, ver};
    c.stages[stage::harvest] = {0.0, harv};
    return c;
}

template <class F>
kstar::KsSeries sampled(F f, int days, double step) {
    kstar::KsSeries s{"P", "T", {}};
    for (int i = 0; i < days; ++i) {
        const double g = step * (i + 1);
        s.points.push_back({Date::from_ymd(2012, 4, 1) + i, g, f(g), false});
    }
    return s;
}

Outcome aggregation_closed_forms() {
    double worst = 0.0;
    const auto flat = sampled([](double) { return 0.8; }, 200, 10.0);
    worst = std::max(worst, std::abs(aggregate::trapz_ks(flat, 100.0, 1500.0) - 0.8 * 1400.0));
    const double a = 2e-4, lo = 123.4, hi = 1777.7;
    const auto line = sampled([a](double g) { return 1.0 - a * g; }, 200, 10.0);
    worst = std::max(worst, std::abs(aggregate::trapz_ks(line, lo, hi) - ((hi - lo) - a * (hi * hi - lo * lo) / 2.0)));
    auto piece = [](double g) { return g <= 600 ? 1.0 : g >= 1200 ? 0.4 : 1.0 - 0.6 * (g - 600) / 600; };
    const auto pw = sampled(piece, 250, 8.0);
    const double closed = 1.0 * 400 + 0.5 * 1.4 * 600 + 0.4 * 600;
    worst = std::max(worst, std::abs(aggregate::trapz_ks(pw, 200.0, 1800.0) - closed));
    return {worst <= 1e-9, "constant, linear, piecewise-linear: max error " + num(worst)};
}

Outcome aggregation_additivity() {
    Rng rng(4);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        kstar::KsSeries s{"P", "T", {}};
        double g = 0.0;
        for (int i = 0; i < 200; ++i) {
            g += rng.uniform(2.0, 15.0);
            s.points.push_back({Date::from_ymd(2012, 4, 1) + i, g, rng.uniform(0.0, 1.2), false});
        }
        const double nou = rng.uniform(50.0, 300.0);
        const double ver = rng.uniform(nou + 10.0, 800.0);
        const double harv = rng.uniform(ver + 10.0, g - 50.0);
        const auto rec = aggregate::build_aggregates(s, agg_stages(nou, ver, harv));
        worst = std::max(worst, std::abs(rec.nou_harv - rec.nou_ver - rec.ver_harv));
    }
    return {worst <= 1e-9, "200 random series, max |NouHarv - NouVer - VerHarv| " + num(worst)};
}

Outcome aggregation_table1() {
    const auto rows =
        aggregate::parse_aggregates_csv(csv::read_text(VWS_FIXTURE_DIR "/table1_aggregates.csv"), "table1");
    double worst = 0.0;
    int violating = 0;
    for (const auto& r : rows) {
        const double gap = std::abs(r.nou_harv - r.nou_ver - r.ver_harv);
        worst = std::max(worst, gap);
        violating += gap > 0.2;
    }
    return {violating == 0, std::to_string(rows.size()) + " published rows, " + std::to_string(violating) +
                                " outside +-0.2, largest residual " + num(worst)};
}

// ---------------------------------------------------------------- CART

std::vector<bool> left_rows(const cart::Dataset& d, const cart::Split& s) {
    std::vector<bool> out(d.size());
    const auto& p = d.predictors[s.variable];
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (p.categorical)
            out[i] = std::find(s.left_levels.begin(), s.left_levels.end(), static_cast<int>(p.values[i])) !=
                     s.left_levels.end();
        else
            out[i] = p.values[i] <= s.threshold;
    }
    return out;
}

bool same_partition(const std::vector<bool>& a, const std::vector<bool>& b) {
    bool same = true, flipped = true;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same &= a[i] == b[i];
        flipped &= a[i] != b[i];
    }
    return same || flipped;
}

Outcome cart_root_split() {
    int agree = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng r(seed * 31);
        const std::size_t n = 2 + r.below(199);
        const std::size_t p = 1 + r.below(4);
        const auto d = synth::cart_random(n, p, seed);
        const auto lib = cart::best_root_split(d);
        const auto ref = oracle::brute_force_root(d);
        bool ok = lib.found == ref.found;
        if (ok && ref.found) {
            ok = lib.variable == ref.variable && same_partition(left_rows(d, lib), ref.goes_left) &&
                 std::abs(lib.reduction - ref.reduction) <= 1e-9 * std::max(1.0, std::abs(ref.reduction));
            if (!d.predictors[ref.variable].categorical) ok &= lib.threshold == ref.threshold;
        }
        agree += ok;
    }
    return {agree == 100, std::to_string(agree) + "/100 root splits equal brute force"};
}

Outcome cart_noise_prune() {
    int roots = 0;
    const int runs = 100;
    for (int seed = 1; seed <= runs; ++seed) {
        const auto d = synth::cart_noise(60, 3, static_cast<std::uint64_t>(seed));
        const cart::GrowParams gp;
        const auto t = cart::prune_cv(cart::grow(d, gp), d, gp, cart::PruneOptions{10, static_cast<std::uint64_t>(seed), true});
        roots += t.leaf_count() == 1;
    }
    return {roots >= 95, std::to_string(roots) + "/" + std::to_string(runs) + " noise datasets pruned to the root"};
}

// ---------------------------------------------------------------- FLRTI

struct FlrtiRun {
    synth::FunctionalData data;
    flrti::FlrtiModel model;
    double seconds = 0.0;
};

const FlrtiRun& flrti_run() {
    static const FlrtiRun run = [] {
        FlrtiRun r;
        r.data = synth::functional(120, 42, 0.05, synth::three_peak_beta, 60);
        const auto t0 = std::chrono::steady_clock::now();
        r.model = flrti::fit_cv(r.data.grid, r.data.samples);
        r.seconds = seconds_since(t0);
        return r;
    }();
    return run;
}

double region_mean(const FlrtiRun& r, double a, double b) {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < r.data.grid.size(); ++i)
        if (r.data.grid[i] >= a && r.data.grid[i] <= b) {
            s += r.model.beta[i];
            ++n;
        }
    return s / n;
}

std::string chosen(const FlrtiRun& r) {
    return "CV chose sigma=" + num(r.model.sigma) + " omega=" + num(r.model.omega);
}

Outcome flrti_signs() {
    const auto& r = flrti_run();
    const double a = region_mean(r, 0.12, 0.23), b = region_mean(r, 0.42, 0.53), c = region_mean(r, 0.72, 0.83);
    return {a > 0.0 && b < 0.0 && c > 0.0,
            chosen(r) + "; region means " + num(a) + ", " + num(b) + ", " + num(c) + " (expected +, -, +)"};
}

Outcome flrti_zeros() {
    const auto& r = flrti_run();
    std::size_t truth_zero = 0, exact = 0;
    for (std::size_t i = 0; i < r.data.truth.size(); ++i)
        if (r.data.truth[i] == 0.0) {
            ++truth_zero;
            exact += r.model.beta[i] == 0.0;
        }
    const double frac = static_cast<double>(exact) / static_cast<double>(truth_zero);
    return {frac >= 0.9, chosen(r) + "; " + std::to_string(exact) + "/" + std::to_string(truth_zero) +
                             " true zeros estimated exactly zero (" + num(100.0 * frac) + "%)"};
}

Outcome flrti_grid() {
    const auto& s = flrti::kDefaultSigmaGrid;
    const auto& o = flrti::kDefaultOmegaGrid;
    const bool in = std::find(s.begin(), s.end(), 0.05) != s.end() && std::find(o.begin(), o.end(), 0.95) != o.end();
    return {in, std::string("(0.05, 0.95) ") + (in ? "is" : "is not") + " in the default grid"};
}

Outcome flrti_runtime() {
    const auto& r = flrti_run();
    return {r.seconds < 120.0, "10-fold CV over 35 cells and refit in " + num(r.seconds) + " s"};
}

// ---------------------------------------------------------------- determinism

std::map<std::string, std::string> full_run(const fs::path& dir) {
    testing::copy_config(dir);
    project::Project p(dir);
    testing::ingest_all(p);
    for (const auto& [plot, treatment] : p.pairs()) p.run_pipeline(plot, treatment, project::SelectionMode::auto_select);
    p.run_aggregate();
    p.run_tree("sugar");
    p.run_flrti("sugar");
    p.run_report();
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        files[fs::relative(e.path(), dir).generic_string()] = csv::read_text(e.path().string());
    }
    return files;
}

Outcome determinism() {
    testing::TempDir a("acc_det_a"), b("acc_det_b");
    const auto t0 = std::chrono::steady_clock::now();
    const auto fa = full_run(a.path());
    const auto fb = full_run(b.path());
    std::size_t differing = 0;
    std::string first;
    for (const auto& [rel, content] : fa) {
        const auto it = fb.find(rel);
        if (it == fb.end() || it->second != content) {
            if (first.empty()) first = rel;
            ++differing;
        }
    }
    for (const auto& [rel, content] : fb)
        if (!fa.count(rel)) {
            if (first.empty()) first = rel;
            ++differing;
        }
    std::string detail = std::to_string(fa.size()) + " files per run, " + std::to_string(differing) + " differ";
    if (!first.empty()) detail += " (first: " + first + ")";
    detail += ", " + num(seconds_since(t0)) + " s";
    return {differing == 0 && !fa.empty(), detail};
}

// ---------------------------------------------------------------- knowledge base

Outcome knowledge_base() {
    const auto kb = knowledge::load_kb(knowledge::default_knowledge_document());
    PhenologyCalendar cal;
    cal.plot_id = "P";
    const Date d = Date::from_ymd(2012, 4, 1);
    cal.stages[stage::budbreak] = {static_cast<double>((d + 5).days()), 20.0};
    cal.stages[stage::bloom] = {static_cast<double>((d + 55).days()), 380.0};
    cal.stages[stage::nouaison] = {static_cast<double>((d + 62).days()), 480.0};
    cal.stages[stage::veraison] = {static_cast<double>((d + 110).days()), 1150.0};
    cal.stages[stage::maturity] = {static_cast<double>((d + 150).days()), 1600.0};
    cal.stages[stage::harvest] = {static_cast<double>((d + 160).days()), 1700.0};
    const bool ordered = knowledge::check_temporal_order(kb, cal).empty();

    auto inverted = cal;
    std::swap(inverted.stages[stage::veraison], inverted.stages[stage::harvest]);
    bool reported = false;
    for (const auto& f : knowledge::check_temporal_order(kb, inverted))
        reported |= f.status == knowledge::OrderStatus::violated;

    std::vector<meteo::DailyMeteoRecord> dailies;
    for (int i = 0; i < 200; ++i) {
        meteo::DailyMeteoRecord r;
        r.date = d + i;
        r.gdd_cum = 8.0 * (i + 1);
        dailies.push_back(r);
    }
    bool identity = false;
    if (auto rule = kb.shift_rule_for(stage::nouaison, "syrah")) {
        rule->offset_k = 0.0;
        const auto out = knowledge::apply_shift(*rule, cal, dailies);
        identity = out.at(stage::nouaison).day == cal.at(stage::bloom).day &&
                   out.at(stage::nouaison).gdd == cal.at(stage::bloom).gdd;
    }
    return {ordered && reported && identity, std::string("default file loads; order ") +
                                                 (ordered ? "validates" : "rejected") + "; inversion " +
                                                 (reported ? "reported" : "missed") + "; ShiftStage k=0 " +
                                                 (identity ? "is the identity" : "moves the stage")};
}

std::vector<Criterion> criteria() {
    return {
        {"fao56", {{"equivalence", fao56_equivalence}}},
        {"candidate_soundness", {{"recheck", candidate_soundness}}},
        {"candidate_count", {{"fixture", candidate_count}}},
        {"ks", {{"construction", ks_construction}}},
        {"aggregation",
         {{"closed_forms", aggregation_closed_forms},
          {"additivity", aggregation_additivity},
          {"table1", aggregation_table1}}},
        {"cart", {{"root_split", cart_root_split}, {"noise_prune", cart_noise_prune}}},
        {"flrti",
         {{"signs", flrti_signs}, {"zeros", flrti_zeros}, {"grid", flrti_grid}, {"runtime", flrti_runtime}}},
        {"determinism", {{"fixture", determinism}}},
        {"knowledge", {{"base", knowledge_base}}},
    };
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance report"};
    std::string only;
    app.add_option("--only", only, "criterion or criterion:part");
    CLI11_PARSE(app, argc, argv);

    std::string want_criterion = only, want_part;
    if (const auto colon = only.find(':'); colon != std::string::npos) {
        want_criterion = only.substr(0, colon);
        want_part = only.substr(colon + 1);
    }

    bool all_pass = true, matched = false;
    for (const auto& c : criteria()) {
        if (!want_criterion.empty() && c.name != want_criterion) continue;
        bool pass = true;
        std::string detail;
        for (const auto& [part, run] : c.parts) {
            if (!want_part.empty() && part != want_part) continue;
            matched = true;
            Outcome o;
            try {
                o = run();
            } catch (const std::exception& e) {
                o = {false, std::string("threw: ") + e.what()};
            }
            pass &= o.pass;
            if (c.parts.size() > 1 && want_part.empty()) detail += (detail.empty() ? "" : "; ") + part + (o.pass ? " ok: " : " FAIL: ");
            else if (!detail.empty()) detail += "; ";
            detail += o.detail;
        }
        if (!want_part.empty() && detail.empty()) continue;
        const std::string label = want_part.empty() ? c.name : c.name + ":" + want_part;
        std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", label.c_str(), detail.c_str());
        std::fflush(stdout);
        all_pass &= pass;
    }
    if (!matched) {
        std::fprintf(stderr, "no criterion matches '%s'\n", only.c_str());
        return 2;
    }
    return all_pass ? 0 : 1;
}
