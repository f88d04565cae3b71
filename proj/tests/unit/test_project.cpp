#include "doctest.h"

#include "project_fixture.hpp"
#include "vws/csv.hpp"
#include "vws/error.hpp"
#include "vws/project.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>

using namespace vws;
using namespace vws::project;
using testing::TempDir;
using nlohmann::json;

namespace {

testing::TemplateCleanup cleanup_template;

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

} // namespace

TEST_SUITE("project") {

TEST_CASE("SHA-256 of a known message") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("").size() == 64);
}

TEST_CASE("configuration keys are checked strictly") {
    const std::string text = csv::read_text((testing::fixture_dir() / "project.json").string());
    CHECK_NOTHROW(parse_config(text));
    auto j = json::parse(text);
    j["unexpected"] = 1;
    CHECK_THROWS_AS(parse_config(j.dump()), ValidationError);
    auto k = json::parse(text);
    k["plots"][0]["site"] = "nowhere";
    CHECK_THROWS_AS(parse_config(k.dump()), ValidationError);
    const auto cfg = parse_config(text);
    CHECK(cfg.plots.size() == 6);
    CHECK(cfg.plot("PR2").variety == "grenache");
    CHECK(cfg.site("villeneuve").meteo.latitude_deg.has_value());
    CHECK_THROWS_AS(cfg.plot("ZZ"), ValidationError);
}

TEST_CASE("ingestion reports rejected rows and refuses duplicates") {
    TempDir dir("ingest");
    testing::copy_config(dir.path());
    Project p(dir.path());
    const fs::path good = dir.path() / "m.csv";
    write(good, std::string(io::kMeteoHeader) +
                    "\n2012-06-01T00:30,18,70,5,0,0\n2012-06-01T01:30,18,120,5,0,0\n2012-06-01T02:30,18,70,5,0,0\n");
    const auto rep = p.ingest(InputKind::meteo, good, "pech_rouge");
    CHECK(rep.rows == 3);
    CHECK(rep.accepted == 2);
    REQUIRE(rep.rejected.size() == 1);
    CHECK(rep.rejected[0].line == 3);
    CHECK(rep.stored == Project::meteo_input("pech_rouge"));
    CHECK(p.store().exists("reports/ingest/meteo_pech_rouge.json"));

    const fs::path dup = dir.path() / "d.csv";
    write(dup, std::string(io::kMeteoHeader) + "\n2012-06-01T00:30,18,70,5,0,0\n2012-06-01T00:30,18,70,5,0,0\n");
    const auto before = p.store().current_hash(Project::meteo_input("pech_rouge"));
    CHECK_THROWS_AS(p.ingest(InputKind::meteo, dup, "pech_rouge"), ValidationError);
    CHECK(p.store().current_hash(Project::meteo_input("pech_rouge")) == before);

    const fs::path stray = dir.path() / "l.csv";
    write(stray, std::string(io::kLwpHeader) + "\n2012-06-01,XX9,irrigated,-0.2\n");
    CHECK_THROWS_AS(p.ingest(InputKind::lwp, stray), ValidationError);
    CHECK_THROWS_AS(p.ingest(InputKind::meteo, good, "atlantis"), ValidationError);
    CHECK_THROWS_AS(parse_kind("weather"), ValidationError);
}

TEST_CASE("pending mode stops before Ks until a selection is committed") {
    TempDir dir("pending");
    testing::prepared_project(dir.path());
    Project p(dir.path());
    const auto r = p.run_pipeline("VL1", "irrigated", SelectionMode::pending);
    CHECK(r.awaiting_selection);
    CHECK(r.candidate_count >= 4);
    CHECK_FALSE(r.ks.has_value());
    CHECK_THROWS_AS(p.run_ks("VL1", "irrigated"), AwaitingSelection);

    SelectionRequest req;
    req.candidate_index = 2;
    req.author = "agronomist";
    const auto rec = p.commit_selection("VL1", "irrigated", req);
    CHECK(rec.mode == "manual");
    CHECK(rec.candidate_index == 2);
    CHECK_FALSE(rec.timestamp.empty());
    const auto cands = p.stored_candidates("VL1", "irrigated");
    CHECK(rec.t_kstar == cands[1].date);

    CHECK_THROWS_AS(p.commit_selection("VL1", "irrigated", req), ConflictError);
    req.candidate_index = 99;
    req.force = true;
    CHECK_THROWS_AS(p.commit_selection("VL1", "irrigated", req), ValidationError);

    // A rerun consumes the committed selection.
    const auto done = p.run_pipeline("VL1", "irrigated", SelectionMode::auto_select);
    CHECK_FALSE(done.awaiting_selection);
    REQUIRE(done.ks.has_value());
    CHECK(p.selection("VL1", "irrigated")->mode == "manual");
    const auto kcb = json::parse(p.store().read(Project::kcb_path("VL1", "irrigated")));
    CHECK(kcb["t_kstar"] == cands[1].date.to_string());
}

TEST_CASE("an explicit selection point is accepted") {
    TempDir dir("explicit");
    testing::prepared_project(dir.path());
    Project p(dir.path());
    p.run_pipeline("PR1", "rainfed", SelectionMode::pending);
    SelectionRequest req;
    req.t = Date::from_ymd(2012, 5, 20);
    req.k_star = 0.45;
    const auto rec = p.commit_selection("PR1", "rainfed", req);
    CHECK_FALSE(rec.candidate_index.has_value());
    CHECK(rec.k_star == 0.45);
    CHECK(rec.gdd > 0.0);
    const auto ks = p.run_ks("PR1", "rainfed");
    CHECK_FALSE(ks.points.empty());
}

TEST_CASE("auto mode selects, builds Ks within bounds, and Ks is one at t_K*") {
    TempDir dir("auto");
    testing::prepared_project(dir.path());
    Project p(dir.path());
    const auto r = p.run_pipeline("PR3", "irrigated", SelectionMode::auto_select);
    REQUIRE(r.ks.has_value());
    const auto sel = p.selection("PR3", "irrigated");
    REQUIRE(sel.has_value());
    CHECK(sel->mode == "auto");
    CHECK(sel->timestamp.empty());
    bool seen = false;
    for (const auto& pt : r.ks->points) {
        if (!pt.ks) continue;
        CHECK(*pt.ks >= 0.0);
        CHECK(*pt.ks <= 1.2);
        if (pt.date == sel->t_kstar) {
            CHECK(std::abs(*pt.ks - 1.0) <= 1e-9);
            seen = true;
        }
    }
    CHECK(seen);
    REQUIRE(r.aggregate.has_value());
    CHECK(std::abs(r.aggregate->nou_harv - r.aggregate->nou_ver - r.aggregate->ver_harv) <= 1e-9);
}

TEST_CASE("changed inputs make downstream artifacts stale with remedies") {
    TempDir dir("stale");
    testing::prepared_project(dir.path());
    Project p(dir.path());
    p.run_pipeline("VL2", "rainfed", SelectionMode::pending);
    SelectionRequest req;
    req.candidate_index = 1;
    p.commit_selection("VL2", "rainfed", req);
    CHECK(p.store().staleness(Project::candidates_path("VL2", "rainfed")).empty());

    // Re-ingest LWP with one reading changed.
    std::string lwp = csv::read_text((testing::fixture_dir() / "raw" / "lwp.csv").string());
    const auto pos = lwp.find("VL2,rainfed,");
    REQUIRE(pos != std::string::npos);
    const auto eol = lwp.find('\n', pos);
    lwp.replace(pos, eol - pos, "VL2,rainfed,-0.99");
    write(dir.path() / "lwp.csv", lwp);
    p.ingest(InputKind::lwp, dir.path() / "lwp.csv");

    const auto why = p.store().staleness(Project::candidates_path("VL2", "rainfed"));
    REQUIRE_FALSE(why.empty());
    CHECK(why.front().find("rerun `candidates`") != std::string::npos);
    CHECK_FALSE(p.store().staleness(Project::ks_path("VL2", "rainfed")).empty());
    try {
        p.run_ks("VL2", "rainfed");
        FAIL("expected a stale error");
    } catch (const StaleError& e) {
        CHECK_FALSE(e.actions().empty());
    }
    // A stale manual selection is not silently replaced.
    CHECK_THROWS_AS(p.run_pipeline("VL2", "rainfed", SelectionMode::auto_select), StaleError);
}

TEST_CASE("a deleted input is reported with a re-ingest action") {
    TempDir dir("missing");
    testing::prepared_project(dir.path());
    Project p(dir.path());
    p.run_pipeline("VL3", "irrigated", SelectionMode::auto_select);
    fs::remove(dir.path() / "inputs" / "phenology.csv");
    const auto why = p.store().staleness(Project::candidates_path("VL3", "irrigated"));
    REQUIRE_FALSE(why.empty());
    bool reingest = false;
    for (const auto& w : why) reingest |= w.find("re-ingest phenology") != std::string::npos;
    CHECK(reingest);
}

TEST_CASE("a damaged artifact fails its stage with the artifact hash") {
    TempDir dir("damaged");
    testing::prepared_project(dir.path());
    Project p(dir.path());
    p.run_meteo("pech_rouge");
    p.run_sapflow("PR1", "irrigated");
    const auto rel = Project::transpiration_path("PR1", "irrigated");
    write(dir.path() / rel, "date,plot_id\n");
    // Rewrite the manifest entry so the damaged file counts as fresh.
    auto manifest = json::parse(csv::read_text((dir.path() / "manifest.json").string()));
    manifest["entries"][rel]["sha256"] = sha256_hex("date,plot_id\n");
    write(dir.path() / "manifest.json", manifest.dump(2));
    Project again(dir.path());
    try {
        again.run_candidates("PR1", "irrigated");
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("candidates") != std::string::npos);
        CHECK(msg.find(sha256_hex("date,plot_id\n").substr(0, 12)) != std::string::npos);
    }
}

TEST_CASE("every fixture treatment yields a plausible number of candidates") {
    TempDir dir("counts");
    testing::prepared_project(dir.path());
    Project p(dir.path());
    for (const auto& site : {"pech_rouge", "villeneuve"}) p.run_meteo(site);
    for (const auto& [plot, treatment] : p.pairs()) {
        p.run_sapflow(plot, treatment);
        const auto st = p.run_candidates(plot, treatment);
        CHECK(st.report.candidates.size() >= 4);
        CHECK(st.report.candidates.size() <= 9);
    }
}

TEST_CASE("models and report are written from the aggregated dataset") {
    TempDir dir("models");
    testing::prepared_project(dir.path());
    Project p(dir.path());
    for (const auto& [plot, treatment] : p.pairs()) p.run_pipeline(plot, treatment, SelectionMode::auto_select);
    const auto agg = p.run_aggregate();
    CHECK(agg.size() == 12);
    const auto dataset = p.store().read("artifacts/dataset.csv");
    CHECK(std::count(dataset.begin(), dataset.end(), '\n') == 13);
    const auto tree = p.run_tree("sugar");
    CHECK_FALSE(tree.empty());
    CHECK(p.store().exists("artifacts/models/tree_sugar.json"));
    CHECK_THROWS_AS(p.run_tree("colour"), ValidationError);
    p.run_report();
    const auto report = p.store().read("reports/report.md");
    CHECK(report.find("PR1") != std::string::npos);
}

}
