#include "vws/project.hpp"

#include "vws/csv.hpp"
#include "vws/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace vws::project {

using nlohmann::json;

namespace {

const char* kManifest = "manifest.json";
const char* kSapInput = "inputs/sapflow.csv";
const char* kPhenologyInput = "inputs/phenology.csv";
const char* kLwpInput = "inputs/lwp.csv";
const char* kFruitInput = "inputs/fruit.csv";
const char* kAggregates = "artifacts/aggregates.csv";
const char* kDataset = "artifacts/dataset.csv";
const char* kReport = "reports/report.md";
const char* kDatasetHeader =
    "plot_id,treatment,site,variety,nou_harv,nou_ver,ver_harv,ver_mat,berry_weight,sugar,acidity";

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            throw ConfigError(where + ": unknown key '" + k + "'");
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key) || obj[key].is_null()) return fallback;
    try {
        return obj[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + ": key '" + std::string(key) + "' has the wrong type");
    }
}

std::optional<double> opt_number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
    if (!obj[key].is_number()) throw ConfigError(where + ": key '" + std::string(key) + "' must be a number");
    return obj[key].get<double>();
}

std::string safe_id(const std::string& id, const std::string& what) {
    if (id.empty()) throw ConfigError(what + " id is empty");
    for (char c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
            throw ConfigError(what + " id '" + id + "' may only contain letters, digits, '-', '_' and '.'");
    if (id.find("__") != std::string::npos) throw ConfigError(what + " id '" + id + "' may not contain '__'");
    return id;
}

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// The CLI step that regenerates a path.
std::string remedy(const std::string& rel) {
    auto starts = [&](const char* p) { return rel.rfind(p, 0) == 0; };
    if (starts("inputs/meteo/")) return "re-ingest meteo (" + rel + ")";
    if (starts("inputs/")) {
        std::string kind = fs::path(rel).stem().string();
        return "re-ingest " + kind + " (" + rel + ")";
    }
    if (starts("artifacts/dailies/")) return "rerun `meteo`";
    if (starts("artifacts/transpiration/") || starts("artifacts/qc/")) return "rerun `sapflow`";
    if (starts("artifacts/ratio/") || starts("artifacts/candidates/") || starts("artifacts/diagnostics/"))
        return "rerun `candidates`";
    if (starts("selections/")) return "commit a new selection (`select --force`) or rerun in auto mode";
    if (starts("artifacts/ks/") || starts("artifacts/kcb/")) return "rerun `ks`";
    if (starts("artifacts/aggregates") || starts("artifacts/dataset")) return "rerun `aggregate`";
    if (starts("artifacts/models/tree_")) return "rerun `tree`";
    if (starts("artifacts/models/flrti_")) return "rerun `flrti`";
    if (starts("reports/")) return "rerun `report`";
    return "regenerate " + rel;
}

sapflow::TranspirationSeries transpiration_block(const csv::Table& t, bool smoothed) {
    sapflow::TranspirationSeries s;
    s.smoothed = smoothed;
    for (const auto& row : t.rows) {
        const std::string& flag = csv::text(t, row, 4);
        if ((flag == "1") != smoothed) continue;
        s.plot_id = csv::text(t, row, 1);
        s.treatment = csv::text(t, row, 2);
        s.daily_t.push_back({Date::parse(csv::text(t, row, 0)), csv::optional_number(t, row, 3)});
    }
    return s;
}

json stage_json(const PhenologyCalendar& cal, const std::string& name) {
    auto st = cal.find(name);
    if (!st) return nullptr;
    return json{{"stage", name}, {"date", st->date().to_string()}, {"gdd_cum", st->gdd}};
}

std::optional<double> response_of(const aggregate::FruitSample& s, const std::string& response) {
    if (response == "berry_weight") return s.berry_weight;
    if (response == "sugar") return s.sugar;
    if (response == "acidity") return s.acidity;
    throw ValidationError("unknown response '" + response + "' (expected berry_weight, sugar or acidity)");
}

struct DatasetRow {
    std::string plot_id, treatment, site, variety;
    aggregate::AggregateRecord agg;
    std::map<std::string, std::optional<double>> responses;
};

std::vector<DatasetRow> parse_dataset(const std::string& text, const std::string& source) {
    const csv::Table t = csv::parse(text, kDatasetHeader, source);
    std::vector<DatasetRow> out;
    for (const auto& row : t.rows) {
        DatasetRow d;
        d.plot_id = csv::text(t, row, 0);
        d.treatment = csv::text(t, row, 1);
        d.site = csv::text(t, row, 2);
        d.variety = csv::text(t, row, 3);
        d.agg = {d.site, d.variety, d.plot_id, d.treatment, csv::number(t, row, 4), csv::number(t, row, 5),
                 csv::number(t, row, 6), csv::optional_number(t, row, 7)};
        for (std::size_t i = 0; i < kResponses.size(); ++i) d.responses[kResponses[i]] = csv::optional_number(t, row, 8 + i);
        out.push_back(std::move(d));
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------- config

const Plot& Config::plot(const std::string& id) const {
    for (const auto& p : plots)
        if (p.id == id) return p;
    throw ValidationError("unknown plot '" + id + "'");
}

const Site& Config::site(const std::string& id) const {
    auto it = sites.find(id);
    if (it == sites.end()) throw ValidationError("unknown site '" + id + "'");
    return it->second;
}

Config parse_config(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
    check_keys(doc,
               {"seed", "knowledge_file", "sites", "plots", "qc", "smoothing_window", "ks_cap", "epsilon", "vpd_limit",
                "lwp_stress_mpa", "k0", "nouaison_shift_gdd", "gdd_origin", "cart", "flrti"},
               source);
    Config c;
    c.seed = get_or<std::uint64_t>(doc, "seed", 1, source);
    c.knowledge_file = get_or<std::string>(doc, "knowledge_file", "", source);
    if (!doc.contains("sites") || !doc["sites"].is_object() || doc["sites"].empty())
        throw ConfigError(source + ": at least one site is required");
    for (const auto& [id, s] : doc["sites"].items()) {
        const std::string where = source + ": site '" + id + "'";
        check_keys(s, {"latitude", "longitude", "elevation", "utc_offset", "region", "wind_height", "albedo",
                       "night_rs_rso"},
                   where);
        Site site;
        site.meteo.id = safe_id(id, "site");
        site.meteo.latitude_deg = opt_number(s, "latitude", where);
        site.meteo.longitude_deg = opt_number(s, "longitude", where);
        site.meteo.elevation_m = opt_number(s, "elevation", where);
        site.meteo.utc_offset_hours = get_or<double>(s, "utc_offset", 0.0, where);
        site.meteo.wind_height_m = get_or<double>(s, "wind_height", 2.0, where);
        site.meteo.albedo = get_or<double>(s, "albedo", 0.23, where);
        site.meteo.night_rs_rso = get_or<double>(s, "night_rs_rso", 0.8, where);
        site.region = get_or<std::string>(s, "region", "", where);
        c.sites.emplace(id, std::move(site));
    }
    if (!doc.contains("plots") || !doc["plots"].is_array() || doc["plots"].empty())
        throw ConfigError(source + ": at least one plot is required");
    std::set<std::string> seen;
    for (const auto& p : doc["plots"]) {
        const std::string where = source + ": plot";
        check_keys(p, {"id", "site", "variety", "area_m2", "treatments", "sensor_scale"}, where);
        Plot plot;
        plot.id = safe_id(get_or<std::string>(p, "id", "", where), "plot");
        plot.site = get_or<std::string>(p, "site", "", where);
        if (!c.sites.count(plot.site)) throw ConfigError(where + " '" + plot.id + "': unknown site '" + plot.site + "'");
        plot.variety = get_or<std::string>(p, "variety", "", where);
        if (plot.variety.empty()) throw ConfigError(where + " '" + plot.id + "': variety is required");
        plot.area_m2 = get_or<double>(p, "area_m2", 1.0, where);
        if (!(plot.area_m2 > 0.0)) throw ConfigError(where + " '" + plot.id + "': area_m2 must be positive");
        plot.treatments = get_or<std::vector<std::string>>(p, "treatments", {}, where);
        if (plot.treatments.empty()) throw ConfigError(where + " '" + plot.id + "': no treatments");
        for (const auto& t : plot.treatments) safe_id(t, "treatment");
        plot.sensor_scale = get_or<std::map<std::string, double>>(p, "sensor_scale", {}, where);
        if (!seen.insert(plot.id).second) throw ConfigError(where + ": duplicate plot id '" + plot.id + "'");
        c.plots.push_back(std::move(plot));
    }
    if (doc.contains("qc")) {
        const auto& q = doc["qc"];
        const std::string where = source + ": qc";
        check_keys(q, {"night_solar_threshold", "night_start_hour", "night_end_hour", "weak_rate", "erroneous_ceiling",
                       "reliability_max_fraction"},
                   where);
        c.qc.night_solar_threshold = get_or<double>(q, "night_solar_threshold", c.qc.night_solar_threshold, where);
        c.qc.night_start_hour = get_or<int>(q, "night_start_hour", c.qc.night_start_hour, where);
        c.qc.night_end_hour = get_or<int>(q, "night_end_hour", c.qc.night_end_hour, where);
        c.qc.weak_rate = get_or<double>(q, "weak_rate", c.qc.weak_rate, where);
        c.qc.erroneous_ceiling = get_or<double>(q, "erroneous_ceiling", c.qc.erroneous_ceiling, where);
        c.qc.reliability_max_fraction =
            get_or<double>(q, "reliability_max_fraction", c.qc.reliability_max_fraction, where);
    }
    c.smoothing_window = get_or<int>(doc, "smoothing_window", 5, source);
    if (c.smoothing_window < 1 || c.smoothing_window % 2 == 0)
        throw ConfigError(source + ": smoothing_window must be a positive odd number");
    c.ks_cap = get_or<double>(doc, "ks_cap", 1.2, source);
    if (!(c.ks_cap >= 1.0)) throw ConfigError(source + ": ks_cap must be at least 1");
    c.epsilon = opt_number(doc, "epsilon", source);
    c.vpd_limit = opt_number(doc, "vpd_limit", source);
    c.lwp_stress_mpa = opt_number(doc, "lwp_stress_mpa", source);
    c.k0 = get_or<double>(doc, "k0", 0.0, source);
    c.nouaison_shift_gdd = get_or<double>(doc, "nouaison_shift_gdd", 100.0, source);
    if (!(c.nouaison_shift_gdd >= 0.0)) throw ConfigError(source + ": nouaison_shift_gdd must be non-negative");
    const std::string origin = get_or<std::string>(doc, "gdd_origin", "04-01", source);
    unsigned m = 0, d = 0;
    if (origin.size() != 5 || std::sscanf(origin.c_str(), "%2u-%2u", &m, &d) != 2 || m < 1 || m > 12 || d < 1 ||
        d > 31)
        throw ConfigError(source + ": gdd_origin must be MM-DD");
    c.gdd_origin_month = m;
    c.gdd_origin_day = d;
    if (doc.contains("cart")) {
        const auto& k = doc["cart"];
        const std::string where = source + ": cart";
        check_keys(k, {"min_split", "min_leaf", "cp", "max_depth", "folds", "one_se_rule"}, where);
        c.cart.grow.min_split = get_or<std::size_t>(k, "min_split", c.cart.grow.min_split, where);
        c.cart.grow.min_leaf = get_or<std::size_t>(k, "min_leaf", c.cart.grow.min_leaf, where);
        c.cart.grow.cp = get_or<double>(k, "cp", c.cart.grow.cp, where);
        c.cart.grow.max_depth = get_or<std::size_t>(k, "max_depth", c.cart.grow.max_depth, where);
        c.cart.folds = get_or<int>(k, "folds", c.cart.folds, where);
        c.cart.one_se_rule = get_or<bool>(k, "one_se_rule", c.cart.one_se_rule, where);
    }
    if (doc.contains("flrti")) {
        const auto& f = doc["flrti"];
        const std::string where = source + ": flrti";
        check_keys(f, {"grid_points", "folds", "sigma_grid", "omega_grid", "selector", "n_perm"}, where);
        c.flrti.grid_points = get_or<std::size_t>(f, "grid_points", c.flrti.grid_points, where);
        c.flrti.folds = get_or<int>(f, "folds", c.flrti.folds, where);
        c.flrti.sigma_grid = get_or<std::vector<double>>(f, "sigma_grid", c.flrti.sigma_grid, where);
        c.flrti.omega_grid = get_or<std::vector<double>>(f, "omega_grid", c.flrti.omega_grid, where);
        const std::string sel = get_or<std::string>(f, "selector", "lasso", where);
        if (sel == "lasso")
            c.flrti.selector = flrti::Selector::lasso;
        else if (sel == "dantzig")
            c.flrti.selector = flrti::Selector::dantzig;
        else
            throw ConfigError(where + ": selector must be 'lasso' or 'dantzig'");
        c.flrti.n_perm = get_or<int>(f, "n_perm", 0, where);
        if (c.flrti.n_perm != 0 && c.flrti.n_perm < 100) throw ConfigError(where + ": n_perm must be 0 or ≥ 100");
    }
    return c;
}

// ---------------------------------------------------------------- hashing & store

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

Store::Store(fs::path root) : root_(std::move(root)) { load(); }

void Store::load() {
    const fs::path p = root_ / kManifest;
    manifest_ = json{{"entries", json::object()}};
    if (!fs::exists(p)) return;
    try {
        manifest_ = json::parse(csv::read_text(p.string()));
    } catch (const json::exception& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
    if (!manifest_.contains("entries")) manifest_["entries"] = json::object();
}

void Store::save() const {
    const fs::path p = root_ / kManifest;
    const fs::path tmp = root_ / (std::string(kManifest) + ".tmp");
    csv::write_text(tmp.string(), manifest_.dump(2) + "\n");
    fs::rename(tmp, p);
}

bool Store::exists(const std::string& rel) const { return fs::exists(root_ / rel); }

std::string Store::read(const std::string& rel) const {
    if (!exists(rel)) throw StaleError(rel + ": not found", {remedy(rel)});
    return csv::read_text((root_ / rel).string());
}

std::string Store::current_hash(const std::string& rel) const {
    if (!exists(rel)) return "";
    return sha256_hex(csv::read_text((root_ / rel).string()));
}

std::optional<std::string> Store::recorded_hash(const std::string& rel) const {
    std::lock_guard lock(mutex_);
    const auto& e = manifest_["entries"];
    if (!e.contains(rel)) return std::nullopt;
    return e[rel]["sha256"].get<std::string>();
}

namespace {
void write_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    csv::write_text(tmp.string(), content);
    fs::rename(tmp, path);
}
} // namespace

void Store::put_input(const std::string& rel, const std::string& content, const std::string& kind) {
    std::lock_guard lock(mutex_);
    write_atomic(root_ / rel, content);
    manifest_["entries"][rel] = json{{"kind", "input"}, {"input_kind", kind}, {"sha256", sha256_hex(content)}};
    save();
}

void Store::put_artifact(const std::string& rel, const std::string& content,
                         const std::map<std::string, std::string>& inputs, const std::string& stage) {
    std::lock_guard lock(mutex_);
    write_atomic(root_ / rel, content);
    manifest_["entries"][rel] =
        json{{"kind", "artifact"}, {"stage", stage}, {"sha256", sha256_hex(content)}, {"inputs", inputs}};
    save();
}

std::map<std::string, std::string> Store::snapshot(const std::vector<std::string>& rels) const {
    std::map<std::string, std::string> out;
    for (const auto& r : rels) out[r] = current_hash(r);
    return out;
}

void Store::staleness_into(const std::string& rel, std::vector<std::string>& out, int depth) const {
    const auto& entries = manifest_["entries"];
    const std::string now = current_hash(rel);
    if (!entries.contains(rel)) {
        if (now.empty()) out.push_back(rel + ": not found; " + remedy(rel));
        return; // configuration files are tracked through their consumers
    }
    const auto& e = entries[rel];
    const bool input = e["kind"] == "input";
    if (now.empty()) {
        out.push_back(rel + ": not found; " + remedy(rel));
        return;
    }
    if (now != e["sha256"].get<std::string>()) {
        out.push_back(rel + (input ? ": content changed since ingestion; " : ": modified outside the pipeline; ") +
                      remedy(rel));
    }
    if (input || !e.contains("inputs")) return;
    for (const auto& [in, h] : e["inputs"].items()) {
        if (current_hash(in) != h.get<std::string>())
            out.push_back(rel + ": computed from an older " + in + "; " + remedy(rel));
        if (depth < 8) staleness_into(in, out, depth + 1);
    }
}

std::vector<std::string> Store::staleness(const std::string& rel) const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    staleness_into(rel, out, 0);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void Store::require_fresh(const std::string& rel) const { require_inputs_fresh({rel}); }

void Store::require_inputs_fresh(const std::vector<std::string>& rels) const {
    std::vector<std::string> all;
    for (const auto& r : rels) {
        auto s = staleness(r);
        all.insert(all.end(), s.begin(), s.end());
    }
    if (all.empty()) return;
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    std::string msg = "stale or missing artifacts:";
    for (const auto& a : all) msg += "\n  " + a;
    throw StaleError(msg, all);
}

void Store::remove(const std::string& rel) {
    std::lock_guard lock(mutex_);
    fs::remove(root_ / rel);
    manifest_["entries"].erase(rel);
    save();
}

// ---------------------------------------------------------------- ingest

InputKind parse_kind(const std::string& text) {
    if (text == "meteo") return InputKind::meteo;
    if (text == "sapflow") return InputKind::sapflow;
    if (text == "phenology") return InputKind::phenology;
    if (text == "lwp") return InputKind::lwp;
    if (text == "fruit") return InputKind::fruit;
    throw ValidationError("unknown input kind '" + text + "' (meteo, sapflow, phenology, lwp, fruit)");
}

std::string to_string(InputKind kind) {
    switch (kind) {
    case InputKind::meteo: return "meteo";
    case InputKind::sapflow: return "sapflow";
    case InputKind::phenology: return "phenology";
    case InputKind::lwp: return "lwp";
    case InputKind::fruit: return "fruit";
    }
    return "?";
}

std::string IngestReport::to_json() const {
    json rej = json::array();
    for (const auto& r : rejected) rej.push_back({{"line", r.line}, {"reason", r.reason}});
    return json{{"kind", kind},         {"source", source},     {"stored", stored},
                {"rows", rows},         {"accepted", accepted}, {"rejected", rej}}
               .dump(2) +
           "\n";
}

// ---------------------------------------------------------------- selections

std::string SelectionRecord::to_json() const {
    json j{{"plot_id", plot_id},
           {"treatment", treatment},
           {"t_kstar", t_kstar.to_string()},
           {"gdd_cum", gdd},
           {"k_star", k_star},
           {"candidate_index", candidate_index ? json(*candidate_index) : json(nullptr)},
           {"mode", mode},
           {"author", author},
           {"timestamp", timestamp.empty() ? json(nullptr) : json(timestamp)},
           {"candidates_hash", candidates_hash}};
    return j.dump(2) + "\n";
}

SelectionRecord SelectionRecord::from_json(const std::string& text, const std::string& source) {
    try {
        const json j = json::parse(text);
        SelectionRecord r;
        r.plot_id = j.at("plot_id").get<std::string>();
        r.treatment = j.at("treatment").get<std::string>();
        r.t_kstar = Date::parse(j.at("t_kstar").get<std::string>());
        r.gdd = j.at("gdd_cum").get<double>();
        r.k_star = j.at("k_star").get<double>();
        if (!j.at("candidate_index").is_null()) r.candidate_index = j["candidate_index"].get<int>();
        r.mode = j.at("mode").get<std::string>();
        r.author = j.at("author").get<std::string>();
        if (!j.at("timestamp").is_null()) r.timestamp = j["timestamp"].get<std::string>();
        r.candidates_hash = j.at("candidates_hash").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(source + ": malformed selection record: " + e.what());
    }
}

std::string candidates_json(std::span<const kstar::Candidate> candidates) {
    json arr = json::array();
    for (const auto& c : candidates)
        arr.push_back({{"date", c.date.to_string()},
                       {"gdd_cum", c.gdd},
                       {"k_value", c.k_value},
                       {"passed_rules", c.passed_rules},
                       {"first_derivative", c.first_derivative},
                       {"second_derivative", c.second_derivative}});
    return arr.dump(2) + "\n";
}

std::vector<kstar::Candidate> parse_candidates_json(const std::string& text, const std::string& source) {
    try {
        std::vector<kstar::Candidate> out;
        for (const auto& c : json::parse(text)) {
            kstar::Candidate k;
            k.date = Date::parse(c.at("date").get<std::string>());
            k.gdd = c.at("gdd_cum").get<double>();
            k.k_value = c.at("k_value").get<double>();
            k.passed_rules = c.at("passed_rules").get<std::vector<std::string>>();
            k.first_derivative = c.value("first_derivative", 0.0);
            k.second_derivative = c.value("second_derivative", 0.0);
            out.push_back(std::move(k));
        }
        return out;
    } catch (const json::exception& e) {
        throw ValidationError(source + ": malformed candidate file: " + e.what());
    }
}

// ---------------------------------------------------------------- project

namespace {

/// Runs `body`, re-raising domain errors tagged with the stage and the hash of
/// the artifact being read.
template <class F>
auto in_stage(const Store& store, const std::string& stage, const std::string& subject, const std::string& artifact,
              F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StaleError&) {
        throw;
    } catch (const ConflictError&) {
        throw;
    } catch (const AwaitingSelection&) {
        throw;
    } catch (const ValidationError& e) {
        std::string h = artifact.empty() ? std::string() : store.current_hash(artifact);
        throw StageError("stage " + stage + " [" + subject + "]: " + e.what() +
                         (artifact.empty() ? "" : " (" + artifact + " sha256 " + (h.empty() ? "missing" : h.substr(0, 16)) + ")"));
    }
}

} // namespace

Project::Project(fs::path root) : store_(root) {
    const fs::path cfg = root / "project.json";
    if (!fs::exists(cfg)) throw ConfigError("no project.json in '" + root.string() + "'");
    config_ = parse_config(csv::read_text(cfg.string()), cfg.string());
    if (config_.knowledge_file.empty())
        kb_ = knowledge::load_kb(knowledge::default_knowledge_document());
    else
        kb_ = knowledge::load_kb_file((root / config_.knowledge_file).string());
}

std::string Project::key(const std::string& plot, const std::string& treatment) { return plot + "__" + treatment; }

std::vector<std::pair<std::string, std::string>> Project::pairs() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : config_.plots)
        for (const auto& t : p.treatments) out.emplace_back(p.id, t);
    return out;
}

std::string Project::meteo_input(const std::string& site) { return "inputs/meteo/" + site + ".csv"; }
std::string Project::dailies_path(const std::string& site) { return "artifacts/dailies/" + site + ".csv"; }
std::string Project::transpiration_path(const std::string& p, const std::string& t) {
    return "artifacts/transpiration/" + key(p, t) + ".csv";
}
std::string Project::ratio_path(const std::string& p, const std::string& t) {
    return "artifacts/ratio/" + key(p, t) + ".csv";
}
std::string Project::candidates_path(const std::string& p, const std::string& t) {
    return "artifacts/candidates/" + key(p, t) + ".json";
}
std::string Project::diagnostic_path(const std::string& p, const std::string& t) {
    return "artifacts/diagnostics/" + key(p, t) + ".json";
}
std::string Project::selection_path(const std::string& p, const std::string& t) {
    return "selections/" + key(p, t) + ".json";
}
std::string Project::ks_path(const std::string& p, const std::string& t) { return "artifacts/ks/" + key(p, t) + ".csv"; }
std::string Project::kcb_path(const std::string& p, const std::string& t) { return "artifacts/kcb/" + key(p, t) + ".json"; }

std::mutex& Project::pair_mutex(const std::string& plot, const std::string& treatment) {
    std::lock_guard g(locks_guard_);
    auto& slot = locks_[key(plot, treatment)];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

std::vector<std::string> Project::inputs_present(std::vector<std::string> rels) const {
    rels.erase(std::remove_if(rels.begin(), rels.end(), [&](const std::string& r) { return !store_.exists(r); }),
               rels.end());
    return rels;
}

IngestReport Project::ingest(InputKind kind, const fs::path& file, const std::string& site) {
    IngestReport rep;
    rep.kind = to_string(kind);
    rep.source = file.filename().string();
    const std::string text = csv::read_text(file.string());
    const std::string src = file.string();
    auto known_pair = [&](const std::string& plot, const std::string& treatment, const std::string& what) {
        const Plot& p = config_.plot(plot);
        if (std::find(p.treatments.begin(), p.treatments.end(), treatment) == p.treatments.end())
            throw ValidationError(src + ": " + what + " refers to treatment '" + treatment + "' not configured for plot '" +
                                  plot + "'");
    };
    switch (kind) {
    case InputKind::meteo: {
        const std::string id = site.empty() ? file.stem().string() : site;
        config_.site(id);
        auto in = io::parse_meteo(text, src);
        rep.rows = in.records.size() + in.rejected.size();
        rep.accepted = in.records.size();
        rep.rejected = in.rejected;
        rep.stored = meteo_input(id);
        store_.put_input(rep.stored, io::write_meteo(in.records), "meteo");
        store_.put_artifact("reports/ingest/meteo_" + id + ".json", rep.to_json(), {}, "ingest");
        run_meteo(id);
        return rep;
    }
    case InputKind::sapflow: {
        auto in = io::parse_sap(text, src);
        for (const auto& s : in.sensors) {
            known_pair(s.plot_id, s.treatment, "sensor '" + s.sensor_id + "'");
            rep.accepted += s.records.size();
        }
        rep.rows = rep.accepted + in.rejected.size();
        rep.rejected = in.rejected;
        rep.stored = kSapInput;
        store_.put_input(rep.stored, io::write_sap(in.sensors), "sapflow");
        break;
    }
    case InputKind::phenology: {
        auto dates = io::parse_phenology(text, src);
        for (const auto& [plot, stages] : dates) {
            config_.plot(plot);
            rep.accepted += stages.size();
        }
        rep.rows = rep.accepted;
        rep.stored = kPhenologyInput;
        store_.put_input(rep.stored, io::write_phenology(dates), "phenology");
        break;
    }
    case InputKind::lwp: {
        auto recs = io::parse_lwp(text, src);
        for (const auto& r : recs) known_pair(r.plot_id, r.treatment, "LWP reading");
        rep.rows = rep.accepted = recs.size();
        rep.stored = kLwpInput;
        store_.put_input(rep.stored, io::write_lwp(recs), "lwp");
        break;
    }
    case InputKind::fruit: {
        auto recs = io::parse_fruit(text, src);
        for (const auto& r : recs) known_pair(r.plot_id, r.treatment, "fruit sample");
        rep.rows = rep.accepted = recs.size();
        rep.stored = kFruitInput;
        store_.put_input(rep.stored, io::write_fruit(recs), "fruit");
        break;
    }
    }
    store_.put_artifact("reports/ingest/" + rep.kind + ".json", rep.to_json(), {}, "ingest");
    return rep;
}

// ---- meteo

void Project::run_meteo(const std::string& site_id) {
    const Site& site = config_.site(site_id);
    const std::string in_rel = meteo_input(site_id);
    store_.require_fresh(in_rel);
    in_stage(store_, "meteo", site_id, in_rel, [&] {
        auto in = io::parse_meteo(store_.read(in_rel), in_rel);
        if (in.records.empty()) throw ValidationError("no meteorological records");
        auto agg = meteo::daily_from_hourly(in.records, site.meteo);
        const int year = in.records.front().timestamp.date().year();
        meteo::assign_thermal_time(agg.dailies,
                                   Date::from_ymd(year, config_.gdd_origin_month, config_.gdd_origin_day));
        store_.put_artifact(dailies_path(site_id), io::write_dailies(agg.dailies),
                            store_.snapshot({in_rel, config_rel()}), "meteo");
    });
}

std::vector<meteo::DailyMeteoRecord> Project::load_dailies(const std::string& site) const {
    const std::string rel = dailies_path(site);
    store_.require_fresh(rel);
    return io::parse_dailies(store_.read(rel), rel);
}

// ---- sapflow

void Project::run_sapflow(const std::string& plot_id, const std::string& treatment) {
    const Plot& plot = config_.plot(plot_id);
    const std::string subject = key(plot_id, treatment);
    const std::string met = meteo_input(plot.site);
    store_.require_inputs_fresh({kSapInput, met});
    in_stage(store_, "sapflow", subject, kSapInput, [&] {
        auto sap = io::parse_sap(store_.read(kSapInput), kSapInput);
        auto meteo_in = io::parse_meteo(store_.read(met), met);
        std::map<std::int64_t, double> solar;
        for (const auto& r : meteo_in.records)
            if (r.solar_radiation) solar[r.timestamp.minutes()] = *r.solar_radiation;
        sapflow::SolarLookup lookup = [&solar](const DateTime& t) -> std::optional<double> {
            if (solar.empty()) return std::nullopt;
            auto it = solar.lower_bound(t.minutes());
            std::optional<double> best;
            std::int64_t best_d = 31;
            for (auto j : {it, it == solar.begin() ? solar.end() : std::prev(it)}) {
                if (j == solar.end()) continue;
                const std::int64_t d = std::llabs(j->first - t.minutes());
                if (d < best_d) {
                    best_d = d;
                    best = j->second;
                }
            }
            return best;
        };
        std::vector<sapflow::QcResult> qcs;
        json qc_doc = json::array();
        for (const auto& s : sap.sensors) {
            if (s.plot_id != plot_id || s.treatment != treatment) continue;
            qcs.push_back(sapflow::qc_sensor(s, config_.qc, lookup));
            const auto& q = qcs.back();
            qc_doc.push_back({{"sensor_id", s.sensor_id},
                              {"daytime_records", q.daytime_records},
                              {"filtered_daytime", q.filtered_daytime},
                              {"filtered_fraction", q.filtered_fraction()},
                              {"reliable", q.reliable}});
        }
        if (qcs.empty()) throw ValidationError("no sap-flow sensor for this plot-treatment");
        auto scale = [&plot](const std::string& sensor) {
            auto it = plot.sensor_scale.find(sensor);
            return it == plot.sensor_scale.end() ? 1.0 : it->second;
        };
        auto raw = sapflow::daily_transpiration(qcs, plot.area_m2, scale);
        raw.plot_id = plot_id;
        raw.treatment = treatment;
        auto smooth = sapflow::smooth_ma(raw, config_.smoothing_window);
        const auto deps = store_.snapshot({kSapInput, met, config_rel()});
        store_.put_artifact("artifacts/qc/" + subject + ".json", qc_doc.dump(2) + "\n", deps, "sapflow");
        store_.put_artifact(transpiration_path(plot_id, treatment), io::write_transpiration(raw, smooth), deps,
                            "sapflow");
    });
}

std::pair<sapflow::TranspirationSeries, sapflow::TranspirationSeries>
Project::load_transpiration(const std::string& plot, const std::string& treatment) const {
    const std::string rel = transpiration_path(plot, treatment);
    store_.require_fresh(rel);
    const csv::Table t = csv::parse(store_.read(rel), io::kTranspirationHeader, rel);
    auto raw = transpiration_block(t, false);
    auto smooth = transpiration_block(t, true);
    if (smooth.daily_t.empty()) throw ValidationError(rel + ": no smoothed rows");
    return {raw, smooth};
}

// ---- calendar & candidates

PhenologyCalendar Project::calendar(const std::string& plot_id, const std::string& treatment,
                                    std::span<const meteo::DailyMeteoRecord> dailies, bool with_maturity) const {
    const Plot& plot = config_.plot(plot_id);
    const auto dates = io::parse_phenology(store_.read(kPhenologyInput), kPhenologyInput);
    auto it = dates.find(plot_id);
    if (it == dates.end()) throw ValidationError("no phenology dates for plot '" + plot_id + "'");
    if (dailies.empty()) throw ValidationError("no daily meteorological records");
    PhenologyCalendar cal;
    cal.plot_id = plot_id;
    const int first = dailies.front().date.days(), last = dailies.back().date.days();
    for (const auto& [name, d] : it->second) {
        if (d.days() < first || d.days() > last)
            throw ValidationError(name + " date " + d.to_string() + " lies outside the meteorological record");
        cal.stages[name] = StageTime{static_cast<double>(d.days()), meteo::gdd_at(dailies, d.days())};
    }
    if (!cal.has(stage::nouaison) && cal.has(stage::bloom)) {
        if (auto rule = kb_.shift_rule_for(stage::nouaison, plot.variety))
            cal = knowledge::apply_shift(rule->with_default_offset(config_.nouaison_shift_gdd), cal, dailies);
    }
    if (with_maturity && !cal.has(stage::maturity) && store_.exists(kFruitInput)) {
        if (auto threshold = kb_.maturity_threshold(plot.variety)) {
            std::vector<aggregate::FruitSample> samples;
            for (auto& s : io::parse_fruit(store_.read(kFruitInput), kFruitInput))
                if (s.plot_id == plot_id && s.treatment == treatment) samples.push_back(std::move(s));
            auto m = aggregate::maturity_date(samples, *threshold);
            if (m.day) cal.stages[stage::maturity] = StageTime{*m.day, meteo::gdd_at(dailies, *m.day)};
        }
    }
    for (const auto& f : knowledge::check_temporal_order(kb_, cal))
        if (f.status == knowledge::OrderStatus::violated)
            throw ValidationError("phenology of plot '" + plot_id + "' violates " + f.before + " before " + f.after);
    return cal;
}

kstar::CandidateRuleConfig Project::rule_config(const std::string& plot_id) const {
    const Plot& plot = config_.plot(plot_id);
    auto cfg = kstar::rule_config_from_kb(kb_, config_.site(plot.site).region, plot.variety);
    if (config_.epsilon) cfg.derivative_epsilon = *config_.epsilon;
    if (config_.vpd_limit) cfg.vpd_limit = *config_.vpd_limit;
    if (config_.lwp_stress_mpa) cfg.lwp_stress_mpa = *config_.lwp_stress_mpa;
    return cfg;
}

std::vector<std::string> Project::candidate_inputs(const std::string& plot, const std::string& treatment) const {
    std::vector<std::string> in{dailies_path(config_.plot(plot).site), transpiration_path(plot, treatment),
                                kPhenologyInput, kLwpInput, config_rel()};
    if (!config_.knowledge_file.empty()) in.push_back(config_.knowledge_file);
    return in;
}

CandidateStage Project::candidate_stage(const std::string& plot_id, const std::string& treatment) const {
    const Plot& plot = config_.plot(plot_id);
    store_.require_inputs_fresh({dailies_path(plot.site), transpiration_path(plot_id, treatment), kPhenologyInput});
    if (store_.exists(kLwpInput)) store_.require_fresh(kLwpInput);
    return in_stage(store_, "candidates", key(plot_id, treatment), transpiration_path(plot_id, treatment), [&] {
        CandidateStage st;
        const auto dailies = load_dailies(plot.site);
        const auto [raw, smooth] = load_transpiration(plot_id, treatment);
        st.calendar = calendar(plot_id, treatment, dailies, false);
        if (store_.exists(kLwpInput))
            for (auto& r : io::parse_lwp(store_.read(kLwpInput), kLwpInput))
                if (r.plot_id == plot_id && r.treatment == treatment) st.lwp.push_back(std::move(r));
        const auto cfg = rule_config(plot_id);
        st.lwp_stress_level = cfg.lwp_stress_mpa;
        st.ratio = kstar::compute_ratio(smooth, dailies);
        st.report = kstar::detect_candidates(st.ratio, st.calendar, st.lwp, dailies, cfg);
        return st;
    });
}

CandidateStage Project::run_candidates(const std::string& plot_id, const std::string& treatment) {
    CandidateStage st = candidate_stage(plot_id, treatment);
    const auto cfg = rule_config(plot_id);
    const auto deps = store_.snapshot(inputs_present(candidate_inputs(plot_id, treatment)));
    json diag{{"plot_id", plot_id},
              {"treatment", treatment},
              {"candidate_count", st.report.candidates.size()},
              {"diagnostic", st.report.diagnostic},
              {"first_stress_date",
               st.report.first_stress_date ? json(st.report.first_stress_date->to_string()) : json(nullptr)},
              {"lwp_stress_mpa", st.lwp_stress_level},
              {"vpd_limit", cfg.vpd_limit},
              {"epsilon", cfg.derivative_epsilon},
              {"window", {{"start", stage_json(st.calendar, cfg.window_start)}, {"end", stage_json(st.calendar, cfg.window_end)}}},
              {"vpd_excluded", json::array()}};
    for (const auto& d : st.report.vpd_excluded) diag["vpd_excluded"].push_back(d.to_string());
    store_.put_artifact(ratio_path(plot_id, treatment), io::write_ratio(st.ratio), deps, "candidates");
    store_.put_artifact(diagnostic_path(plot_id, treatment), diag.dump(2) + "\n", deps, "candidates");
    store_.put_artifact(candidates_path(plot_id, treatment), candidates_json(st.report.candidates), deps,
                        "candidates");
    return st;
}

std::vector<kstar::Candidate> Project::stored_candidates(const std::string& plot, const std::string& treatment) const {
    const std::string rel = candidates_path(plot, treatment);
    store_.require_fresh(rel);
    return parse_candidates_json(store_.read(rel), rel);
}

// ---- selection

std::optional<SelectionRecord> Project::selection(const std::string& plot, const std::string& treatment) const {
    const std::string rel = selection_path(plot, treatment);
    if (!store_.exists(rel)) return std::nullopt;
    return SelectionRecord::from_json(store_.read(rel), rel);
}

SelectionRecord Project::commit_selection(const std::string& plot_id, const std::string& treatment,
                                          const SelectionRequest& req) {
    const Plot& plot = config_.plot(plot_id);
    if (std::find(plot.treatments.begin(), plot.treatments.end(), treatment) == plot.treatments.end())
        throw ValidationError("unknown treatment '" + treatment + "' for plot '" + plot_id + "'");
    std::lock_guard lock(pair_mutex(plot_id, treatment));
    const auto candidates = stored_candidates(plot_id, treatment);
    if (auto existing = selection(plot_id, treatment); existing && !req.force)
        throw ConflictError("a selection is already committed for " + plot_id + "/" + treatment + " (" +
                            existing->mode + ", " + existing->t_kstar.to_string() + "); use force to replace it");
    SelectionRecord rec;
    rec.plot_id = plot_id;
    rec.treatment = treatment;
    if (req.candidate_index) {
        const auto s = kstar::select_manual(candidates, *req.candidate_index);
        rec.t_kstar = s.date;
        rec.gdd = s.gdd;
        rec.k_star = s.k_star;
        rec.candidate_index = s.candidate_index;
    } else {
        if (!req.t || !req.k_star) throw ValidationError("selection needs a candidate index or both t and K*");
        if (!(*req.k_star > 0.0) || !std::isfinite(*req.k_star)) throw ValidationError("K* must be positive");
        const auto dailies = load_dailies(plot.site);
        if (*req.t < dailies.front().date || *req.t > dailies.back().date)
            throw ValidationError("t_K* " + req.t->to_string() + " lies outside the meteorological record");
        rec.t_kstar = *req.t;
        rec.gdd = meteo::gdd_at(dailies, req.t->days());
        rec.k_star = *req.k_star;
    }
    rec.mode = "manual";
    rec.author = req.author.empty() ? "unknown" : req.author;
    rec.timestamp = utc_now();
    rec.candidates_hash = store_.current_hash(candidates_path(plot_id, treatment));
    store_.put_artifact(selection_path(plot_id, treatment), rec.to_json(),
                        store_.snapshot({candidates_path(plot_id, treatment)}), "select");
    return rec;
}

kstar::Selection Project::to_selection(const SelectionRecord& rec) const {
    return kstar::Selection{rec.t_kstar, rec.gdd, rec.k_star, rec.candidate_index};
}

// ---- Ks

std::vector<std::string> Project::ks_inputs(const std::string& plot, const std::string& treatment) const {
    std::vector<std::string> in{selection_path(plot, treatment), transpiration_path(plot, treatment),
                                dailies_path(config_.plot(plot).site), kPhenologyInput, config_rel()};
    if (!config_.knowledge_file.empty()) in.push_back(config_.knowledge_file);
    return in;
}

kstar::KsSeries Project::preview_ks(const std::string& plot_id, const std::string& treatment,
                                   const kstar::Selection& sel) const {
    const Plot& plot = config_.plot(plot_id);
    return in_stage(store_, "ks", key(plot_id, treatment), transpiration_path(plot_id, treatment), [&] {
        const auto dailies = load_dailies(plot.site);
        const auto cal = calendar(plot_id, treatment, dailies, false);
        const auto [raw, smooth] = load_transpiration(plot_id, treatment);
        const auto kcb = kstar::build_kcb(sel, cal, config_.k0);
        auto ks = kstar::compute_ks(smooth, kcb, dailies, config_.ks_cap);
        ks.plot_id = plot_id;
        ks.treatment = treatment;
        return ks;
    });
}

kstar::KsSeries Project::run_ks(const std::string& plot_id, const std::string& treatment) {
    const std::string sel_rel = selection_path(plot_id, treatment);
    if (!store_.exists(sel_rel))
        throw AwaitingSelection("awaiting selection for " + plot_id + "/" + treatment + ": " +
                                std::to_string(stored_candidates(plot_id, treatment).size()) +
                                " candidate(s) in " + candidates_path(plot_id, treatment));
    store_.require_fresh(sel_rel);
    const auto rec = *selection(plot_id, treatment);
    const auto sel = to_selection(rec);
    const auto ks = preview_ks(plot_id, treatment, sel);
    const auto dailies = load_dailies(config_.plot(plot_id).site);
    const auto kcb = kstar::build_kcb(sel, calendar(plot_id, treatment, dailies, false), config_.k0);
    const auto deps = store_.snapshot(inputs_present(ks_inputs(plot_id, treatment)));
    json kj{{"plot_id", plot_id},      {"treatment", treatment},       {"t_kstar", kcb.t_kstar.to_string()},
            {"gdd_kstar", kcb.gdd_kstar}, {"k_star", kcb.k_star},        {"gdd_budbreak", kcb.gdd_budbreak},
            {"k0", kcb.k0},            {"selection_mode", rec.mode}};
    store_.put_artifact(kcb_path(plot_id, treatment), kj.dump(2) + "\n", deps, "ks");
    store_.put_artifact(ks_path(plot_id, treatment), io::write_ks(ks), deps, "ks");
    return ks;
}

// ---- pipeline

PipelineResult Project::run_pipeline(const std::string& plot_id, const std::string& treatment, SelectionMode mode) {
    const Plot& plot = config_.plot(plot_id);
    if (std::find(plot.treatments.begin(), plot.treatments.end(), treatment) == plot.treatments.end())
        throw ValidationError("unknown treatment '" + treatment + "' for plot '" + plot_id + "'");
    store_.require_inputs_fresh(
        inputs_present({meteo_input(plot.site), kSapInput, kPhenologyInput, kLwpInput, kFruitInput}));
    for (const char* required : {kSapInput, kPhenologyInput})
        if (!store_.exists(required)) throw StaleError(std::string(required) + ": not found", {remedy(required)});
    if (!store_.exists(meteo_input(plot.site)))
        throw StaleError(meteo_input(plot.site) + ": not found", {remedy(meteo_input(plot.site))});

    PipelineResult res;
    res.plot_id = plot_id;
    res.treatment = treatment;
    run_meteo(plot.site);
    run_sapflow(plot_id, treatment);
    const auto st = run_candidates(plot_id, treatment);
    res.candidate_count = st.report.candidates.size();

    {
        std::lock_guard lock(pair_mutex(plot_id, treatment));
        const std::string sel_rel = selection_path(plot_id, treatment);
        const auto existing = selection(plot_id, treatment);
        const bool fresh = existing && store_.staleness(sel_rel).empty();
        if (existing && !fresh && existing->mode == "manual")
            throw StaleError("selection for " + plot_id + "/" + treatment +
                                 " was committed against older candidates; commit it again",
                             {remedy(sel_rel)});
        if (!fresh) {
            if (mode == SelectionMode::pending) {
                res.awaiting_selection = true;
                return res;
            }
            if (st.report.candidates.empty())
                throw StageError("stage selection [" + key(plot_id, treatment) + "]: no candidate to select (" +
                                 st.report.diagnostic + ")");
            const auto s = kstar::select_auto(st.report.candidates);
            SelectionRecord rec;
            rec.plot_id = plot_id;
            rec.treatment = treatment;
            rec.t_kstar = s.date;
            rec.gdd = s.gdd;
            rec.k_star = s.k_star;
            rec.mode = "auto";
            rec.author = "auto";
            rec.candidates_hash = store_.current_hash(candidates_path(plot_id, treatment));
            store_.put_artifact(sel_rel, rec.to_json(), store_.snapshot({candidates_path(plot_id, treatment)}),
                                "select");
        }
    }
    res.ks = run_ks(plot_id, treatment);
    const auto dailies = load_dailies(plot.site);
    res.aggregate = in_stage(store_, "aggregate", key(plot_id, treatment), ks_path(plot_id, treatment), [&] {
        auto a = aggregate::build_aggregates(*res.ks, calendar(plot_id, treatment, dailies, true));
        a.site = plot.site;
        a.variety = plot.variety;
        a.plot_id = plot_id;
        a.treatment = treatment;
        return a;
    });
    return res;
}

// ---- aggregates & models

std::vector<aggregate::AggregateRecord> Project::run_aggregate() {
    std::vector<std::string> deps{kPhenologyInput, config_rel()};
    std::vector<std::string> ks_rels;
    for (const auto& [p, t] : pairs()) ks_rels.push_back(ks_path(p, t));
    store_.require_inputs_fresh(ks_rels);
    std::vector<aggregate::FruitSample> fruit;
    if (store_.exists(kFruitInput)) {
        store_.require_fresh(kFruitInput);
        fruit = io::parse_fruit(store_.read(kFruitInput), kFruitInput);
        deps.push_back(kFruitInput);
    }
    if (!config_.knowledge_file.empty()) deps.push_back(config_.knowledge_file);
    std::vector<aggregate::AggregateRecord> out;
    csv::Writer ds(kDatasetHeader);
    for (const auto& [p, t] : pairs()) {
        const Plot& plot = config_.plot(p);
        deps.push_back(ks_path(p, t));
        deps.push_back(dailies_path(plot.site));
        auto rec = in_stage(store_, "aggregate", key(p, t), ks_path(p, t), [&] {
            const auto ks = io::parse_ks(store_.read(ks_path(p, t)), ks_path(p, t));
            const auto dailies = load_dailies(plot.site);
            const auto cal = calendar(p, t, dailies, true);
            auto a = aggregate::build_aggregates(ks, cal);
            a.site = plot.site;
            a.variety = plot.variety;
            a.plot_id = p;
            a.treatment = t;
            return std::make_pair(a, cal.at(stage::harvest).date());
        });
        // Fruit composition at harvest: the last sample on or before the harvest date.
        const aggregate::FruitSample* at_harvest = nullptr;
        for (const auto& s : fruit)
            if (s.plot_id == p && s.treatment == t && s.date <= rec.second && (!at_harvest || s.date > at_harvest->date))
                at_harvest = &s;
        const auto& a = rec.first;
        std::vector<std::string> row{p, t, a.site, a.variety, csv::fmt(a.nou_harv, 6), csv::fmt(a.nou_ver, 6),
                                     csv::fmt(a.ver_harv, 6), csv::fmt_or_na(a.ver_mat, 6)};
        for (const auto& r : kResponses)
            row.push_back(at_harvest ? csv::fmt(*response_of(*at_harvest, r), 6) : std::string("NA"));
        ds.row(row);
        out.push_back(a);
    }
    const auto snap = store_.snapshot(deps);
    store_.put_artifact(kAggregates, aggregate::to_csv(out), snap, "aggregate");
    store_.put_artifact(kDataset, ds.str(), snap, "aggregate");
    return out;
}

std::string Project::run_tree(const std::string& response) {
    response_of({}, response);
    store_.require_fresh(kDataset);
    const auto rows = parse_dataset(store_.read(kDataset), kDataset);
    return in_stage(store_, "tree", response, kDataset, [&] {
        std::vector<const DatasetRow*> used;
        for (const auto& r : rows)
            if (r.responses.at(response)) used.push_back(&r);
        if (used.size() < 2) throw ValidationError("fewer than two plot-treatments with a " + response + " value");
        const bool with_mat = std::all_of(used.begin(), used.end(), [](auto* r) { return r->agg.ver_mat.has_value(); });
        cart::Dataset data;
        cart::Predictor variety{"variety", true, {}, {}};
        for (auto* r : used)
            if (std::find(variety.levels.begin(), variety.levels.end(), r->variety) == variety.levels.end())
                variety.levels.push_back(r->variety);
        std::sort(variety.levels.begin(), variety.levels.end());
        cart::Predictor nh{"NouHarv", false, {}, {}}, nv{"NouVer", false, {}, {}}, vh{"VerHarv", false, {}, {}},
            vm{"VerMat", false, {}, {}};
        for (auto* r : used) {
            variety.values.push_back(static_cast<double>(
                std::find(variety.levels.begin(), variety.levels.end(), r->variety) - variety.levels.begin()));
            nh.values.push_back(r->agg.nou_harv);
            nv.values.push_back(r->agg.nou_ver);
            vh.values.push_back(r->agg.ver_harv);
            if (with_mat) vm.values.push_back(*r->agg.ver_mat);
            data.y.push_back(*r->responses.at(response));
        }
        data.predictors = {variety, nh, nv, vh};
        if (with_mat) data.predictors.push_back(vm);
        const auto full = cart::grow(data, config_.cart.grow);
        const int folds = std::min<int>(config_.cart.folds, static_cast<int>(data.size()));
        const auto tree = folds >= 2 ? cart::prune_cv(full, data, config_.cart.grow,
                                                      {folds, config_.seed, config_.cart.one_se_rule})
                                     : full;
        const auto deps = store_.snapshot({kDataset, config_rel()});
        const std::string base = "artifacts/models/tree_" + response;
        store_.put_artifact(base + ".json", cart::to_json(tree), deps, "tree");
        const std::string text = cart::to_text(tree);
        store_.put_artifact(base + ".txt", text, deps, "tree");
        return text;
    });
}

std::string Project::run_flrti(const std::string& response) {
    response_of({}, response);
    store_.require_fresh(kDataset);
    const auto rows = parse_dataset(store_.read(kDataset), kDataset);
    return in_stage(store_, "flrti", response, kDataset, [&] {
        struct Curve {
            std::vector<double> gdd, ks;
            double y;
        };
        std::vector<Curve> curves;
        std::vector<std::string> deps{kDataset, config_rel(), kPhenologyInput};
        double lo = -1e300, hi = 1e300;
        for (const auto& r : rows) {
            if (!r.responses.at(response)) continue;
            const std::string rel = ks_path(r.plot_id, r.treatment);
            store_.require_fresh(rel);
            deps.push_back(rel);
            const auto ks = io::parse_ks(store_.read(rel), rel);
            const auto dailies = load_dailies(config_.plot(r.plot_id).site);
            const auto cal = calendar(r.plot_id, r.treatment, dailies, false);
            lo = std::max(lo, cal.at(stage::nouaison).gdd);
            hi = std::min(hi, cal.at(stage::harvest).gdd);
            Curve c{{}, {}, *r.responses.at(response)};
            for (const auto& pt : ks.points)
                if (pt.ks && (c.gdd.empty() || pt.gdd > c.gdd.back())) {
                    c.gdd.push_back(pt.gdd);
                    c.ks.push_back(*pt.ks);
                }
            curves.push_back(std::move(c));
        }
        if (curves.size() < 3) throw ValidationError("fewer than three plot-treatments with a " + response + " value");
        if (!(hi > lo)) throw ValidationError("the nouaison-harvest windows of the plots do not overlap");
        const auto grid = flrti::make_grid(lo, hi, config_.flrti.grid_points);
        std::vector<flrti::FunctionalSample> samples;
        for (const auto& c : curves) samples.push_back({flrti::resample(c.gdd, c.ks, grid), c.y});
        flrti::FitOptions opt;
        opt.selector = config_.flrti.selector;
        const int folds = std::min<int>(config_.flrti.folds, static_cast<int>(samples.size()));
        const auto cv = flrti::cross_validate(grid, samples, config_.flrti.sigma_grid, config_.flrti.omega_grid,
                                              folds, config_.seed, opt);
        auto model = flrti::fit(grid, samples, cv.best_sigma, cv.best_omega, opt);
        model.cv_error = cv.best_error;
        model.seed = config_.seed;
        const std::string base = "artifacts/models/flrti_" + response;
        const auto snap = store_.snapshot(deps);
        store_.put_artifact(base + ".json", flrti::to_json(model), snap, "flrti");
        store_.put_artifact(base + "_beta.csv", flrti::beta_csv(model), snap, "flrti");
        csv::Writer table("sigma,omega,cv_error");
        for (const auto& cell : cv.table)
            table.row({csv::fmt(cell.sigma, 6), csv::fmt(cell.omega, 6), csv::fmt(cell.error, 10)});
        store_.put_artifact(base + "_cv.csv", table.str(), snap, "flrti");
        std::ostringstream summary;
        std::size_t zeros = std::count(model.beta.begin(), model.beta.end(), 0.0);
        summary << "FLRTI " << response << ": n=" << samples.size() << " sigma=" << model.sigma
                << " omega=" << model.omega << " cv_error=" << csv::fmt(model.cv_error, 8) << " zero grid points "
                << zeros << "/" << model.beta.size();
        if (config_.flrti.n_perm > 0) {
            const auto perm =
                flrti::permutation_null_check(grid, samples, model, config_.flrti.n_perm, folds, config_.seed, opt);
            json pj{{"observed_r2", perm.observed_r2}, {"p_value", perm.p_value}, {"n_perm", perm.n_perm}};
            store_.put_artifact(base + "_permutation.json", pj.dump(2) + "\n", snap, "flrti");
            summary << " permutation p=" << csv::fmt(perm.p_value, 4);
        }
        summary << "\n";
        return summary.str();
    });
}

std::string Project::run_report() {
    std::ostringstream md;
    std::vector<std::string> deps;
    md << "# Water-deficit report\n\n## Candidates and selections\n\n";
    md << "| plot | treatment | candidates | selection | mode | K* |\n|---|---|---|---|---|---|\n";
    for (const auto& [p, t] : pairs()) {
        const std::string crel = candidates_path(p, t);
        std::string count = "-";
        if (store_.exists(crel)) {
            count = std::to_string(stored_candidates(p, t).size());
            deps.push_back(crel);
        }
        std::string when = "-", mode = "-", k = "-";
        if (auto s = selection(p, t)) {
            store_.require_fresh(selection_path(p, t));
            deps.push_back(selection_path(p, t));
            when = s->t_kstar.to_string();
            mode = s->mode;
            k = csv::fmt(s->k_star, 3);
        }
        md << "| " << p << " | " << t << " | " << count << " | " << when << " | " << mode << " | " << k << " |\n";
    }
    if (store_.exists(kAggregates)) {
        store_.require_fresh(kAggregates);
        deps.push_back(kAggregates);
        md << "\n## Ks integrals (GDD-weighted)\n\n```\n" << store_.read(kAggregates) << "```\n";
    }
    for (const auto& r : kResponses) {
        const std::string tree = "artifacts/models/tree_" + r + ".txt";
        if (store_.exists(tree)) {
            store_.require_fresh(tree);
            deps.push_back(tree);
            md << "\n## Regression tree: " << r << "\n\n```\n" << store_.read(tree) << "```\n";
        }
        const std::string fl = "artifacts/models/flrti_" + r + ".json";
        if (store_.exists(fl)) {
            store_.require_fresh(fl);
            deps.push_back(fl);
            const auto j = json::parse(store_.read(fl));
            const auto beta = j.at("beta").get<std::vector<double>>();
            const auto zeros = std::count(beta.begin(), beta.end(), 0.0);
            md << "\n## Functional model: " << r << "\n\nsigma = " << j.at("sigma").get<double>()
               << ", omega = " << j.at("omega").get<double>() << ", CV error = " << j.at("cv_error").get<double>()
               << ", beta exactly zero on " << zeros << " of " << beta.size()
               << " grid points. Plot data: `artifacts/models/flrti_" << r << "_beta.csv`.\n";
        }
    }
    const std::string text = md.str();
    store_.put_artifact(kReport, text, store_.snapshot(deps), "report");
    return text;
}

} // namespace vws::project
