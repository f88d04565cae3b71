#pragma once

#include "vws/aggregate.hpp"
#include "vws/error.hpp"
#include "vws/cart.hpp"
#include "vws/flrti.hpp"
#include "vws/io.hpp"
#include "vws/knowledge.hpp"
#include "vws/kstar.hpp"
#include "vws/meteo.hpp"
#include "vws/sapflow.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace vws::project {

namespace fs = std::filesystem;

/// An artifact was computed from inputs that have since changed.
class StaleError : public ValidationError {
public:
    StaleError(const std::string& what, std::vector<std::string> actions)
        : ValidationError(what), actions_(std::move(actions)) {}
    const std::vector<std::string>& actions() const noexcept { return actions_; }

private:
    std::vector<std::string> actions_;
};

/// A pipeline stage failed; the message carries the stage and the hash of the
/// artifact it was reading.
class StageError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Committing a selection over an existing one without `force`.
class ConflictError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct Site {
    meteo::SiteConfig meteo;
    std::string region;
};

struct Plot {
    std::string id;
    std::string site;
    std::string variety;
    double area_m2 = 1.0; // ground area per vine
    std::vector<std::string> treatments;
    std::map<std::string, double> sensor_scale;
};

struct CartSettings {
    cart::GrowParams grow;
    int folds = 10;
    bool one_se_rule = true;
};

struct FlrtiSettings {
    std::size_t grid_points = 100;
    int folds = 10;
    std::vector<double> sigma_grid = flrti::kDefaultSigmaGrid;
    std::vector<double> omega_grid = flrti::kDefaultOmegaGrid;
    flrti::Selector selector = flrti::Selector::lasso;
    int n_perm = 0; // 0 skips the permutation check
};

struct Config {
    std::uint64_t seed = 1;
    std::string knowledge_file; // relative to the project root; empty = shipped default
    std::map<std::string, Site> sites;
    std::vector<Plot> plots;
    sapflow::QcRuleset qc;
    int smoothing_window = 5;
    double ks_cap = 1.2;
    // Candidate-rule settings; when set they override the knowledge file.
    std::optional<double> epsilon;
    std::optional<double> vpd_limit;
    std::optional<double> lwp_stress_mpa;
    double k0 = 0.0;
    double nouaison_shift_gdd = 100.0;
    unsigned gdd_origin_month = 4;
    unsigned gdd_origin_day = 1;
    CartSettings cart;
    FlrtiSettings flrti;

    const Plot& plot(const std::string& id) const;
    const Site& site(const std::string& id) const;
};

Config parse_config(const std::string& json_text, const std::string& source = "project.json");

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Content-addressed record of every input and artifact under a project root.
/// `manifest.json` maps a relative path to its content hash and, for derived
/// artifacts, the hashes of what it was computed from.
class Store {
public:
    explicit Store(fs::path root);

    const fs::path& root() const { return root_; }
    bool exists(const std::string& rel) const;
    std::string read(const std::string& rel) const;
    /// Hash of the file as it is on disk now.
    std::string current_hash(const std::string& rel) const;
    std::optional<std::string> recorded_hash(const std::string& rel) const;

    void put_input(const std::string& rel, const std::string& content, const std::string& kind);
    /// `stage` is the CLI verb that regenerates the artifact.
    void put_artifact(const std::string& rel, const std::string& content,
                      const std::map<std::string, std::string>& inputs, const std::string& stage);
    /// Hashes of `rels` as they are now, keyed by path (missing files map to "").
    std::map<std::string, std::string> snapshot(const std::vector<std::string>& rels) const;

    /// Remedies needed before `rel` can be trusted; empty when fresh.
    std::vector<std::string> staleness(const std::string& rel) const;
    void require_fresh(const std::string& rel) const;
    void require_inputs_fresh(const std::vector<std::string>& rels) const;

    void remove(const std::string& rel);

private:
    void load();
    void save() const;
    void staleness_into(const std::string& rel, std::vector<std::string>& out, int depth) const;

    fs::path root_;
    nlohmann::json manifest_;
    mutable std::recursive_mutex mutex_;
};

enum class InputKind { meteo, sapflow, phenology, lwp, fruit };
InputKind parse_kind(const std::string& text);
std::string to_string(InputKind kind);

struct IngestReport {
    std::string kind;
    std::string source; // file name only
    std::string stored; // relative path of the normalized input
    std::size_t rows = 0;
    std::size_t accepted = 0;
    std::vector<io::RowIssue> rejected;

    std::string to_json() const;
};

enum class SelectionMode { auto_select, pending };

struct SelectionRecord {
    std::string plot_id;
    std::string treatment;
    Date t_kstar;
    double gdd = 0.0;
    double k_star = 0.0;
    std::optional<int> candidate_index;
    std::string mode; // manual | auto
    std::string author;
    std::string timestamp; // empty for auto selections
    std::string candidates_hash;

    std::string to_json() const;
    static SelectionRecord from_json(const std::string& text, const std::string& source);
};

/// Body of a selection request: a 1-based candidate index or an explicit point.
struct SelectionRequest {
    std::optional<int> candidate_index;
    std::optional<Date> t;
    std::optional<double> k_star;
    std::string author;
    bool force = false;
};

struct CandidateStage {
    kstar::RatioSeries ratio;
    kstar::CandidateReport report;
    PhenologyCalendar calendar;
    std::vector<kstar::LwpRecord> lwp;
    double lwp_stress_level = 0.0;
};

struct PipelineResult {
    std::string plot_id;
    std::string treatment;
    bool awaiting_selection = false;
    std::size_t candidate_count = 0;
    std::optional<kstar::KsSeries> ks;
    std::optional<aggregate::AggregateRecord> aggregate;
};

/// Fruit responses available as model targets.
inline const std::vector<std::string> kResponses{"berry_weight", "sugar", "acidity"};

class Project {
public:
    explicit Project(fs::path root);

    const fs::path& root() const { return store_.root(); }
    const Config& config() const { return config_; }
    const knowledge::KnowledgeBase& kb() const { return kb_; }
    Store& store() { return store_; }
    const Store& store() const { return store_; }

    /// `site` names the station for meteo files and is ignored otherwise.
    IngestReport ingest(InputKind kind, const fs::path& file, const std::string& site = "");

    static std::string key(const std::string& plot, const std::string& treatment);
    std::vector<std::pair<std::string, std::string>> pairs() const;

    // Stage paths, relative to the root.
    static std::string meteo_input(const std::string& site);
    static std::string dailies_path(const std::string& site);
    static std::string transpiration_path(const std::string& plot, const std::string& treatment);
    static std::string ratio_path(const std::string& plot, const std::string& treatment);
    static std::string candidates_path(const std::string& plot, const std::string& treatment);
    static std::string diagnostic_path(const std::string& plot, const std::string& treatment);
    static std::string selection_path(const std::string& plot, const std::string& treatment);
    static std::string ks_path(const std::string& plot, const std::string& treatment);
    static std::string kcb_path(const std::string& plot, const std::string& treatment);

    void run_meteo(const std::string& site);
    void run_sapflow(const std::string& plot, const std::string& treatment);
    CandidateStage run_candidates(const std::string& plot, const std::string& treatment);

    /// Computes the candidate stage in memory from the stored upstream artifacts.
    CandidateStage candidate_stage(const std::string& plot, const std::string& treatment) const;
    std::vector<kstar::Candidate> stored_candidates(const std::string& plot, const std::string& treatment) const;

    std::optional<SelectionRecord> selection(const std::string& plot, const std::string& treatment) const;
    SelectionRecord commit_selection(const std::string& plot, const std::string& treatment,
                                     const SelectionRequest& request);

    /// Ks for a hypothetical selection; nothing is written.
    kstar::KsSeries preview_ks(const std::string& plot, const std::string& treatment,
                               const kstar::Selection& selection) const;
    kstar::KsSeries run_ks(const std::string& plot, const std::string& treatment);

    std::vector<aggregate::AggregateRecord> run_aggregate();
    std::string run_tree(const std::string& response);
    std::string run_flrti(const std::string& response);
    std::string run_report();

    /// meteo → sapflow → ratio → candidates → selection → KcB → Ks → aggregates
    /// for one plot-treatment.
    PipelineResult run_pipeline(const std::string& plot, const std::string& treatment, SelectionMode mode);

    /// Per-plot calendar with nouaison from the shift rule and maturity from
    /// fruit samples when the variety has a threshold.
    PhenologyCalendar calendar(const std::string& plot, const std::string& treatment,
                               std::span<const meteo::DailyMeteoRecord> dailies, bool with_maturity) const;
    kstar::CandidateRuleConfig rule_config(const std::string& plot) const;

    std::mutex& pair_mutex(const std::string& plot, const std::string& treatment);

private:
    std::vector<meteo::DailyMeteoRecord> load_dailies(const std::string& site) const;
    std::pair<sapflow::TranspirationSeries, sapflow::TranspirationSeries>
    load_transpiration(const std::string& plot, const std::string& treatment) const;
    kstar::Selection to_selection(const SelectionRecord& rec) const;
    std::vector<std::string> candidate_inputs(const std::string& plot, const std::string& treatment) const;
    std::vector<std::string> ks_inputs(const std::string& plot, const std::string& treatment) const;
    std::vector<std::string> inputs_present(std::vector<std::string> rels) const;
    std::string config_rel() const { return "project.json"; }

    Config config_;
    knowledge::KnowledgeBase kb_;
    Store store_;
    std::mutex locks_guard_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

/// Candidate export: array of {date, gdd_cum, k_value, passed_rules}.
std::string candidates_json(std::span<const kstar::Candidate> candidates);
std::vector<kstar::Candidate> parse_candidates_json(const std::string& text, const std::string& source);

} // namespace vws::project
