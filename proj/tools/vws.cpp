// Command-line front end of the water-deficit pipeline.
//
// Exit codes: 0 ok, 1 validation, 2 awaiting selection, 3 internal error.

#include "vws/project.hpp"
#include "vws/service.hpp"

#include "CLI11.hpp"

#include <iostream>

using namespace vws;

namespace {

struct PairFilter {
    std::string plot;
    std::string treatment;

    std::vector<std::pair<std::string, std::string>> select(const project::Project& p) const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& pr : p.pairs())
            if ((plot.empty() || pr.first == plot) && (treatment.empty() || pr.second == treatment)) out.push_back(pr);
        if (out.empty()) throw ValidationError("no configured plot-treatment matches the filter");
        return out;
    }
};

void add_filter(CLI::App* cmd, PairFilter& f) {
    cmd->add_option("--plot", f.plot, "Restrict to one plot");
    cmd->add_option("--treatment", f.treatment, "Restrict to one treatment");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vine water-deficit software sensor"};
    app.require_subcommand(1);
    std::string project_dir;
    auto add_project = [&](CLI::App* cmd) {
        cmd->add_option("--project", project_dir, "Project directory")->required();
    };

    std::string kind, site;
    std::vector<std::string> files;
    auto* ingest = app.add_subcommand("ingest", "Validate and store raw input files");
    add_project(ingest);
    ingest->add_option("--kind", kind, "meteo | sapflow | phenology | lwp | fruit")->required();
    ingest->add_option("--site", site, "Site of a meteo file (default: file stem)");
    ingest->add_option("files", files, "Input CSV files")->required();

    auto* meteo_cmd = app.add_subcommand("meteo", "Derive daily meteorology and thermal time");
    add_project(meteo_cmd);
    meteo_cmd->add_option("--site", site, "Restrict to one site");

    PairFilter filter;
    auto* sap_cmd = app.add_subcommand("sapflow", "Sensor QC, daily transpiration and smoothing");
    add_project(sap_cmd);
    add_filter(sap_cmd, filter);

    auto* cand_cmd = app.add_subcommand("candidates", "T/ETref ratio and t_K* candidates");
    add_project(cand_cmd);
    add_filter(cand_cmd, filter);

    int candidate = 0;
    std::string date_text, author;
    double kstar_value = 0.0;
    bool force = false;
    auto* sel_cmd = app.add_subcommand("select", "Commit the t_K* selection of one plot-treatment");
    add_project(sel_cmd);
    sel_cmd->add_option("--plot", filter.plot)->required();
    sel_cmd->add_option("--treatment", filter.treatment)->required();
    auto* cand_opt = sel_cmd->add_option("--candidate", candidate, "1-based candidate index");
    auto* date_opt = sel_cmd->add_option("--date", date_text, "Explicit t_K* (YYYY-MM-DD)");
    auto* k_opt = sel_cmd->add_option("--kstar", kstar_value, "Explicit K*");
    cand_opt->excludes(date_opt)->excludes(k_opt);
    date_opt->needs(k_opt);
    k_opt->needs(date_opt);
    sel_cmd->add_option("--author", author, "Who made the choice");
    sel_cmd->add_flag("--force", force, "Replace an existing selection");

    auto* ks_cmd = app.add_subcommand("ks", "KcB and Ks from the committed selections");
    add_project(ks_cmd);
    add_filter(ks_cmd, filter);

    auto* agg_cmd = app.add_subcommand("aggregate", "Seasonal Ks integrals and the model dataset");
    add_project(agg_cmd);

    std::string response = "berry_weight";
    auto* tree_cmd = app.add_subcommand("tree", "Regression tree of a fruit response on the Ks integrals");
    add_project(tree_cmd);
    tree_cmd->add_option("--response", response, "berry_weight | sugar | acidity");

    auto* flrti_cmd = app.add_subcommand("flrti", "Functional regression of a fruit response on Ks(t)");
    add_project(flrti_cmd);
    flrti_cmd->add_option("--response", response, "berry_weight | sugar | acidity");

    auto* report_cmd = app.add_subcommand("report", "Write reports/report.md");
    add_project(report_cmd);

    std::string mode = "auto";
    auto* run_cmd = app.add_subcommand("run", "Whole pipeline per plot-treatment, then aggregates");
    add_project(run_cmd);
    add_filter(run_cmd, filter);
    run_cmd->add_option("--mode", mode, "auto | pending")->check(CLI::IsMember({"auto", "pending"}));

    service::Options sopt;
    auto* serve_cmd = app.add_subcommand("serve", "HTTP service for candidate review");
    add_project(serve_cmd);
    serve_cmd->add_option("--host", sopt.host);
    serve_cmd->add_option("--port", sopt.port);
    std::string static_dir;
    serve_cmd->add_option("--static", static_dir, "UI bundle directory (default: <project>/ui)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        project::Project proj(project_dir);
        if (*ingest) {
            const auto k = project::parse_kind(kind);
            if (!site.empty() && files.size() > 1) throw ValidationError("--site applies to a single meteo file");
            for (const auto& f : files) std::cout << proj.ingest(k, f, site).to_json();
        } else if (*meteo_cmd) {
            for (const auto& [id, s] : proj.config().sites)
                if (site.empty() || site == id) {
                    proj.run_meteo(id);
                    std::cout << "dailies " << project::Project::dailies_path(id) << "\n";
                }
        } else if (*sap_cmd) {
            for (const auto& [p, t] : filter.select(proj)) {
                proj.run_sapflow(p, t);
                std::cout << "transpiration " << project::Project::transpiration_path(p, t) << "\n";
            }
        } else if (*cand_cmd) {
            for (const auto& [p, t] : filter.select(proj)) {
                const auto st = proj.run_candidates(p, t);
                std::cout << p << "/" << t << ": " << st.report.candidates.size() << " candidate(s)";
                if (!st.report.diagnostic.empty()) std::cout << " (" << st.report.diagnostic << ")";
                std::cout << "\n";
            }
        } else if (*sel_cmd) {
            project::SelectionRequest req;
            if (*cand_opt) req.candidate_index = candidate;
            if (*date_opt) {
                req.t = Date::parse(date_text);
                req.k_star = kstar_value;
            }
            req.author = author;
            req.force = force;
            std::cout << proj.commit_selection(filter.plot, filter.treatment, req).to_json();
        } else if (*ks_cmd) {
            int waiting = 0;
            for (const auto& [p, t] : filter.select(proj)) {
                try {
                    proj.run_ks(p, t);
                    std::cout << "ks " << project::Project::ks_path(p, t) << "\n";
                } catch (const AwaitingSelection& e) {
                    std::cerr << e.what() << "\n";
                    ++waiting;
                }
            }
            if (waiting) return 2;
        } else if (*agg_cmd) {
            std::cout << aggregate::to_csv(proj.run_aggregate());
        } else if (*tree_cmd) {
            std::cout << proj.run_tree(response);
        } else if (*flrti_cmd) {
            std::cout << proj.run_flrti(response);
        } else if (*report_cmd) {
            proj.run_report();
            std::cout << "reports/report.md\n";
        } else if (*run_cmd) {
            const auto m = mode == "auto" ? project::SelectionMode::auto_select : project::SelectionMode::pending;
            int waiting = 0;
            const auto chosen = filter.select(proj);
            for (const auto& [p, t] : chosen) {
                const auto r = proj.run_pipeline(p, t, m);
                std::cout << p << "/" << t << ": " << r.candidate_count << " candidate(s), "
                          << (r.awaiting_selection ? "awaiting selection" : "done") << "\n";
                waiting += r.awaiting_selection;
            }
            if (waiting) return 2;
            if (chosen.size() == proj.pairs().size()) proj.run_aggregate();
        } else if (*serve_cmd) {
            sopt.static_dir = static_dir.empty() ? std::filesystem::path(project_dir) / "ui" : std::filesystem::path(static_dir);
            std::cout << "serving " << project_dir << " on http://" << sopt.host << ":" << sopt.port << "\n"
                      << std::flush;
            service::serve(proj, sopt);
        }
        return 0;
    } catch (const AwaitingSelection& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
