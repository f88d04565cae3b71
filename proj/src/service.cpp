#include "vws/service.hpp"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>

namespace vws::service {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, json{{"error", message}});
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// Resolves the plot-treatment of a request or answers 404.
bool known_pair(const project::Project& p, const httplib::Request& req, httplib::Response& res) {
    const std::string& plot = req.path_params.at("id");
    const std::string& treatment = req.path_params.at("treatment");
    for (const auto& pl : p.config().plots)
        if (pl.id == plot) {
            if (std::find(pl.treatments.begin(), pl.treatments.end(), treatment) != pl.treatments.end()) return true;
            reply_error(res, 404, "unknown treatment '" + treatment + "' for plot '" + plot + "'");
            return false;
        }
    reply_error(res, 404, "unknown plot '" + plot + "'");
    return false;
}

template <class F>
void guarded(httplib::Response& res, F&& body) {
    try {
        body();
    } catch (const project::ConflictError& e) {
        reply_error(res, 409, e.what());
    } catch (const project::StaleError& e) {
        reply(res, 412, json{{"error", e.what()}, {"actions", e.actions()}});
    } catch (const ValidationError& e) {
        reply_error(res, 400, e.what());
    } catch (const std::exception& e) {
        reply_error(res, 500, e.what());
    }
}

json selection_json(const project::SelectionRecord& s) { return json::parse(s.to_json()); }

json ks_json(const kstar::KsSeries& ks) {
    json pts = json::array();
    for (const auto& p : ks.points)
        pts.push_back({{"date", p.date.to_string()}, {"gdd_cum", p.gdd}, {"ks", optional_json(p.ks)}, {"clamped", p.clamped}});
    return pts;
}

project::SelectionRequest parse_selection_body(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("selection body is not JSON: ") + e.what());
    }
    project::SelectionRequest r;
    if (j.is_number_integer()) {
        r.candidate_index = j.get<int>();
        return r;
    }
    if (!j.is_object()) throw ValidationError("selection body must be a candidate index or an object");
    for (const auto& [k, v] : j.items())
        if (k != "candidate" && k != "t" && k != "k_star" && k != "author" && k != "force")
            throw ValidationError("unknown field '" + k + "' in selection body");
    try {
        if (j.contains("candidate")) r.candidate_index = j["candidate"].get<int>();
        if (j.contains("t")) r.t = Date::parse(j["t"].get<std::string>());
        if (j.contains("k_star")) r.k_star = j["k_star"].get<double>();
        r.author = j.value("author", std::string());
        r.force = j.value("force", false);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed selection body: ") + e.what());
    }
    if (r.candidate_index && (r.t || r.k_star)) throw ValidationError("give either a candidate index or {t, k_star}, not both");
    if (!r.candidate_index && !(r.t && r.k_star)) throw ValidationError("selection body needs 'candidate' or both 't' and 'k_star'");
    return r;
}

} // namespace

void register_routes(httplib::Server& server, project::Project& project, const Options& options) {
    server.Get("/api/plots", [&project](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] {
            json out = json::array();
            for (const auto& pl : project.config().plots) {
                json treatments = json::array();
                for (const auto& t : pl.treatments) {
                    json entry{{"treatment", t}, {"candidates", nullptr}, {"selection", nullptr}};
                    if (project.store().exists(project::Project::candidates_path(pl.id, t)) &&
                        project.store().staleness(project::Project::candidates_path(pl.id, t)).empty())
                        entry["candidates"] = project.stored_candidates(pl.id, t).size();
                    if (auto s = project.selection(pl.id, t)) entry["selection"] = selection_json(*s);
                    treatments.push_back(entry);
                }
                out.push_back({{"plot_id", pl.id},
                               {"site", pl.site},
                               {"variety", pl.variety},
                               {"region", project.config().site(pl.site).region},
                               {"treatments", treatments}});
            }
            reply(res, 200, out);
        });
    });

    server.Get("/api/plots/:id/:treatment/ratio", [&project](const httplib::Request& req, httplib::Response& res) {
        if (!known_pair(project, req, res)) return;
        guarded(res, [&] {
            const auto& plot = req.path_params.at("id");
            const auto& treatment = req.path_params.at("treatment");
            const auto st = project.candidate_stage(plot, treatment);
            const auto cfg = project.rule_config(plot);
            json series = json::array();
            for (const auto& p : st.ratio.points)
                series.push_back({{"date", p.date.to_string()}, {"gdd_cum", p.gdd}, {"ratio", optional_json(p.r)}});
            json lwp = json::array();
            for (const auto& r : st.lwp) lwp.push_back({{"date", r.date.to_string()}, {"lwp_mpa", r.lwp_mpa}});
            json excluded = json::array();
            for (const auto& d : st.report.vpd_excluded) excluded.push_back(d.to_string());
            auto bound = [&](const std::string& name) -> json {
                auto s = st.calendar.find(name);
                if (!s) return nullptr;
                return {{"stage", name}, {"date", s->date().to_string()}, {"gdd_cum", s->gdd}};
            };
            reply(res, 200,
                  json{{"plot_id", plot},
                       {"treatment", treatment},
                       {"series", series},
                       {"lwp", lwp},
                       {"lwp_stress_mpa", st.lwp_stress_level},
                       {"first_stress_date", st.report.first_stress_date
                                                 ? json(st.report.first_stress_date->to_string())
                                                 : json(nullptr)},
                       {"vpd_limit", cfg.vpd_limit},
                       {"vpd_excluded", excluded},
                       {"window", {{"start", bound(cfg.window_start)}, {"end", bound(cfg.window_end)}}},
                       {"diagnostic", st.report.diagnostic}});
        });
    });

    server.Get("/api/plots/:id/:treatment/candidates",
               [&project](const httplib::Request& req, httplib::Response& res) {
                   if (!known_pair(project, req, res)) return;
                   guarded(res, [&] {
                       const auto c = project.stored_candidates(req.path_params.at("id"), req.path_params.at("treatment"));
                       res.status = 200;
                       res.set_content(project::candidates_json(c), "application/json");
                   });
               });

    server.Post("/api/plots/:id/:treatment/selection",
                [&project](const httplib::Request& req, httplib::Response& res) {
                    if (!known_pair(project, req, res)) return;
                    guarded(res, [&] {
                        auto request = parse_selection_body(req.body);
                        if (req.has_param("force")) request.force = req.get_param_value("force") != "false";
                        const auto rec = project.commit_selection(req.path_params.at("id"),
                                                                  req.path_params.at("treatment"), request);
                        reply(res, 201, selection_json(rec));
                    });
                });

    server.Get("/api/plots/:id/:treatment/ks-preview",
               [&project](const httplib::Request& req, httplib::Response& res) {
                   if (!known_pair(project, req, res)) return;
                   guarded(res, [&] {
                       const auto& plot = req.path_params.at("id");
                       const auto& treatment = req.path_params.at("treatment");
                       if (!req.has_param("candidate")) throw ValidationError("query parameter 'candidate' is required");
                       int index = 0;
                       try {
                           index = std::stoi(req.get_param_value("candidate"));
                       } catch (const std::exception&) {
                           throw ValidationError("candidate must be an integer");
                       }
                       const auto candidates = project.stored_candidates(plot, treatment);
                       const auto sel = kstar::select_manual(candidates, index);
                       const auto ks = project.preview_ks(plot, treatment, sel);
                       reply(res, 200,
                             json{{"plot_id", plot},
                                  {"treatment", treatment},
                                  {"candidate", index},
                                  {"t_kstar", sel.date.to_string()},
                                  {"k_star", sel.k_star},
                                  {"ks", ks_json(ks)}});
                   });
               });

    if (!options.static_dir.empty() && std::filesystem::is_directory(options.static_dir))
        server.set_mount_point("/", options.static_dir.string());
}

void serve(project::Project& project, const Options& options) {
    httplib::Server server;
    register_routes(server, project, options);
    if (!server.listen(options.host, options.port))
        throw Error("cannot listen on " + options.host + ":" + std::to_string(options.port));
}

} // namespace vws::service
