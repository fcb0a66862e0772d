// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxlift/termination.hpp"
#include "voxlift/viewpoint.hpp"

namespace voxlift {

// Everything a run leaves behind besides the binary artifacts. Enough to
// re-render every saved view: the config echo, checkpoint paths, and the
// exact turntable poses live here.
struct RunReport {
    int version = 1;
    std::string prompt;
    uint64_t seed = 0;
    std::string status = "ok";  // ok | failed
    std::string failure;

    std::array<double, 3> view_confidence{};
    std::array<double, 3> p_star{};
    std::vector<ViewProbeSample> probe_samples;

    bool stage1_ran = false;
    std::string stage1_reason;  // boundary-integrity | budget | skipped
    int stage1_iterations = 0;
    std::vector<DeltaCheckpoint> delta_history;
    std::vector<double> stage1_loss_trace;

    bool stage2_ran = false;
    int stage2_iterations = 0;
    std::vector<double> stage2_score_trace;
    std::vector<double> stage2_lora_loss_trace;

    std::vector<double> turntable_azimuths;
    double turntable_elevation = 15.0;
    double turntable_distance = 3.5;
    double turntable_fov = 40.0;
    int render_width = 0, render_height = 0, samples_per_ray = 0;

    std::string config_echo;
    std::string prior_checkpoint_path;
    std::string final_checkpoint_path;
    std::string deltas_csv_path;
    std::vector<std::string> turntable_paths;

    double wall_clock_seconds = 0.0;
    double stage1_seconds = 0.0;
    double stage2_seconds = 0.0;
};

inline nlohmann::json report_to_json(const RunReport& r) {
    nlohmann::json j;
    j["version"] = r.version;
    j["prompt"] = r.prompt;
    j["seed"] = r.seed;
    j["status"] = r.status;
    if (!r.failure.empty()) j["failure"] = r.failure;

    j["preprocess"]["confidences"] = r.view_confidence;
    j["preprocess"]["p_star"] = r.p_star;
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : r.probe_samples)
        samples.push_back({{"view", view_label_name(s.view)},
                           {"t", s.t},
                           {"score", s.score}});
    j["preprocess"]["samples"] = samples;

    j["stage1"]["ran"] = r.stage1_ran;
    j["stage1"]["reason"] = r.stage1_reason;
    j["stage1"]["iterations"] = r.stage1_iterations;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& d : r.delta_history) {
        nlohmann::json e;
        e["iter"] = d.iter;
        if (d.delta) e["delta"] = *d.delta;
        else e["delta"] = nullptr;
        hist.push_back(e);
    }
    j["stage1"]["delta_history"] = hist;
    j["stage1"]["loss_trace"] = r.stage1_loss_trace;

    j["stage2"]["ran"] = r.stage2_ran;
    j["stage2"]["iterations"] = r.stage2_iterations;
    j["stage2"]["score_trace"] = r.stage2_score_trace;
    j["stage2"]["lora_loss_trace"] = r.stage2_lora_loss_trace;

    j["turntable"]["azimuths_deg"] = r.turntable_azimuths;
    j["turntable"]["elevation_deg"] = r.turntable_elevation;
    j["turntable"]["distance"] = r.turntable_distance;
    j["turntable"]["fov_deg"] = r.turntable_fov;
    j["turntable"]["width"] = r.render_width;
    j["turntable"]["height"] = r.render_height;
    j["turntable"]["samples_per_ray"] = r.samples_per_ray;

    j["config_echo"] = r.config_echo;
    j["artifacts"]["prior_checkpoint"] = r.prior_checkpoint_path;
    j["artifacts"]["final_checkpoint"] = r.final_checkpoint_path;
    j["artifacts"]["deltas_csv"] = r.deltas_csv_path;
    j["artifacts"]["turntable"] = r.turntable_paths;

    j["timing"]["total_seconds"] = r.wall_clock_seconds;
    j["timing"]["stage1_seconds"] = r.stage1_seconds;
    j["timing"]["stage2_seconds"] = r.stage2_seconds;
    return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.version = j.at("version").get<int>();
    r.prompt = j.at("prompt").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    r.status = j.at("status").get<std::string>();
    if (j.contains("failure")) r.failure = j["failure"].get<std::string>();
    auto& pre = j.at("preprocess");
    r.view_confidence = pre.at("confidences").get<std::array<double, 3>>();
    r.p_star = pre.at("p_star").get<std::array<double, 3>>();
    auto& s1 = j.at("stage1");
    r.stage1_ran = s1.at("ran").get<bool>();
    r.stage1_reason = s1.at("reason").get<std::string>();
    r.stage1_iterations = s1.at("iterations").get<int>();
    for (const auto& e : s1.at("delta_history")) {
        DeltaCheckpoint d;
        d.iter = e.at("iter").get<int>();
        if (!e.at("delta").is_null()) d.delta = e.at("delta").get<double>();
        r.delta_history.push_back(d);
    }
    r.stage1_loss_trace = s1.at("loss_trace").get<std::vector<double>>();
    auto& s2 = j.at("stage2");
    r.stage2_ran = s2.at("ran").get<bool>();
    r.stage2_iterations = s2.at("iterations").get<int>();
    r.stage2_score_trace = s2.at("score_trace").get<std::vector<double>>();
    r.stage2_lora_loss_trace = s2.at("lora_loss_trace").get<std::vector<double>>();
    auto& tt = j.at("turntable");
    r.turntable_azimuths = tt.at("azimuths_deg").get<std::vector<double>>();
    r.turntable_elevation = tt.at("elevation_deg").get<double>();
    r.turntable_distance = tt.at("distance").get<double>();
    r.turntable_fov = tt.at("fov_deg").get<double>();
    r.render_width = tt.at("width").get<int>();
    r.render_height = tt.at("height").get<int>();
    r.samples_per_ray = tt.at("samples_per_ray").get<int>();
    r.config_echo = j.at("config_echo").get<std::string>();
    auto& art = j.at("artifacts");
    r.prior_checkpoint_path = art.at("prior_checkpoint").get<std::string>();
    r.final_checkpoint_path = art.at("final_checkpoint").get<std::string>();
    r.deltas_csv_path = art.at("deltas_csv").get<std::string>();
    r.turntable_paths = art.at("turntable").get<std::vector<std::string>>();
    auto& tm = j.at("timing");
    r.wall_clock_seconds = tm.at("total_seconds").get<double>();
    r.stage1_seconds = tm.at("stage1_seconds").get<double>();
    r.stage2_seconds = tm.at("stage2_seconds").get<double>();
    return r;
}

inline void save_report(const RunReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("save_report: cannot open " + path);
    out << report_to_json(r).dump(2) << "\n";
}

inline RunReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("load_report: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return report_from_json(j);
}

// checkpoint_iter, delta_r (empty when no object), decision
inline std::string deltas_to_csv(const std::vector<DeltaCheckpoint>& history,
                                 const TerminationPolicy& policy) {
    std::string csv = "checkpoint_iter,delta_r,decision\n";
    std::vector<DeltaCheckpoint> prefix;
    char buf[64];
    for (const auto& d : history) {
        prefix.push_back(d);
        TerminationDecision dec = should_terminate(prefix, policy);
        csv += std::to_string(d.iter);
        csv += ",";
        if (d.delta) {
            std::snprintf(buf, sizeof(buf), "%.17g", *d.delta);
            csv += buf;
        }
        csv += ",";
        csv += dec.stop ? stop_reason_name(dec.reason) : "continue";
        csv += "\n";
    }
    return csv;
}

}  // namespace voxlift
