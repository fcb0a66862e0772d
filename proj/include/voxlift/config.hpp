// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "voxlift/core.hpp"

namespace voxlift {

struct FieldConfig {
    int grid_resolution = 64;  // lattice nodes per axis
    Vec3 bounds_min{-1.0, -1.0, -1.0};
    Vec3 bounds_max{1.0, 1.0, 1.0};
    Vec3 background{1.0, 1.0, 1.0};
    int render_width = 64;
    int render_height = 64;
    int samples_per_ray = 64;
    double tau_valid = 0.5;
    double normal_eps = 1e-6;
    bool stratified = true;            // jitter ray samples during optimization
    std::string stage1_init = "blob";  // blob | haze
};

struct ViewpointConfig {
    double elevation_min = -10.0;
    double elevation_max = 45.0;
    double distance_min = 3.2;
    double distance_max = 3.8;
    double fov = 40.0;
    std::vector<int> probe_timesteps{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    std::string scorer = "brightness";  // brightness | darkness | constant:<v>
};

struct GuidanceConfig {
    int num_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    double cfg_scale_pretrained = 7.5;
    double cfg_scale_learned = 1.0;
    std::string omega = "sigma-squared";  // sigma-squared | one
    double lambda_start = 0.5;
    double lambda_end = 0.75;
    int lambda_ramp_iters = 5000;
    double t_min_frac = 0.02;
    double t_max_frac = 0.98;
    int learned_hidden = 16;
    double learned_lr = 0.01;
    // mock-sphere | mock-ellipsoid | zero | remote:<socket path>
    std::string oracle = "mock-sphere";
    double oracle_bias = 0.0;
    double target_radius = 0.5;
    Vec3 target_color{0.2, 0.2, 0.2};
    Vec3 target_axes{0.7, 0.35, 0.35};
};

struct TerminationConfig {
    double threshold = 0.1;
    int window = 3;
    int checkpoint_interval = 100;
    int max_iters = 3000;
    int probe_poses = 4;
    std::string sigma_aggregate = "opacity";  // opacity | weighted | max
    std::string detector = "sobel";            // sobel | morph
    int boundary_dilation = 2;                 // band growth for the sobel detector
    bool boundary_in_valid = true;
};

struct ConditionConfig {
    double binarize_threshold = 0.5;
    double sobel_threshold = 1.0;
    int dilation = 0;
};

struct PipelineConfig {
    std::string prompt = "an object";
    uint64_t seed = 0;
    std::string output_dir = "out";
    double stage1_lr = 0.05;
    double stage2_lr = 0.01;
    int stage2_iters = 15000;
    std::string stage2_sampling = "pstar";  // pstar | uniform
    int turntable_count = 12;
    double turntable_elevation = 15.0;
    bool dump_conditions = false;
    std::string external_prior;  // optional checkpoint/occupancy path
};

struct RunConfig {
    FieldConfig field;
    ViewpointConfig viewpoint;
    GuidanceConfig guidance;
    TerminationConfig termination;
    ConditionConfig condition;
    PipelineConfig pipeline;
};

// ---------------------------------------------------------------------------
// Table-driven binding between dotted keys and RunConfig fields. Parsing an
// unknown key is an error; echoing walks the same table, so echo -> parse is
// lossless by construction.

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw InvalidConfigError("bad number '" + s + "'");
    return v;
}

inline int parse_int(const std::string& s) {
    size_t pos = 0;
    long v = std::stol(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw InvalidConfigError("bad integer '" + s + "'");
    return static_cast<int>(v);
}

inline uint64_t parse_u64(const std::string& s) {
    size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw InvalidConfigError("bad seed '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw InvalidConfigError("bad bool '" + s + "' (use true/false)");
}

inline Vec3 parse_vec3(const std::string& s) {
    std::istringstream in(s);
    Vec3 v;
    if (!(in >> v.x >> v.y >> v.z)) throw InvalidConfigError("bad vec3 '" + s + "'");
    std::string rest;
    if (in >> rest) throw InvalidConfigError("bad vec3 '" + s + "'");
    return v;
}

inline std::string fmt_vec3(const Vec3& v) {
    return fmt_double(v.x) + " " + fmt_double(v.y) + " " + fmt_double(v.z);
}

inline std::vector<int> parse_int_list(const std::string& s) {
    std::istringstream in(s);
    std::vector<int> out;
    int v;
    while (in >> v) out.push_back(v);
    if (!in.eof()) throw InvalidConfigError("bad integer list '" + s + "'");
    if (out.empty()) throw InvalidConfigError("empty integer list");
    return out;
}

inline std::string fmt_int_list(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += " ";
        out += std::to_string(v[i]);
    }
    return out;
}

struct ConfigBinding {
    std::function<void(RunConfig&, const std::string&)> parse;
    std::function<std::string(const RunConfig&)> print;
};

inline const std::map<std::string, ConfigBinding>& config_bindings() {
    static const std::map<std::string, ConfigBinding> table = [] {
        std::map<std::string, ConfigBinding> t;
        auto dbl = [&t](const char* key, std::function<double&(RunConfig&)> ref) {
            t[key] = {[ref](RunConfig& c, const std::string& s) { ref(c) = parse_double(s); },
                      [ref](const RunConfig& c) {
                          return fmt_double(ref(const_cast<RunConfig&>(c)));
                      }};
        };
        auto integer = [&t](const char* key, std::function<int&(RunConfig&)> ref) {
            t[key] = {[ref](RunConfig& c, const std::string& s) { ref(c) = parse_int(s); },
                      [ref](const RunConfig& c) {
                          return std::to_string(ref(const_cast<RunConfig&>(c)));
                      }};
        };
        auto boolean = [&t](const char* key, std::function<bool&(RunConfig&)> ref) {
            t[key] = {[ref](RunConfig& c, const std::string& s) { ref(c) = parse_bool(s); },
                      [ref](const RunConfig& c) {
                          return ref(const_cast<RunConfig&>(c)) ? "true" : "false";
                      }};
        };
        auto str = [&t](const char* key, std::function<std::string&(RunConfig&)> ref) {
            t[key] = {[ref](RunConfig& c, const std::string& s) { ref(c) = s; },
                      [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); }};
        };
        auto vec3 = [&t](const char* key, std::function<Vec3&(RunConfig&)> ref) {
            t[key] = {[ref](RunConfig& c, const std::string& s) { ref(c) = parse_vec3(s); },
                      [ref](const RunConfig& c) {
                          return fmt_vec3(ref(const_cast<RunConfig&>(c)));
                      }};
        };
        auto u64 = [&t](const char* key, std::function<uint64_t&(RunConfig&)> ref) {
            t[key] = {[ref](RunConfig& c, const std::string& s) { ref(c) = parse_u64(s); },
                      [ref](const RunConfig& c) {
                          return std::to_string(ref(const_cast<RunConfig&>(c)));
                      }};
        };
        auto int_list = [&t](const char* key,
                             std::function<std::vector<int>&(RunConfig&)> ref) {
            t[key] = {[ref](RunConfig& c, const std::string& s) { ref(c) = parse_int_list(s); },
                      [ref](const RunConfig& c) {
                          return fmt_int_list(ref(const_cast<RunConfig&>(c)));
                      }};
        };

        integer("field.grid_resolution", [](RunConfig& c) -> int& { return c.field.grid_resolution; });
        vec3("field.bounds_min", [](RunConfig& c) -> Vec3& { return c.field.bounds_min; });
        vec3("field.bounds_max", [](RunConfig& c) -> Vec3& { return c.field.bounds_max; });
        vec3("field.background", [](RunConfig& c) -> Vec3& { return c.field.background; });
        integer("field.render_width", [](RunConfig& c) -> int& { return c.field.render_width; });
        integer("field.render_height", [](RunConfig& c) -> int& { return c.field.render_height; });
        integer("field.samples_per_ray", [](RunConfig& c) -> int& { return c.field.samples_per_ray; });
        dbl("field.tau_valid", [](RunConfig& c) -> double& { return c.field.tau_valid; });
        dbl("field.normal_eps", [](RunConfig& c) -> double& { return c.field.normal_eps; });
        boolean("field.stratified", [](RunConfig& c) -> bool& { return c.field.stratified; });
        str("field.stage1_init", [](RunConfig& c) -> std::string& { return c.field.stage1_init; });

        dbl("viewpoint.elevation_min", [](RunConfig& c) -> double& { return c.viewpoint.elevation_min; });
        dbl("viewpoint.elevation_max", [](RunConfig& c) -> double& { return c.viewpoint.elevation_max; });
        dbl("viewpoint.distance_min", [](RunConfig& c) -> double& { return c.viewpoint.distance_min; });
        dbl("viewpoint.distance_max", [](RunConfig& c) -> double& { return c.viewpoint.distance_max; });
        dbl("viewpoint.fov", [](RunConfig& c) -> double& { return c.viewpoint.fov; });
        int_list("viewpoint.probe_timesteps", [](RunConfig& c) -> std::vector<int>& { return c.viewpoint.probe_timesteps; });
        str("viewpoint.scorer", [](RunConfig& c) -> std::string& { return c.viewpoint.scorer; });

        integer("guidance.num_steps", [](RunConfig& c) -> int& { return c.guidance.num_steps; });
        dbl("guidance.beta_start", [](RunConfig& c) -> double& { return c.guidance.beta_start; });
        dbl("guidance.beta_end", [](RunConfig& c) -> double& { return c.guidance.beta_end; });
        dbl("guidance.cfg_scale_pretrained", [](RunConfig& c) -> double& { return c.guidance.cfg_scale_pretrained; });
        dbl("guidance.cfg_scale_learned", [](RunConfig& c) -> double& { return c.guidance.cfg_scale_learned; });
        str("guidance.omega", [](RunConfig& c) -> std::string& { return c.guidance.omega; });
        dbl("guidance.lambda_start", [](RunConfig& c) -> double& { return c.guidance.lambda_start; });
        dbl("guidance.lambda_end", [](RunConfig& c) -> double& { return c.guidance.lambda_end; });
        integer("guidance.lambda_ramp_iters", [](RunConfig& c) -> int& { return c.guidance.lambda_ramp_iters; });
        dbl("guidance.t_min_frac", [](RunConfig& c) -> double& { return c.guidance.t_min_frac; });
        dbl("guidance.t_max_frac", [](RunConfig& c) -> double& { return c.guidance.t_max_frac; });
        integer("guidance.learned_hidden", [](RunConfig& c) -> int& { return c.guidance.learned_hidden; });
        dbl("guidance.learned_lr", [](RunConfig& c) -> double& { return c.guidance.learned_lr; });
        str("guidance.oracle", [](RunConfig& c) -> std::string& { return c.guidance.oracle; });
        dbl("guidance.oracle_bias", [](RunConfig& c) -> double& { return c.guidance.oracle_bias; });
        dbl("guidance.target_radius", [](RunConfig& c) -> double& { return c.guidance.target_radius; });
        vec3("guidance.target_color", [](RunConfig& c) -> Vec3& { return c.guidance.target_color; });
        vec3("guidance.target_axes", [](RunConfig& c) -> Vec3& { return c.guidance.target_axes; });

        dbl("termination.threshold", [](RunConfig& c) -> double& { return c.termination.threshold; });
        integer("termination.window", [](RunConfig& c) -> int& { return c.termination.window; });
        integer("termination.checkpoint_interval", [](RunConfig& c) -> int& { return c.termination.checkpoint_interval; });
        integer("termination.max_iters", [](RunConfig& c) -> int& { return c.termination.max_iters; });
        integer("termination.probe_poses", [](RunConfig& c) -> int& { return c.termination.probe_poses; });
        str("termination.sigma_aggregate", [](RunConfig& c) -> std::string& { return c.termination.sigma_aggregate; });
        str("termination.detector", [](RunConfig& c) -> std::string& { return c.termination.detector; });
        integer("termination.boundary_dilation", [](RunConfig& c) -> int& { return c.termination.boundary_dilation; });
        boolean("termination.boundary_in_valid", [](RunConfig& c) -> bool& { return c.termination.boundary_in_valid; });

        dbl("condition.binarize_threshold", [](RunConfig& c) -> double& { return c.condition.binarize_threshold; });
        dbl("condition.sobel_threshold", [](RunConfig& c) -> double& { return c.condition.sobel_threshold; });
        integer("condition.dilation", [](RunConfig& c) -> int& { return c.condition.dilation; });

        str("pipeline.prompt", [](RunConfig& c) -> std::string& { return c.pipeline.prompt; });
        u64("pipeline.seed", [](RunConfig& c) -> uint64_t& { return c.pipeline.seed; });
        str("pipeline.output_dir", [](RunConfig& c) -> std::string& { return c.pipeline.output_dir; });
        dbl("pipeline.stage1_lr", [](RunConfig& c) -> double& { return c.pipeline.stage1_lr; });
        dbl("pipeline.stage2_lr", [](RunConfig& c) -> double& { return c.pipeline.stage2_lr; });
        integer("pipeline.stage2_iters", [](RunConfig& c) -> int& { return c.pipeline.stage2_iters; });
        str("pipeline.stage2_sampling", [](RunConfig& c) -> std::string& { return c.pipeline.stage2_sampling; });
        integer("pipeline.turntable_count", [](RunConfig& c) -> int& { return c.pipeline.turntable_count; });
        dbl("pipeline.turntable_elevation", [](RunConfig& c) -> double& { return c.pipeline.turntable_elevation; });
        boolean("pipeline.dump_conditions", [](RunConfig& c) -> bool& { return c.pipeline.dump_conditions; });
        str("pipeline.external_prior", [](RunConfig& c) -> std::string& { return c.pipeline.external_prior; });
        return t;
    }();
    return table;
}

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

inline void set_config_value(RunConfig& cfg, const std::string& dotted_key,
                             const std::string& value) {
    const auto& table = detail::config_bindings();
    auto it = table.find(dotted_key);
    if (it == table.end())
        throw InvalidConfigError("unknown config key '" + dotted_key + "'");
    try {
        it->second.parse(cfg, value);
    } catch (const InvalidConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw InvalidConfigError("bad value for '" + dotted_key + "': " + e.what());
    }
}

// "section.key=value" override, as accepted on the command line.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw InvalidConfigError("override must look like section.key=value");
    std::string key = detail::trim(assignment.substr(0, eq));
    std::string value = detail::trim(assignment.substr(eq + 1));
    set_config_value(cfg, key, value);
}

// INI-style sections matching the module names; '#' starts a comment.
inline RunConfig parse_config_text(const std::string& text,
                                   RunConfig base = RunConfig{}) {
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw InvalidConfigError("line " + std::to_string(lineno) +
                                         ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw InvalidConfigError("line " + std::to_string(lineno) +
                                         ": empty section name");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfigError("line " + std::to_string(lineno) +
                                     ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (section.empty())
            throw InvalidConfigError("line " + std::to_string(lineno) +
                                     ": key outside any [section]");
        set_config_value(base, section + "." + key, value);
    }
    return base;
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

// Fully-resolved config in the same format the parser accepts.
inline std::string echo_config(const RunConfig& cfg) {
    const auto& table = detail::config_bindings();
    std::string out;
    std::string current_section;
    for (const auto& [key, binding] : table) {
        size_t dot = key.find('.');
        std::string section = key.substr(0, dot);
        if (section != current_section) {
            if (!out.empty()) out += "\n";
            out += "[" + section + "]\n";
            current_section = section;
        }
        out += key.substr(dot + 1) + " = " + binding.print(cfg) + "\n";
    }
    return out;
}

inline void validate_run_config(const RunConfig& cfg) {
    auto check = [](bool ok, const char* msg) {
        if (!ok) throw InvalidConfigError(msg);
    };
    check(cfg.field.grid_resolution >= 2, "field.grid_resolution must be >= 2");
    check(cfg.field.render_width >= 1 && cfg.field.render_height >= 1,
          "render size must be >= 1");
    check(cfg.field.samples_per_ray >= 1, "field.samples_per_ray must be >= 1");
    check(cfg.field.bounds_min.x < cfg.field.bounds_max.x &&
              cfg.field.bounds_min.y < cfg.field.bounds_max.y &&
              cfg.field.bounds_min.z < cfg.field.bounds_max.z,
          "field bounds must be a nonempty box");
    check(cfg.field.tau_valid > 0.0 && cfg.field.tau_valid < 1.0,
          "field.tau_valid must be in (0,1)");
    check(cfg.field.stage1_init == "blob" || cfg.field.stage1_init == "haze",
          "field.stage1_init must be blob or haze");
    check(cfg.viewpoint.elevation_min <= cfg.viewpoint.elevation_max,
          "viewpoint elevation range inverted");
    check(cfg.viewpoint.distance_min > 0.0 &&
              cfg.viewpoint.distance_min <= cfg.viewpoint.distance_max,
          "viewpoint distance range invalid");
    check(cfg.viewpoint.fov > 0.0 && cfg.viewpoint.fov < 180.0,
          "viewpoint.fov must be in (0,180)");
    check(!cfg.viewpoint.probe_timesteps.empty(), "probe_timesteps empty");
    for (size_t i = 0; i < cfg.viewpoint.probe_timesteps.size(); ++i) {
        check(cfg.viewpoint.probe_timesteps[i] >= 1 &&
                  cfg.viewpoint.probe_timesteps[i] <= cfg.guidance.num_steps,
              "probe timestep outside schedule range");
        if (i > 0)
            check(cfg.viewpoint.probe_timesteps[i] > cfg.viewpoint.probe_timesteps[i - 1],
                  "probe timesteps must be strictly increasing");
    }
    check(cfg.guidance.num_steps >= 1, "guidance.num_steps must be >= 1");
    check(cfg.guidance.beta_start > 0.0 && cfg.guidance.beta_end < 1.0 &&
              cfg.guidance.beta_start <= cfg.guidance.beta_end,
          "guidance betas invalid");
    check(cfg.guidance.omega == "sigma-squared" || cfg.guidance.omega == "one",
          "guidance.omega must be sigma-squared or one");
    check(cfg.guidance.lambda_end >= cfg.guidance.lambda_start,
          "lambda schedule must be non-decreasing");
    check(cfg.guidance.t_min_frac >= 0.0 && cfg.guidance.t_max_frac <= 1.0 &&
              cfg.guidance.t_min_frac <= cfg.guidance.t_max_frac,
          "guidance timestep fractions invalid");
    check(cfg.guidance.learned_hidden >= 1, "guidance.learned_hidden must be >= 1");
    check(cfg.termination.threshold > 0.0, "termination.threshold must be > 0");
    check(cfg.termination.window >= 1, "termination.window must be >= 1");
    check(cfg.termination.checkpoint_interval >= 1,
          "termination.checkpoint_interval must be >= 1");
    check(cfg.termination.max_iters >= 1, "termination.max_iters must be >= 1");
    check(cfg.termination.probe_poses >= 1, "termination.probe_poses must be >= 1");
    check(cfg.termination.sigma_aggregate == "opacity" ||
              cfg.termination.sigma_aggregate == "weighted" ||
              cfg.termination.sigma_aggregate == "max",
          "termination.sigma_aggregate must be opacity, weighted, or max");
    check(cfg.termination.detector == "morph" || cfg.termination.detector == "sobel",
          "termination.detector must be morph or sobel");
    check(cfg.termination.boundary_dilation >= 0,
          "termination.boundary_dilation must be >= 0");
    check(cfg.condition.dilation >= 0, "condition.dilation must be >= 0");
    check(!cfg.pipeline.prompt.empty(), "pipeline.prompt must be nonempty");
    check(cfg.pipeline.stage2_iters >= 0, "pipeline.stage2_iters must be >= 0");
    check(cfg.pipeline.stage2_sampling == "pstar" ||
              cfg.pipeline.stage2_sampling == "uniform",
          "pipeline.stage2_sampling must be pstar or uniform");
    check(cfg.pipeline.turntable_count >= 1, "pipeline.turntable_count must be >= 1");
    const std::string& oracle = cfg.guidance.oracle;
    check(oracle == "mock-sphere" || oracle == "mock-ellipsoid" || oracle == "zero" ||
              oracle.rfind("remote:", 0) == 0,
          "guidance.oracle must be mock-sphere, mock-ellipsoid, zero, or remote:<path>");
    const std::string& scorer = cfg.viewpoint.scorer;
    check(scorer == "brightness" || scorer == "darkness" ||
              scorer.rfind("constant:", 0) == 0,
          "viewpoint.scorer must be brightness, darkness, or constant:<v>");
}

}  // namespace voxlift
