// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "voxlift/camera.hpp"
#include "voxlift/oracle.hpp"

namespace voxlift {

enum class ViewLabel { kFront = 0, kSide = 1, kBack = 2 };

inline const char* view_label_name(ViewLabel v) {
    switch (v) {
        case ViewLabel::kFront: return "front";
        case ViewLabel::kSide: return "side";
        default: return "back";
    }
}

// Half-open azimuth intervals, degrees in [-180, 180).
struct ViewRange {
    ViewLabel label;
    std::vector<std::pair<double, double>> intervals;

    double total_width() const {
        double w = 0.0;
        for (auto& [a, b] : intervals) w += b - a;
        return w;
    }
    bool contains(double azimuth) const {
        for (auto& [a, b] : intervals)
            if (azimuth >= a && azimuth < b) return true;
        return false;
    }
};

// The three ranges partition [-180, 180) exactly.
inline std::array<ViewRange, 3> default_view_ranges() {
    return {ViewRange{ViewLabel::kFront, {{-60.0, 60.0}}},
            ViewRange{ViewLabel::kSide, {{-120.0, -60.0}, {60.0, 120.0}}},
            ViewRange{ViewLabel::kBack, {{-180.0, -120.0}, {120.0, 180.0}}}};
}

inline ViewLabel classify_azimuth(double azimuth_deg) {
    double a = normalize_azimuth(azimuth_deg);
    if (a >= -60.0 && a < 60.0) return ViewLabel::kFront;
    if ((a >= -120.0 && a < -60.0) || (a >= 60.0 && a < 120.0)) return ViewLabel::kSide;
    return ViewLabel::kBack;
}

// Pure suffix concatenation, no deduplication.
inline std::array<std::string, 3> make_view_prompts(const std::string& prompt) {
    if (prompt.empty()) throw InvalidInputError("make_view_prompts: empty prompt");
    return {prompt + ", front view", prompt + ", side view", prompt + ", back view"};
}

// Denoising timesteps used for the confidence probe.
struct TimestepSet {
    std::vector<int> steps;

    static TimestepSet default_set() {
        TimestepSet t;
        for (int s = 10; s <= 100; s += 10) t.steps.push_back(s);
        return t;
    }
    void validate(int max_step) const {
        if (steps.empty()) throw InvalidConfigError("timestep set must be nonempty");
        for (size_t i = 0; i < steps.size(); ++i) {
            if (steps[i] < 1 || steps[i] > max_step)
                throw InvalidConfigError("timestep out of schedule range");
            if (i > 0 && steps[i] <= steps[i - 1])
                throw InvalidConfigError("timesteps must be strictly increasing");
        }
    }
};

// Per-(view, timestep) record kept for reporting.
struct ViewProbeSample {
    ViewLabel view;
    int t;
    double score;
};

// s_i = (1/|T|) sum_t scorer(y_i, generate(y_i, t)). Backend failures are
// rethrown with the (view, t) they occurred at.
inline std::array<double, 3> compute_view_confidence(
    GuidanceOracle& generator, SimilarityScorer& scorer, const std::string& prompt,
    const TimestepSet& timesteps, uint64_t seed = 0,
    std::vector<ViewProbeSample>* samples = nullptr) {
    if (timesteps.steps.empty())
        throw InvalidConfigError("compute_view_confidence: empty timestep set");
    auto prompts = make_view_prompts(prompt);
    std::array<double, 3> s{0.0, 0.0, 0.0};
    for (int v = 0; v < 3; ++v) {
        double acc = 0.0;
        for (int t : timesteps.steps) {
            double sc;
            try {
                Image img = generator.generate(prompts[v], t, derive_seed(seed, t));
                sc = scorer.score(prompts[v], img);
            } catch (const std::exception& e) {
                throw BackendError("view confidence probe failed at view=" +
                                   std::string(view_label_name(ViewLabel(v))) +
                                   " t=" + std::to_string(t) + ": " + e.what());
            }
            if (!std::isfinite(sc))
                throw BackendError("scorer returned non-finite value at view=" +
                                   std::string(view_label_name(ViewLabel(v))) +
                                   " t=" + std::to_string(t));
            acc += sc;
            if (samples) samples->push_back({ViewLabel(v), t, sc});
        }
        s[v] = acc / static_cast<double>(timesteps.steps.size());
    }
    return s;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
    for (double v : logits)
        if (!std::isfinite(v)) throw InvalidInputError("softmax: non-finite input");
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double denom = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        denom += p[i];
    }
    for (double& v : p) v /= denom;
    return p;
}

// Adaptive view-range distribution: p* = softmax(s).
struct ViewDistribution {
    std::array<double, 3> confidences{};   // raw mean similarities s_i
    std::array<double, 3> probabilities{}; // p*_i, sums to 1
};

inline ViewDistribution view_distribution(const std::array<double, 3>& s) {
    std::vector<double> p = softmax({s[0], s[1], s[2]});
    ViewDistribution d;
    d.confidences = s;
    d.probabilities = {p[0], p[1], p[2]};
    return d;
}

// Pose-sampling configuration beyond the azimuth behavior.
struct PoseSamplerConfig {
    double elevation_min_deg = -10.0;
    double elevation_max_deg = 45.0;
    double distance_min = 3.2;
    double distance_max = 3.8;
    double fov_deg = 40.0;
    Vec3 look_at{0.0, 0.0, 0.0};
};

// Range chosen with probability p*_i, then azimuth uniform within the range
// (sub-interval picked proportional to its width); elevation and distance
// uniform within the configured bands.
inline CameraPose sample_camera(const ViewDistribution& dist,
                                const std::array<ViewRange, 3>& ranges,
                                const PoseSamplerConfig& cfg, Rng& rng) {
    double u = rng.uniform(0.0, 1.0);
    int pick = 2;
    double cum = 0.0;
    for (int i = 0; i < 3; ++i) {
        cum += dist.probabilities[i];
        if (u < cum) { pick = i; break; }
    }
    const ViewRange& range = ranges[pick];
    double w = range.total_width();
    if (!(w > 0.0)) throw InvalidConfigError("sample_camera: empty view range");
    double x = rng.uniform(0.0, w);
    double azimuth = range.intervals.back().first;
    for (auto& [a, b] : range.intervals) {
        double span = b - a;
        if (x < span) { azimuth = a + x; break; }
        x -= span;
    }
    double elevation = rng.uniform(cfg.elevation_min_deg, cfg.elevation_max_deg);
    double distance = rng.uniform(cfg.distance_min, cfg.distance_max);
    return make_camera(azimuth, elevation, distance, cfg.fov_deg, cfg.look_at);
}

}  // namespace voxlift
