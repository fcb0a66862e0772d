// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "voxlift/camera.hpp"
#include "voxlift/image.hpp"
#include "voxlift/oracle.hpp"

namespace voxlift {

// Geometry-inconsistency categories used when tallying annotations. The
// labels themselves come from human judgment (or a CSV of it), never from
// code.
enum class JanusCategory { kNone = 0, kMultiPart, kContentDrift, kPaperThin };

inline const char* janus_category_name(JanusCategory c) {
    switch (c) {
        case JanusCategory::kMultiPart: return "multi-part";
        case JanusCategory::kContentDrift: return "content drift";
        case JanusCategory::kPaperThin: return "paper-thin";
        default: return "none";
    }
}

inline JanusCategory parse_janus_category(const std::string& s) {
    if (s == "multi-part") return JanusCategory::kMultiPart;
    if (s == "content drift" || s == "content-drift") return JanusCategory::kContentDrift;
    if (s == "paper-thin") return JanusCategory::kPaperThin;
    if (s.empty() || s == "none") return JanusCategory::kNone;
    throw InvalidInputError("unknown janus category '" + s + "'");
}

struct JanusAnnotation {
    bool flagged = false;
    JanusCategory category = JanusCategory::kNone;
};

// Percentage of flagged objects, e.g. 3 of 30 -> 10.00.
inline double janus_rate(const std::vector<JanusAnnotation>& annotations) {
    if (annotations.empty())
        throw InvalidInputError("janus_rate: no annotations");
    size_t flagged = 0;
    for (const auto& a : annotations) flagged += a.flagged ? 1 : 0;
    return 100.0 * static_cast<double>(flagged) /
           static_cast<double>(annotations.size());
}

// Reporting convention: two decimals, round-half-away-from-zero.
inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline std::string format_percent2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

// Preference model over the k methods' images for one (prompt, view).
class PreferenceScorer {
public:
    virtual ~PreferenceScorer() = default;
    virtual std::vector<double> preferences(
        const std::string& prompt, const std::vector<const Image*>& images) = 0;
};

// renders[method][prompt][view]; every (method, prompt) pair must carry the
// same number of views.
struct EvaluationBatch {
    std::vector<std::string> methods;
    std::vector<std::string> prompts;
    std::vector<std::vector<std::vector<Image>>> renders;
};

inline void validate_batch(const EvaluationBatch& batch) {
    if (batch.methods.empty() || batch.prompts.empty())
        throw InvalidInputError("evaluation batch is empty");
    if (batch.renders.size() != batch.methods.size())
        throw InvalidInputError("evaluation batch: method row missing");
    size_t views = 0;
    for (size_t m = 0; m < batch.renders.size(); ++m) {
        if (batch.renders[m].size() != batch.prompts.size())
            throw InvalidInputError("evaluation batch: prompt column missing");
        for (size_t p = 0; p < batch.renders[m].size(); ++p) {
            if (batch.renders[m][p].empty())
                throw InvalidInputError("evaluation batch: no views for (" +
                                        batch.methods[m] + ", " + batch.prompts[p] + ")");
            if (m == 0 && p == 0) views = batch.renders[m][p].size();
            if (batch.renders[m][p].size() != views)
                throw InvalidInputError("evaluation batch: view count differs");
        }
    }
}

// Per-method preference average: ps(y) = (1/N) sum_i s_pick(y, [x^1_i ...
// x^k_i]), then the mean of ps(y) over prompts.
inline std::vector<double> pick_score(PreferenceScorer& scorer,
                                      const EvaluationBatch& batch) {
    validate_batch(batch);
    size_t k = batch.methods.size();
    size_t views = batch.renders[0][0].size();
    std::vector<double> method_score(k, 0.0);
    for (size_t p = 0; p < batch.prompts.size(); ++p) {
        std::vector<double> ps(k, 0.0);
        for (size_t v = 0; v < views; ++v) {
            std::vector<const Image*> row(k);
            for (size_t m = 0; m < k; ++m) row[m] = &batch.renders[m][p][v];
            std::vector<double> pref = scorer.preferences(batch.prompts[p], row);
            if (pref.size() != k)
                throw BackendError("preference scorer returned wrong arity");
            for (size_t m = 0; m < k; ++m) ps[m] += pref[m];
        }
        for (size_t m = 0; m < k; ++m)
            method_score[m] += ps[m] / static_cast<double>(views);
    }
    for (double& v : method_score) v /= static_cast<double>(batch.prompts.size());
    return method_score;
}

// The fixed render pose for text-consistency scoring.
inline CameraPose canonical_clip_pose(double distance = 3.5, double fov_deg = 40.0) {
    return make_camera(30.0, 45.0, distance, fov_deg);
}

struct ClipRender {
    std::string prompt;
    Image image;
    CameraPose pose;
};

inline bool same_pose(const CameraPose& a, const CameraPose& b, double tol = 1e-9) {
    return std::abs(a.azimuth_deg - b.azimuth_deg) < tol &&
           std::abs(a.elevation_deg - b.elevation_deg) < tol;
}

// Average similarity over prompts, one render per prompt at the canonical
// pose. Multi-view averaging is deliberately not offered here.
inline double clip_score(SimilarityScorer& scorer,
                         const std::vector<ClipRender>& renders,
                         const CameraPose& expected_pose = canonical_clip_pose()) {
    if (renders.empty()) throw InvalidInputError("clip_score: no renders");
    double acc = 0.0;
    for (const auto& r : renders) {
        if (!same_pose(r.pose, expected_pose))
            throw InvalidInputError("clip_score: render for '" + r.prompt +
                                    "' is not at the canonical pose");
        acc += scorer.score(r.prompt, r.image);
    }
    return acc / static_cast<double>(renders.size());
}

}  // namespace voxlift
