// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "voxlift/image.hpp"

namespace voxlift {

// Valid / boundary ray sets over one rendered snapshot, with the per-ray
// aggregated density sigma(r) they index into.
struct RayClassification {
    int width = 0, height = 0;
    std::vector<uint8_t> valid;     // opacity > tau_v
    std::vector<uint8_t> boundary;  // subset of valid
    std::vector<double> sigma;      // per-ray aggregated density
    size_t valid_count = 0;
    size_t boundary_count = 0;
    bool no_object = false;
};

using EdgeDetectorFn = std::function<Image(const Image& binary_mask)>;

// Inner one-pixel boundary: mask pixels with a 4-neighbor outside the mask.
// Pixels on the image frame count as boundary (off-image is empty).
inline Image morphological_boundary(const Image& binary) {
    int w = binary.width, h = binary.height;
    Image out(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (binary.at(x, y, 0) <= 0.0) continue;
            bool edge = x == 0 || x == w - 1 || y == 0 || y == h - 1;
            if (!edge)
                edge = binary.at(x - 1, y, 0) <= 0.0 || binary.at(x + 1, y, 0) <= 0.0 ||
                       binary.at(x, y - 1, 0) <= 0.0 || binary.at(x, y + 1, 0) <= 0.0;
            if (edge) out.at(x, y, 0) = 1.0;
        }
    return out;
}

inline EdgeDetectorFn default_boundary_detector() {
    return [](const Image& binary) { return morphological_boundary(binary); };
}

// Valid rays by opacity threshold; boundary rays from the edge detector on
// the binarized mask, intersected with the valid set. An empty valid set
// flags "no object" and the classification is not terminable.
inline RayClassification classify_rays(const Image& opacity_mask,
                                       const Image& ray_density,
                                       const EdgeDetectorFn& edge_detector,
                                       double tau_v) {
    if (opacity_mask.channels != 1 || ray_density.channels != 1)
        throw InvalidInputError("classify_rays: expected single-channel inputs");
    require_same_shape(opacity_mask, ray_density, "classify_rays");
    for (double v : opacity_mask.data)
        if (v < 0.0 || v > 1.0 || !std::isfinite(v))
            throw InvalidInputError("classify_rays: opacity outside [0,1]");

    int w = opacity_mask.width, h = opacity_mask.height;
    RayClassification rc;
    rc.width = w;
    rc.height = h;
    rc.valid.assign(static_cast<size_t>(w) * h, 0);
    rc.boundary.assign(static_cast<size_t>(w) * h, 0);
    rc.sigma.assign(ray_density.data.begin(), ray_density.data.end());

    Image binary(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (opacity_mask.at(x, y, 0) > tau_v) {
                rc.valid[static_cast<size_t>(y) * w + x] = 1;
                binary.at(x, y, 0) = 1.0;
                ++rc.valid_count;
            }
        }
    if (rc.valid_count == 0) {
        rc.no_object = true;
        return rc;
    }
    Image edges = edge_detector(binary);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            size_t pix = static_cast<size_t>(y) * w + x;
            if (edges.at(x, y, 0) > 0.0 && rc.valid[pix]) {
                rc.boundary[pix] = 1;
                ++rc.boundary_count;
            }
        }
    if (rc.boundary_count == 0) rc.no_object = true;
    return rc;
}

// Delta_r: mean sigma(r) over valid rays minus mean sigma(r) over boundary
// rays. By default boundary rays are part of the valid mean ("all valid
// pixels"); the interior-only reading is available via the flag. nullopt when
// there is no object to measure.
inline std::optional<double> boundary_integrity(const RayClassification& rc,
                                                bool boundary_in_valid_mean = true) {
    if (rc.no_object || rc.valid_count == 0 || rc.boundary_count == 0)
        return std::nullopt;
    double valid_sum = 0.0, boundary_sum = 0.0;
    size_t valid_n = 0;
    for (size_t i = 0; i < rc.sigma.size(); ++i) {
        if (!std::isfinite(rc.sigma[i]))
            throw InvalidInputError("boundary_integrity: non-finite sigma(r)");
        if (rc.valid[i] && (boundary_in_valid_mean || !rc.boundary[i])) {
            valid_sum += rc.sigma[i];
            ++valid_n;
        }
        if (rc.boundary[i]) boundary_sum += rc.sigma[i];
    }
    if (valid_n == 0) return std::nullopt;
    return valid_sum / static_cast<double>(valid_n) -
           boundary_sum / static_cast<double>(rc.boundary_count);
}

struct TerminationPolicy {
    double threshold = 0.1;        // delta_r
    int consecutive_window = 3;    // checkpoints below threshold
    int checkpoint_interval = 100; // iterations between checkpoints
    int max_iters = 3000;
};

inline void validate_policy(const TerminationPolicy& p) {
    if (!(p.threshold > 0.0)) throw InvalidConfigError("policy threshold must be > 0");
    if (p.consecutive_window < 1) throw InvalidConfigError("policy window must be >= 1");
    if (p.checkpoint_interval < 1) throw InvalidConfigError("policy interval must be >= 1");
    if (p.max_iters < 1) throw InvalidConfigError("policy max_iters must be >= 1");
}

// One checkpoint observation; delta is absent when no object formed yet.
struct DeltaCheckpoint {
    int iter = 0;
    std::optional<double> delta;
};

enum class StopReason { kNone, kBoundaryIntegrity, kBudget };

inline const char* stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::kBoundaryIntegrity: return "boundary-integrity";
        case StopReason::kBudget: return "budget";
        default: return "none";
    }
}

struct TerminationDecision {
    bool stop = false;
    StopReason reason = StopReason::kNone;
};

// Pure function of (history, policy): stop once the last `window` checkpoints
// are all below threshold, or the iteration budget is exhausted.
inline TerminationDecision should_terminate(const std::vector<DeltaCheckpoint>& history,
                                            const TerminationPolicy& policy) {
    validate_policy(policy);
    size_t win = static_cast<size_t>(policy.consecutive_window);
    if (history.size() >= win) {
        bool all_below = true;
        for (size_t i = history.size() - win; i < history.size(); ++i) {
            if (!history[i].delta || !(*history[i].delta < policy.threshold)) {
                all_below = false;
                break;
            }
        }
        if (all_below) return {true, StopReason::kBoundaryIntegrity};
    }
    if (!history.empty() && history.back().iter >= policy.max_iters)
        return {true, StopReason::kBudget};
    return {false, StopReason::kNone};
}

}  // namespace voxlift
