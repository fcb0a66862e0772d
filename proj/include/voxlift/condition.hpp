// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "voxlift/camera.hpp"
#include "voxlift/image.hpp"
#include "voxlift/render.hpp"

namespace voxlift {

enum class ConditionKind { kEdge, kNormal, kMask };

inline const char* condition_kind_name(ConditionKind k) {
    switch (k) {
        case ConditionKind::kEdge: return "edge";
        case ConditionKind::kNormal: return "normal";
        default: return "mask";
    }
}

// A control image paired with the pose it was rendered from.
struct ConditionImage {
    ConditionKind kind;
    Image data;  // H x W or H x W x 3, values in [0,1]
    CameraPose source_pose;
};

struct EdgeOptions {
    double binarize_threshold = 0.5;
    double sobel_threshold = 1.0;  // raw 3x3 kernel response on a 0/1 mask
    int dilation = 0;              // Chebyshev radius
};

inline Image binarize_mask(const Image& mask, double threshold) {
    if (mask.channels != 1)
        throw InvalidInputError("binarize_mask: expected single channel");
    Image out = mask;
    for (double& v : out.data) v = v > threshold ? 1.0 : 0.0;
    return out;
}

// Sobel gradient magnitude of a binary mask, thresholded to {0,1}. Borders
// use replicate padding, so a constant mask has no edges anywhere.
inline Image sobel_edge_mask(const Image& binary, const EdgeOptions& opts = {}) {
    int w = binary.width, h = binary.height;
    auto sample = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return binary.at(x, y, 0);
    };
    Image edges(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double gx = -sample(x - 1, y - 1) + sample(x + 1, y - 1)
                        - 2.0 * sample(x - 1, y) + 2.0 * sample(x + 1, y)
                        - sample(x - 1, y + 1) + sample(x + 1, y + 1);
            double gy = -sample(x - 1, y - 1) - 2.0 * sample(x, y - 1) - sample(x + 1, y - 1)
                        + sample(x - 1, y + 1) + 2.0 * sample(x, y + 1) + sample(x + 1, y + 1);
            double mag = std::sqrt(gx * gx + gy * gy);
            edges.at(x, y, 0) = mag >= opts.sobel_threshold ? 1.0 : 0.0;
        }
    for (int pass = 0; pass < opts.dilation; ++pass) {
        Image grown = edges;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (edges.at(x, y, 0) > 0.0) continue;
                for (int dy = -1; dy <= 1 && grown.at(x, y, 0) == 0.0; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int xx = x + dx, yy = y + dy;
                        if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
                        if (edges.at(xx, yy, 0) > 0.0) {
                            grown.at(x, y, 0) = 1.0;
                            break;
                        }
                    }
            }
        edges = std::move(grown);
    }
    return edges;
}

// Edge control image from an opacity mask. Adapter slot for learned
// detectors: anything mapping a binary mask to a thin boundary image can
// stand in for the default Sobel pipeline.
inline ConditionImage edge_condition(const Image& opacity_mask,
                                     const CameraPose& pose = {},
                                     const EdgeOptions& opts = {}) {
    Image binary = binarize_mask(opacity_mask, opts.binarize_threshold);
    ConditionImage cond;
    cond.kind = ConditionKind::kEdge;
    cond.data = sobel_edge_mask(binary, opts);
    cond.source_pose = pose;
    return cond;
}

// World-space normals packed into [0,1]; invalid pixels read mid-gray.
inline ConditionImage normal_condition(const RenderOutput& render_out,
                                       const CameraPose& pose) {
    ConditionImage cond;
    cond.kind = ConditionKind::kNormal;
    cond.data = Image(render_out.width, render_out.height, 3, 0.5);
    for (int y = 0; y < render_out.height; ++y)
        for (int x = 0; x < render_out.width; ++x) {
            size_t pix = static_cast<size_t>(y) * render_out.width + x;
            if (!render_out.normal_valid[pix]) continue;
            for (int c = 0; c < 3; ++c)
                cond.data.at(x, y, c) = 0.5 * (render_out.normal.at(x, y, c) + 1.0);
        }
    cond.source_pose = pose;
    return cond;
}

struct PairedConditions {
    Image rgb;              // x, from the current field
    ConditionImage normal;  // x^n, from the current field
    ConditionImage edge;    // the prior's silhouette edge
    RenderOutput current_render;
};

// Renders the current field (rgb + normals) and the prior's density mask at
// one shared pose, and derives the edge control image from the prior.
inline PairedConditions paired_conditions(const RadianceField& current,
                                          const RadianceField& prior,
                                          const CameraPose& camera,
                                          RenderOptions render_opts,
                                          const EdgeOptions& edge_opts = {}) {
    render_opts.compute_normals = true;
    PairedConditions out;
    out.current_render = render(current, camera, render_opts);
    out.rgb = out.current_render.rgb;
    out.normal = normal_condition(out.current_render, camera);

    RenderOptions prior_opts = render_opts;
    prior_opts.compute_normals = false;
    Image prior_mask = render_density_mask(prior, camera, prior_opts);
    bool any_valid = false;
    for (double v : prior_mask.data)
        if (v > render_opts.tau_valid) { any_valid = true; break; }
    if (!any_valid) throw Error("paired_conditions: prior empty at this pose");
    out.edge = edge_condition(prior_mask, camera, edge_opts);
    return out;
}

}  // namespace voxlift
