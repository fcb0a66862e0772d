// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxlift/camera.hpp"
#include "voxlift/guidance.hpp"
#include "voxlift/image.hpp"
#include "voxlift/render.hpp"

namespace voxlift {

// Analytic silhouettes rendered by direct ray intersection tests. These serve
// both as mock-oracle targets and as geometry ground truth in tests; they do
// not touch the volumetric code paths.

inline Image analytic_sphere_mask(const CameraPose& camera, int w, int h,
                                  Vec3 center = {0, 0, 0}, double radius = 0.5) {
    Image mask(w, h, 1);
    CameraFrame frame = camera_frame(camera);
    for (int py = 0; py < h; ++py)
        for (int px = 0; px < w; ++px) {
            Ray r = ray_through_pixel(frame, camera.fov_deg, px, py, w, h);
            Vec3 oc = r.origin - center;
            double b = dot(oc, r.dir);
            double c = dot(oc, oc) - radius * radius;
            double disc = b * b - c;
            if (disc >= 0.0 && -b + std::sqrt(disc) > 0.0)
                mask.at(px, py, 0) = 1.0;
        }
    return mask;
}

inline Image analytic_ellipsoid_mask(const CameraPose& camera, int w, int h,
                                     Vec3 center = {0, 0, 0},
                                     Vec3 semi_axes = {0.7, 0.35, 0.35}) {
    Image mask(w, h, 1);
    CameraFrame frame = camera_frame(camera);
    for (int py = 0; py < h; ++py)
        for (int px = 0; px < w; ++px) {
            Ray r = ray_through_pixel(frame, camera.fov_deg, px, py, w, h);
            // Scale to the unit sphere's space.
            Vec3 o{(r.origin.x - center.x) / semi_axes.x,
                   (r.origin.y - center.y) / semi_axes.y,
                   (r.origin.z - center.z) / semi_axes.z};
            Vec3 d{r.dir.x / semi_axes.x, r.dir.y / semi_axes.y,
                   r.dir.z / semi_axes.z};
            double a = dot(d, d);
            double b = dot(o, d);
            double c = dot(o, o) - 1.0;
            double disc = b * b - a * c;
            if (disc >= 0.0 && (-b + std::sqrt(disc)) / a > 0.0)
                mask.at(px, py, 0) = 1.0;
        }
    return mask;
}

inline Image silhouette_to_rgb(const Image& mask, Vec3 object_color,
                               Vec3 background) {
    Image img(mask.width, mask.height, 3);
    for (int py = 0; py < mask.height; ++py)
        for (int px = 0; px < mask.width; ++px) {
            double m = mask.at(px, py, 0);
            img.at(px, py, 0) = m * object_color.x + (1.0 - m) * background.x;
            img.at(px, py, 1) = m * object_color.y + (1.0 - m) * background.y;
            img.at(px, py, 2) = m * object_color.z + (1.0 - m) * background.z;
        }
    return img;
}

inline TargetFn sphere_target_fn(int w, int h, Vec3 center = {0, 0, 0},
                                 double radius = 0.5,
                                 Vec3 object_color = {0.2, 0.2, 0.2},
                                 Vec3 background = {1, 1, 1}) {
    return [=](const CameraPose& cam) {
        return silhouette_to_rgb(analytic_sphere_mask(cam, w, h, center, radius),
                                 object_color, background);
    };
}

inline TargetFn ellipsoid_target_fn(int w, int h, Vec3 center = {0, 0, 0},
                                    Vec3 semi_axes = {0.7, 0.35, 0.35},
                                    Vec3 object_color = {0.2, 0.2, 0.2},
                                    Vec3 background = {1, 1, 1}) {
    return [=](const CameraPose& cam) {
        return silhouette_to_rgb(
            analytic_ellipsoid_mask(cam, w, h, center, semi_axes), object_color,
            background);
    };
}

// Condition-respecting target: the prior's silhouette at the requested pose,
// recolored. Drives stage-2 style optimization toward detailed texture while
// the geometry stays the prior's.
inline TargetFn prior_silhouette_target_fn(RadianceField prior, RenderOptions opts,
                                           Vec3 object_color = {0.7, 0.35, 0.15},
                                           Vec3 background = {1, 1, 1},
                                           double tau = 0.5) {
    opts.stratified = false;
    opts.compute_normals = false;
    return [prior = std::move(prior), opts, object_color, background,
            tau](const CameraPose& cam) {
        Image mask = render_density_mask(prior, cam, opts);
        for (double& v : mask.data) v = v > tau ? 1.0 : 0.0;
        return silhouette_to_rgb(mask, object_color, background);
    };
}

// Mean disagreement between a field's renders and per-view reference images
// over a probe set of poses.
inline double multi_view_target_disagreement(const RadianceField& field,
                                             const TargetFn& reference,
                                             const std::vector<CameraPose>& poses,
                                             const RenderOptions& opts) {
    double acc = 0.0;
    for (const CameraPose& cam : poses) {
        RenderOutput ro = render(field, cam, opts);
        acc += rms_diff(ro.rgb, reference(cam));
    }
    return acc / static_cast<double>(poses.size());
}

}  // namespace voxlift
