// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "voxlift/camera.hpp"
#include "voxlift/field.hpp"
#include "voxlift/image.hpp"

namespace voxlift {

enum class SigmaAggregate {
    kWeightedSum,  // sigma(r) = sum_i w_i * sigma_i
    kMax,          // sigma(r) = max_i sigma_i
    kOpacity,      // sigma(r) = sum_i w_i = accumulated alpha, in [0,1]
};

struct RenderOptions {
    int width = 64;
    int height = 64;
    int samples_per_ray = 64;
    // Stratified jitter along the ray. Disabled -> segment midpoints, which
    // keeps renders a pure function of (field, camera).
    bool stratified = false;
    uint64_t jitter_seed = 0;
    bool compute_normals = false;
    double tau_valid = 0.5;    // opacity threshold for valid pixels
    double normal_eps = 1e-6;  // density-gradient magnitude cutoff
    SigmaAggregate sigma_aggregate = SigmaAggregate::kWeightedSum;
};

struct RenderOutput {
    int width = 0, height = 0;
    Image rgb;          // H x W x 3, [0,1]
    Image opacity;      // H x W, 1 - transmittance
    Image depth;        // H x W, expected ray distance (0 where nothing hit)
    Image normal;       // H x W x 3, world-space unit vectors where valid
    Image ray_density;  // H x W, per-ray aggregated density sigma(r)
    std::vector<uint8_t> normal_valid;  // H x W
};

namespace detail {

// Sample parameterization of a ray's overlap with the field bounds.
struct RaySegment {
    bool hit = false;
    double t0 = 0.0, dt = 0.0;
    int n = 0;
};

inline RaySegment ray_segment(const RadianceField& field, const Ray& ray, int n) {
    RaySegment seg;
    double t0, t1;
    if (!intersect_aabb(field.bounds, ray.origin, ray.dir, t0, t1)) return seg;
    t0 = std::max(t0, 0.0);
    if (t1 <= t0) return seg;
    seg.hit = true;
    seg.t0 = t0;
    seg.dt = (t1 - t0) / n;
    seg.n = n;
    return seg;
}

inline void sample_ts(const RaySegment& seg, const RenderOptions& opts,
                      size_t pixel_index, std::vector<double>& ts) {
    ts.resize(seg.n);
    if (opts.stratified) {
        Rng rng(derive_seed(opts.jitter_seed, pixel_index));
        for (int i = 0; i < seg.n; ++i)
            ts[i] = seg.t0 + (i + rng.uniform(0.0, 1.0)) * seg.dt;
    } else {
        for (int i = 0; i < seg.n; ++i) ts[i] = seg.t0 + (i + 0.5) * seg.dt;
    }
}

// World-space density gradient by central differences, one voxel step.
inline Vec3 density_gradient(const RadianceField& field, const Vec3& p) {
    Vec3 h = field.voxel_size();
    double gx = (query_density(field, {p.x + h.x, p.y, p.z}) -
                 query_density(field, {p.x - h.x, p.y, p.z})) / (2.0 * h.x);
    double gy = (query_density(field, {p.x, p.y + h.y, p.z}) -
                 query_density(field, {p.x, p.y - h.y, p.z})) / (2.0 * h.y);
    double gz = (query_density(field, {p.x, p.y, p.z + h.z}) -
                 query_density(field, {p.x, p.y, p.z - h.z})) / (2.0 * h.z);
    return {gx, gy, gz};
}

}  // namespace detail

inline void validate_render_options(const RenderOptions& opts) {
    if (opts.width < 1 || opts.height < 1)
        throw InvalidInputError("render: width and height must be >= 1");
    if (opts.samples_per_ray < 1)
        throw InvalidInputError("render: samples_per_ray must be >= 1");
}

// Quadrature alpha compositing along one ray per pixel:
//   alpha_i = 1 - exp(-sigma_i * dt),  w_i = alpha_i * prod_{j<i}(1 - alpha_j)
//   rgb     = sum_i w_i c_i + T_final * background
inline RenderOutput render(const RadianceField& field, const CameraPose& camera,
                           const RenderOptions& opts) {
    validate_camera(camera);
    validate_render_options(opts);

    RenderOutput out;
    out.width = opts.width;
    out.height = opts.height;
    out.rgb = Image(opts.width, opts.height, 3);
    out.opacity = Image(opts.width, opts.height, 1);
    out.depth = Image(opts.width, opts.height, 1);
    out.ray_density = Image(opts.width, opts.height, 1);
    out.normal = Image(opts.width, opts.height, 3);
    out.normal_valid.assign(static_cast<size_t>(opts.width) * opts.height, 0);

    CameraFrame frame = camera_frame(camera);
    std::vector<double> ts;

    for (int py = 0; py < opts.height; ++py) {
        for (int px = 0; px < opts.width; ++px) {
            size_t pix = static_cast<size_t>(py) * opts.width + px;
            Ray ray = ray_through_pixel(frame, camera.fov_deg, px, py,
                                        opts.width, opts.height);
            detail::RaySegment seg =
                detail::ray_segment(field, ray, opts.samples_per_ray);
            if (!seg.hit) {
                for (int c = 0; c < 3; ++c) {
                    out.rgb.at(px, py, c) =
                        (c == 0 ? field.background.x
                                : c == 1 ? field.background.y : field.background.z);
                }
                continue;
            }
            detail::sample_ts(seg, opts, pix, ts);

            double transmittance = 1.0;
            Vec3 rgb{};
            double depth = 0.0, raydens = 0.0, max_sigma = 0.0;
            Vec3 normal_acc{};
            for (int i = 0; i < seg.n; ++i) {
                Vec3 p = ray.origin + ts[i] * ray.dir;
                FieldSample s = query_field(field, p);
                double alpha = 1.0 - std::exp(-s.density * seg.dt);
                double w = alpha * transmittance;
                rgb += w * s.color;
                depth += w * ts[i];
                raydens += w * s.density;
                max_sigma = std::max(max_sigma, s.density);
                if (opts.compute_normals) {
                    Vec3 g = detail::density_gradient(field, p);
                    double gn = norm(g);
                    if (gn >= opts.normal_eps) normal_acc += w * (g / -gn);
                }
                transmittance *= (1.0 - alpha);
            }
            rgb += transmittance * field.background;

            out.rgb.at(px, py, 0) = rgb.x;
            out.rgb.at(px, py, 1) = rgb.y;
            out.rgb.at(px, py, 2) = rgb.z;
            out.opacity.at(px, py, 0) = 1.0 - transmittance;
            out.depth.at(px, py, 0) = depth;
            switch (opts.sigma_aggregate) {
                case SigmaAggregate::kWeightedSum:
                    out.ray_density.at(px, py, 0) = raydens;
                    break;
                case SigmaAggregate::kMax:
                    out.ray_density.at(px, py, 0) = max_sigma;
                    break;
                case SigmaAggregate::kOpacity:
                    out.ray_density.at(px, py, 0) = 1.0 - transmittance;
                    break;
            }
            if (opts.compute_normals) {
                double nn = norm(normal_acc);
                if (1.0 - transmittance > opts.tau_valid && nn >= opts.normal_eps) {
                    Vec3 n = normal_acc / nn;
                    out.normal.at(px, py, 0) = n.x;
                    out.normal.at(px, py, 1) = n.y;
                    out.normal.at(px, py, 2) = n.z;
                    out.normal_valid[pix] = 1;
                }
            }
        }
    }
    return out;
}

// Opacity channel of the identical ray march.
inline Image render_density_mask(const RadianceField& field, const CameraPose& camera,
                                 RenderOptions opts) {
    opts.compute_normals = false;
    return render(field, camera, opts).opacity;
}

// Normal map (and validity) of the identical ray march.
inline RenderOutput render_normal_map(const RadianceField& field,
                                      const CameraPose& camera, RenderOptions opts) {
    opts.compute_normals = true;
    return render(field, camera, opts);
}

// Parameter-space gradients accumulated by the renderer backward pass.
struct FieldGradients {
    std::vector<double> density;  // same layout as RadianceField::density
    std::vector<double> color;    // same layout as RadianceField::color

    explicit FieldGradients(const RadianceField& f)
        : density(f.node_count(), 0.0), color(3 * f.node_count(), 0.0) {}
};

// Chain a per-pixel rgb gradient through the compositing quadrature into the
// lattice parameters. Must be called with the exact options used in the
// forward render so the sample positions match. Only the rgb output carries
// gradients; opacity/depth/normals are treated as observation-only channels.
inline void render_backward(const RadianceField& field, const CameraPose& camera,
                            const RenderOptions& opts, const Image& pixel_grad,
                            FieldGradients& grads) {
    validate_camera(camera);
    validate_render_options(opts);
    if (pixel_grad.width != opts.width || pixel_grad.height != opts.height ||
        pixel_grad.channels != 3)
        throw InvalidInputError("render_backward: pixel_grad shape mismatch");

    CameraFrame frame = camera_frame(camera);
    size_t nodes = field.node_count();

    struct SampleRec {
        TrilinearCell cell;
        double raw_density;
        double sigma;
        Vec3 color;
        double alpha;
        double w;
        double T;  // transmittance before this sample
        bool inside;
    };
    std::vector<SampleRec> recs;
    std::vector<double> ts;

    for (int py = 0; py < opts.height; ++py) {
        for (int px = 0; px < opts.width; ++px) {
            Vec3 g{pixel_grad.at(px, py, 0), pixel_grad.at(px, py, 1),
                   pixel_grad.at(px, py, 2)};
            if (g.x == 0.0 && g.y == 0.0 && g.z == 0.0) continue;

            size_t pix = static_cast<size_t>(py) * opts.width + px;
            Ray ray = ray_through_pixel(frame, camera.fov_deg, px, py,
                                        opts.width, opts.height);
            detail::RaySegment seg =
                detail::ray_segment(field, ray, opts.samples_per_ray);
            if (!seg.hit) continue;
            detail::sample_ts(seg, opts, pix, ts);

            // Forward replay, keeping per-sample state.
            recs.clear();
            double transmittance = 1.0;
            for (int i = 0; i < seg.n; ++i) {
                Vec3 p = ray.origin + ts[i] * ray.dir;
                SampleRec r;
                r.inside = field.bounds.contains(p);
                if (r.inside) {
                    r.cell = locate_cell(field, p);
                    double raw_c[3];
                    interpolate_raw(field, r.cell, r.raw_density, raw_c);
                    r.sigma = softplus(r.raw_density);
                    r.color = {sigmoid(raw_c[0]), sigmoid(raw_c[1]), sigmoid(raw_c[2])};
                } else {
                    r.raw_density = 0.0;
                    r.sigma = 0.0;
                    r.color = field.background;
                }
                r.alpha = 1.0 - std::exp(-r.sigma * seg.dt);
                r.T = transmittance;
                r.w = r.alpha * transmittance;
                transmittance *= (1.0 - r.alpha);
                recs.push_back(r);
            }

            // Reverse sweep. suffix = sum_{j>i} w_j c_j + T_final * background,
            // so d rgb / d sigma_i = dt * ((1-alpha_i) T_i c_i - suffix_i).
            Vec3 suffix = transmittance * field.background;
            for (int i = seg.n - 1; i >= 0; --i) {
                const SampleRec& r = recs[i];
                if (!r.inside) {
                    suffix += r.w * r.color;
                    continue;
                }
                double d_sigma =
                    seg.dt * ((1.0 - r.alpha) * r.T * dot(g, r.color) - dot(g, suffix));
                double d_raw_density = d_sigma * softplus_grad(r.raw_density);
                double dc[3] = {g.x * r.w * sigmoid_grad_from_value(r.color.x),
                                g.y * r.w * sigmoid_grad_from_value(r.color.y),
                                g.z * r.w * sigmoid_grad_from_value(r.color.z)};
                for (int k = 0; k < 8; ++k) {
                    double wt = r.cell.weight[k];
                    size_t idx = r.cell.corner[k];
                    grads.density[idx] += wt * d_raw_density;
                    grads.color[idx] += wt * dc[0];
                    grads.color[nodes + idx] += wt * dc[1];
                    grads.color[2 * nodes + idx] += wt * dc[2];
                }
                suffix += r.w * r.color;
            }
        }
    }
}

// Plain gradient-descent update used by the optimization stages.
inline void apply_gradient_step(RadianceField& field, const FieldGradients& grads,
                                double lr) {
    for (size_t i = 0; i < field.density.size(); ++i) {
        field.density[i] -= lr * grads.density[i];
        if (!std::isfinite(field.density[i]))
            throw Error("apply_gradient_step: non-finite density parameter");
    }
    for (size_t i = 0; i < field.color.size(); ++i) {
        field.color[i] -= lr * grads.color[i];
        if (!std::isfinite(field.color[i]))
            throw Error("apply_gradient_step: non-finite color parameter");
    }
}

}  // namespace voxlift
