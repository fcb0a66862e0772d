// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "voxlift/field.hpp"
#include "voxlift/render.hpp"

namespace voxlift::testutil {

// Solid sphere: nodes inside get `inside_param`, outside stay empty.
inline RadianceField make_sphere_field(int resolution, double radius,
                                       double inside_param = 8.0,
                                       Vec3 center = {0, 0, 0},
                                       Vec3 background = {1, 1, 1},
                                       double color_param = 0.0) {
    RadianceField f = make_field(resolution, Aabb{}, background);
    f.color.assign(f.color.size(), color_param);
    for (int k = 0; k < f.nz; ++k)
        for (int j = 0; j < f.ny; ++j)
            for (int i = 0; i < f.nx; ++i) {
                Vec3 p{f.bounds.lo.x + (f.bounds.hi.x - f.bounds.lo.x) * i / (f.nx - 1),
                       f.bounds.lo.y + (f.bounds.hi.y - f.bounds.lo.y) * j / (f.ny - 1),
                       f.bounds.lo.z + (f.bounds.hi.z - f.bounds.lo.z) * k / (f.nz - 1)};
                if (norm(p - center) <= radius)
                    f.density[f.node_index(i, j, k)] = inside_param;
            }
    return f;
}

// Density fills the half-space z <= plane_z.
inline RadianceField make_halfspace_field(int resolution, double plane_z = 0.0,
                                          double inside_param = 8.0) {
    RadianceField f = make_field(resolution, Aabb{});
    for (int k = 0; k < f.nz; ++k) {
        double z = f.bounds.lo.z + (f.bounds.hi.z - f.bounds.lo.z) * k / (f.nz - 1);
        if (z <= plane_z)
            for (int j = 0; j < f.ny; ++j)
                for (int i = 0; i < f.nx; ++i)
                    f.density[f.node_index(i, j, k)] = inside_param;
    }
    return f;
}

// Seeded random pre-activation parameters, kept in the activations' sensitive
// ranges so gradients are informative.
inline RadianceField make_random_field(int resolution, uint64_t seed,
                                       double density_lo = -1.5, double density_hi = 1.5,
                                       Vec3 background = {1, 1, 1}) {
    RadianceField f = make_field(resolution, Aabb{}, background);
    Rng rng(seed);
    for (double& v : f.density) v = rng.uniform(density_lo, density_hi);
    for (double& v : f.color) v = rng.uniform(-1.0, 1.0);
    return f;
}

// Independent midpoint-quadrature transmittance along one ray, built directly
// on query_field. `oversample` multiplies the sample count.
inline double oracle_transmittance(const RadianceField& f, const Ray& ray,
                                   int samples, int oversample = 1) {
    double t0, t1;
    if (!intersect_aabb(f.bounds, ray.origin, ray.dir, t0, t1)) return 1.0;
    t0 = std::max(t0, 0.0);
    int n = samples * oversample;
    double dt = (t1 - t0) / n;
    double log_T = 0.0;
    for (int i = 0; i < n; ++i) {
        Vec3 p = ray.origin + (t0 + (i + 0.5) * dt) * ray.dir;
        log_T -= query_field(f, p).density * dt;
    }
    return std::exp(log_T);
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("voxlift_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace voxlift::testutil
