// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "voxlift/core.hpp"

namespace voxlift {

// Wrap an angle into [-180, 180).
inline double normalize_azimuth(double deg) {
    double a = std::fmod(deg + 180.0, 360.0);
    if (a < 0.0) a += 360.0;
    return a - 180.0;
}

// Spherical camera around a look-at point. Azimuth 0 places the camera on the
// +x axis, azimuth grows counterclockwise seen from +z, elevation tilts toward
// +z. World up is +z.
struct CameraPose {
    double azimuth_deg = 0.0;    // [-180, 180)
    double elevation_deg = 0.0;
    double distance = 3.5;       // > 0
    double fov_deg = 40.0;       // vertical, (0, 180)
    Vec3 look_at{0.0, 0.0, 0.0};

    Vec3 position() const {
        double az = deg_to_rad(azimuth_deg);
        double el = deg_to_rad(elevation_deg);
        Vec3 dir{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
        return look_at + distance * dir;
    }
};

inline CameraPose make_camera(double azimuth_deg, double elevation_deg,
                              double distance = 3.5, double fov_deg = 40.0,
                              Vec3 look_at = {0.0, 0.0, 0.0}) {
    CameraPose c;
    c.azimuth_deg = normalize_azimuth(azimuth_deg);
    c.elevation_deg = elevation_deg;
    c.distance = distance;
    c.fov_deg = fov_deg;
    c.look_at = look_at;
    return c;
}

inline void validate_camera(const CameraPose& c) {
    if (!(c.distance > 0.0) || !std::isfinite(c.distance))
        throw InvalidCameraError("camera distance must be > 0");
    if (!(c.fov_deg > 0.0) || !(c.fov_deg < 180.0))
        throw InvalidCameraError("camera fov must be in (0, 180) degrees");
    if (!std::isfinite(c.azimuth_deg) || !std::isfinite(c.elevation_deg) ||
        !is_finite(c.look_at))
        throw InvalidCameraError("camera pose has non-finite fields");
}

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit length
};

// Orthonormal camera frame; falls back to +y as the up reference when the
// view direction is near the world pole.
struct CameraFrame {
    Vec3 origin, forward, right, up;
};

inline CameraFrame camera_frame(const CameraPose& c) {
    CameraFrame f;
    f.origin = c.position();
    f.forward = normalized(c.look_at - f.origin);
    Vec3 up_ref{0.0, 0.0, 1.0};
    if (std::abs(dot(f.forward, up_ref)) > 0.999) up_ref = Vec3{0.0, 1.0, 0.0};
    f.right = normalized(cross(f.forward, up_ref));
    f.up = cross(f.right, f.forward);
    return f;
}

// Ray through the center of pixel (px, py) of a width x height image.
inline Ray ray_through_pixel(const CameraFrame& f, double fov_deg, int px, int py,
                             int width, int height) {
    double tan_half = std::tan(deg_to_rad(fov_deg) * 0.5);
    double aspect = static_cast<double>(width) / static_cast<double>(height);
    double u = ((px + 0.5) / width * 2.0 - 1.0) * tan_half * aspect;
    double v = (1.0 - (py + 0.5) / height * 2.0) * tan_half;
    Ray r;
    r.origin = f.origin;
    r.dir = normalized(f.forward + u * f.right + v * f.up);
    return r;
}

}  // namespace voxlift
