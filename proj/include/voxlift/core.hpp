// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace voxlift {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& msg) : Error(msg) {}
};

class InvalidCameraError : public Error {
public:
    explicit InvalidCameraError(const std::string& msg) : Error(msg) {}
};

class InvalidConfigError : public Error {
public:
    explicit InvalidConfigError(const std::string& msg) : Error(msg) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

class BackendError : public Error {
public:
    explicit BackendError(const std::string& msg) : Error(msg) {}
};

// ---------------------------------------------------------------------------
// Small vector math

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
    double n = norm(v);
    return n > 0.0 ? v / n : Vec3{0.0, 0.0, 0.0};
}

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Axis-aligned box in world units.
struct Aabb {
    Vec3 lo{-1.0, -1.0, -1.0};
    Vec3 hi{1.0, 1.0, 1.0};

    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }
    Vec3 extent() const { return hi - lo; }
};

// Slab intersection. Returns false when the ray misses the box entirely.
inline bool intersect_aabb(const Aabb& box, const Vec3& origin, const Vec3& dir,
                           double& t_near, double& t_far) {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
    const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < lo[a] || o[a] > hi[a]) return false;
            continue;
        }
        double inv = 1.0 / d[a];
        double ta = (lo[a] - o[a]) * inv;
        double tb = (hi[a] - o[a]) * inv;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    t_near = t0;
    t_far = t1;
    return t_far > t_near;
}

// ---------------------------------------------------------------------------
// Activations

inline double softplus(double v) {
    if (v > 30.0) return v;
    if (v < -30.0) return std::exp(v);
    return std::log1p(std::exp(v));
}

inline double sigmoid(double v) {
    if (v >= 0.0) {
        double e = std::exp(-v);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(v);
    return e / (1.0 + e);
}

// d softplus(v) / dv
inline double softplus_grad(double v) { return sigmoid(v); }

// d sigmoid(v) / dv given s = sigmoid(v)
inline double sigmoid_grad_from_value(double s) { return s * (1.0 - s); }

inline double deg_to_rad(double deg) { return deg * (M_PI / 180.0); }

// ---------------------------------------------------------------------------
// Seeded randomness. One master seed fans out into independent streams via
// splitmix64 so that adding a consumer never perturbs the others.

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
    uint64_t s = master ^ (0x632be59bd9b4e019ULL * (stream + 1));
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0) : gen_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
    int uniform_int(int lo, int hi) {  // inclusive bounds
        return std::uniform_int_distribution<int>(lo, hi)(gen_);
    }
    uint64_t next_u64() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

}  // namespace voxlift
