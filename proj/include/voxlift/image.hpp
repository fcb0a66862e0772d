// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "voxlift/core.hpp"

namespace voxlift {

// Dense row-major float image, channels interleaved. Pixel (0,0) is the
// top-left corner.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    double& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b))
        throw InvalidInputError(std::string(what) + ": image shape mismatch");
}

inline Image operator+(const Image& a, const Image& b) {
    require_same_shape(a, b, "operator+");
    Image out = a;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    return out;
}

inline Image operator-(const Image& a, const Image& b) {
    require_same_shape(a, b, "operator-");
    Image out = a;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

inline Image operator*(double s, const Image& a) {
    Image out = a;
    for (double& v : out.data) v *= s;
    return out;
}

inline double mean_abs(const Image& a) {
    if (a.empty()) return 0.0;
    double acc = 0.0;
    for (double v : a.data) acc += std::abs(v);
    return acc / static_cast<double>(a.size());
}

inline double max_abs_diff(const Image& a, const Image& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

inline double mean(const Image& a) {
    if (a.empty()) return 0.0;
    double acc = 0.0;
    for (double v : a.data) acc += v;
    return acc / static_cast<double>(a.size());
}

// Root-mean-square difference, used as an image distance.
inline double rms_diff(const Image& a, const Image& b) {
    require_same_shape(a, b, "rms_diff");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.size()));
}

// Intersection-over-union of two binary masks (thresholded at `tau`).
inline double mask_iou(const Image& a, const Image& b, double tau = 0.5) {
    require_same_shape(a, b, "mask_iou");
    double inter = 0.0, uni = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        bool pa = a.data[i] > tau;
        bool pb = b.data[i] > tau;
        inter += (pa && pb) ? 1.0 : 0.0;
        uni += (pa || pb) ? 1.0 : 0.0;
    }
    return uni > 0.0 ? inter / uni : 1.0;
}

// Standard-normal image with every element drawn from a dedicated stream.
// Oracles that need to reproduce a draw can do so from the same seed.
inline Image gaussian_image(int w, int h, int c, uint64_t seed) {
    Image img(w, h, c);
    Rng rng(seed);
    for (double& v : img.data) v = rng.normal();
    return img;
}

}  // namespace voxlift
