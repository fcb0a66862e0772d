// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "voxlift/camera.hpp"
#include "voxlift/image.hpp"

namespace voxlift {

// One noise-prediction query. An empty prompt means unconditional. The camera
// is advisory context: pose-aware backends (and the mock oracles) may use it,
// text-only backends ignore it. `seed` identifies the noise draw the caller
// made for this step, so deterministic backends can key off it.
struct NoiseRequest {
    const Image* x_t = nullptr;
    int t = 0;
    std::string prompt;
    const Image* condition = nullptr;
    const CameraPose* camera = nullptr;
    uint64_t seed = 0;
};

// Abstract denoising backend. predict_noise returns an estimate with the same
// shape as x_t; generate synthesizes an image for (prompt, timestep), which
// the viewpoint-confidence probe consumes. Implementations must be
// deterministic given (inputs, seed).
class GuidanceOracle {
public:
    virtual ~GuidanceOracle() = default;

    virtual bool supports_condition() const = 0;
    virtual bool supports_text() const = 0;

    virtual Image predict_noise(const NoiseRequest& req) = 0;
    virtual Image generate(const std::string& prompt, int t, uint64_t seed) = 0;
};

// Text-image similarity. Only monotone comparability across views is assumed;
// the raw scale (cosine-like or rescaled) is backend-defined.
class SimilarityScorer {
public:
    virtual ~SimilarityScorer() = default;
    virtual double score(const std::string& text, const Image& image) = 0;
};

}  // namespace voxlift
