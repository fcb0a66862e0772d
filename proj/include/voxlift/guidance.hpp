// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "voxlift/image.hpp"
#include "voxlift/oracle.hpp"

namespace voxlift {

// DDPM-style noise schedule with linearly spaced per-step variances.
// alpha(t)^2 + sigma(t)^2 = 1 for every t.
struct NoiseSchedule {
    int num_steps = 1000;
    std::vector<double> betas;      // size num_steps, index t-1
    std::vector<double> alpha_bar;  // cumulative product of (1 - beta)

    static NoiseSchedule linear(int num_steps = 1000, double beta_start = 1e-4,
                                double beta_end = 2e-2) {
        if (num_steps < 1) throw InvalidConfigError("schedule needs >= 1 step");
        NoiseSchedule s;
        s.num_steps = num_steps;
        s.betas.resize(num_steps);
        s.alpha_bar.resize(num_steps);
        double prod = 1.0;
        for (int i = 0; i < num_steps; ++i) {
            double frac = num_steps == 1 ? 0.0 : static_cast<double>(i) / (num_steps - 1);
            s.betas[i] = beta_start + (beta_end - beta_start) * frac;
            prod *= (1.0 - s.betas[i]);
            s.alpha_bar[i] = prod;
        }
        return s;
    }

    void check_t(int t) const {
        if (t < 1 || t > num_steps)
            throw InvalidInputError("timestep " + std::to_string(t) +
                                    " outside [1, " + std::to_string(num_steps) + "]");
    }
    double alpha(int t) const {  // sqrt(alpha_bar_t)
        check_t(t);
        return std::sqrt(alpha_bar[t - 1]);
    }
    double sigma(int t) const {  // sqrt(1 - alpha_bar_t)
        check_t(t);
        return std::sqrt(1.0 - alpha_bar[t - 1]);
    }
};

enum class OmegaMode {
    kSigmaSquared,  // omega(t) = sigma_t^2
    kOne,           // omega(t) = 1
};

inline double omega_weight(const NoiseSchedule& schedule, int t, OmegaMode mode) {
    if (mode == OmegaMode::kOne) return 1.0;
    double s = schedule.sigma(t);
    return s * s;
}

// x_t = alpha_t * x + sigma_t * eps
inline Image add_noise(const Image& x, int t, const Image& eps,
                       const NoiseSchedule& schedule) {
    schedule.check_t(t);
    require_same_shape(x, eps, "add_noise");
    double a = schedule.alpha(t), s = schedule.sigma(t);
    Image out = x;
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = a * x.data[i] + s * eps.data[i];
    return out;
}

// Classifier-free guidance blend: uncond + scale * (cond - uncond). Scale 1
// is the exact identity on the conditional prediction.
inline Image apply_cfg(const Image& cond, const Image& uncond, double scale) {
    require_same_shape(cond, uncond, "apply_cfg");
    if (scale == 1.0) return cond;
    Image out = cond;
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = uncond.data[i] + scale * (cond.data[i] - uncond.data[i]);
    return out;
}

// The noise draw convention shared by the optimization loops and backends
// that must reproduce a draw (see NoiseRequest::seed).
inline Image sample_noise_like(const Image& x, uint64_t seed) {
    return gaussian_image(x.width, x.height, x.channels, seed);
}

// Per-call context for the distillation score terms.
struct ScoreContext {
    double cfg_scale = 7.5;
    OmegaMode omega = OmegaMode::kSigmaSquared;
    const CameraPose* camera = nullptr;
    const Image* condition = nullptr;
    uint64_t seed = 0;
};

// Conditional/unconditional pair blended by CFG; a scale of exactly 1 is the
// identity on the conditional branch and skips the second query.
inline Image predict_with_cfg(GuidanceOracle& oracle, const Image& x_t, int t,
                              const std::string& prompt, const ScoreContext& ctx) {
    NoiseRequest req;
    req.x_t = &x_t;
    req.t = t;
    req.prompt = prompt;
    req.condition = ctx.condition;
    req.camera = ctx.camera;
    req.seed = ctx.seed;
    Image cond = oracle.predict_noise(req);
    if (ctx.cfg_scale == 1.0) return cond;
    req.prompt.clear();
    Image uncond = oracle.predict_noise(req);
    return apply_cfg(cond, uncond, ctx.cfg_scale);
}

// omega(t) * (eps_hat(x_t, t, y) - eps). The prediction is a constant with
// respect to the field; chaining through d x / d theta happens in the
// renderer backward pass.
inline Image sds_score(GuidanceOracle& oracle, const Image& x, int t,
                       const std::string& prompt, const Image& eps,
                       const NoiseSchedule& schedule, const ScoreContext& ctx = {}) {
    if (!prompt.empty() && !oracle.supports_text())
        throw InvalidConfigError("sds_score: oracle does not support text prompts");
    Image x_t = add_noise(x, t, eps, schedule);
    Image pred = predict_with_cfg(oracle, x_t, t, prompt, ctx);
    require_same_shape(pred, eps, "sds_score");
    double w = omega_weight(schedule, t, ctx.omega);
    Image out = pred;
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = w * (pred.data[i] - eps.data[i]);
    return out;
}

// Loss coefficient ramp for the learned-score term.
struct LambdaSchedule {
    double lambda_start = 0.5;
    double lambda_end = 0.75;
    int ramp_iters = 5000;
};

inline double lambda_at(const LambdaSchedule& s, int iter) {
    if (iter < 0) throw InvalidInputError("lambda_at: negative iteration");
    if (s.ramp_iters <= 0) return s.lambda_end;
    double frac = std::min(static_cast<double>(iter) / s.ramp_iters, 1.0);
    return s.lambda_start + (s.lambda_end - s.lambda_start) * frac;
}

// Uniform integer timestep in the middle band of the schedule.
inline int sample_distill_timestep(const NoiseSchedule& schedule, Rng& rng,
                                   double t_min_frac = 0.02, double t_max_frac = 0.98) {
    int lo = std::max(1, static_cast<int>(std::lround(t_min_frac * schedule.num_steps)));
    int hi = std::min(schedule.num_steps,
                      static_cast<int>(std::lround(t_max_frac * schedule.num_steps)));
    if (hi < lo) hi = lo;
    return rng.uniform_int(lo, hi);
}

// ---------------------------------------------------------------------------
// Mock oracles

using TargetFn = std::function<Image(const CameraPose&)>;

// Test oracle with a known fixed point: predicts the exact noise that would
// move x_t toward alpha_t * target(camera). With bias_beta > 0 the target is
// blended toward the front-view target regardless of the requested camera,
// reproducing a viewpoint-biased 2D backend.
class MockTargetOracle : public GuidanceOracle {
public:
    MockTargetOracle(TargetFn target_fn, NoiseSchedule schedule,
                     double bias_beta = 0.0)
        : target_fn_(std::move(target_fn)), schedule_(std::move(schedule)),
          bias_beta_(bias_beta) {}

    bool supports_condition() const override { return true; }
    bool supports_text() const override { return true; }

    Image target_at(const CameraPose& camera) const {
        Image target = target_fn_(camera);
        if (bias_beta_ > 0.0) {
            CameraPose front = camera;
            front.azimuth_deg = 0.0;
            Image front_target = target_fn_(front);
            require_same_shape(target, front_target, "MockTargetOracle");
            for (size_t i = 0; i < target.size(); ++i)
                target.data[i] = (1.0 - bias_beta_) * target.data[i] +
                                 bias_beta_ * front_target.data[i];
        }
        return target;
    }

    Image predict_noise(const NoiseRequest& req) override {
        if (!req.x_t) throw BackendError("MockTargetOracle: missing x_t");
        if (!req.camera)
            throw BackendError("MockTargetOracle: camera context required");
        schedule_.check_t(req.t);
        Image target = target_at(*req.camera);
        require_same_shape(*req.x_t, target, "MockTargetOracle");
        double a = schedule_.alpha(req.t), s = schedule_.sigma(req.t);
        Image out = target;
        for (size_t i = 0; i < out.size(); ++i)
            out.data[i] = (req.x_t->data[i] - a * target.data[i]) / s;
        return out;
    }

    // Synthesizes the target at a representative pose of the view named in
    // the prompt suffix (front when no suffix is recognized).
    Image generate(const std::string& prompt, int t, uint64_t /*seed*/) override {
        schedule_.check_t(t);
        double azimuth = 0.0;
        auto ends_with = [&prompt](const char* sfx) {
            std::string s(sfx);
            return prompt.size() >= s.size() &&
                   prompt.compare(prompt.size() - s.size(), s.size(), s) == 0;
        };
        if (ends_with("side view")) azimuth = 90.0;
        else if (ends_with("back view")) azimuth = 180.0;
        return target_at(make_camera(azimuth, generate_elevation_deg_));
    }

    void set_generate_elevation(double deg) { generate_elevation_deg_ = deg; }

private:
    TargetFn target_fn_;
    NoiseSchedule schedule_;
    double bias_beta_ = 0.0;
    double generate_elevation_deg_ = 15.0;
};

inline std::unique_ptr<MockTargetOracle> make_mock_target_oracle(
    TargetFn target_fn, NoiseSchedule schedule, double bias_beta = 0.0) {
    return std::make_unique<MockTargetOracle>(std::move(target_fn),
                                              std::move(schedule), bias_beta);
}

// Predicts exactly the caller's noise draw, so every score term vanishes.
class ZeroSignalOracle : public GuidanceOracle {
public:
    bool supports_condition() const override { return true; }
    bool supports_text() const override { return true; }

    Image predict_noise(const NoiseRequest& req) override {
        if (!req.x_t) throw BackendError("ZeroSignalOracle: missing x_t");
        return sample_noise_like(*req.x_t, req.seed);
    }
    Image generate(const std::string&, int, uint64_t) override {
        return Image(8, 8, 3, 0.5);
    }
};

}  // namespace voxlift
