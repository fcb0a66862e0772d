// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "voxlift/guidance.hpp"

namespace voxlift {

namespace detail {

// 3x3 same-padding convolution over interleaved images, with the backward
// passes needed for weight training.
struct ConvLayer {
    int in_ch = 0, out_ch = 0;
    std::vector<double> w;  // [oc][ic][ky][kx]
    std::vector<double> b;  // [oc]

    void init(int in_channels, int out_channels, Rng& rng) {
        in_ch = in_channels;
        out_ch = out_channels;
        w.resize(static_cast<size_t>(out_ch) * in_ch * 9);
        b.assign(out_ch, 0.0);
        double scale = std::sqrt(2.0 / (in_ch * 9.0));
        for (double& v : w) v = rng.normal() * scale;
    }

    size_t widx(int oc, int ic, int ky, int kx) const {
        return ((static_cast<size_t>(oc) * in_ch + ic) * 3 + ky) * 3 + kx;
    }

    Image forward(const Image& in) const {
        Image out(in.width, in.height, out_ch);
        for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x)
                for (int oc = 0; oc < out_ch; ++oc) {
                    double acc = b[oc];
                    for (int ky = 0; ky < 3; ++ky) {
                        int yy = y + ky - 1;
                        if (yy < 0 || yy >= in.height) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            int xx = x + kx - 1;
                            if (xx < 0 || xx >= in.width) continue;
                            for (int ic = 0; ic < in_ch; ++ic)
                                acc += w[widx(oc, ic, ky, kx)] * in.at(xx, yy, ic);
                        }
                    }
                    out.at(x, y, oc) = acc;
                }
        return out;
    }

    // Accumulates weight/bias gradients and returns the input gradient.
    Image backward(const Image& in, const Image& dout, std::vector<double>& dw,
                   std::vector<double>& db) const {
        Image din(in.width, in.height, in_ch);
        for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x)
                for (int oc = 0; oc < out_ch; ++oc) {
                    double g = dout.at(x, y, oc);
                    if (g == 0.0) continue;
                    db[oc] += g;
                    for (int ky = 0; ky < 3; ++ky) {
                        int yy = y + ky - 1;
                        if (yy < 0 || yy >= in.height) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            int xx = x + kx - 1;
                            if (xx < 0 || xx >= in.width) continue;
                            for (int ic = 0; ic < in_ch; ++ic) {
                                dw[widx(oc, ic, ky, kx)] += g * in.at(xx, yy, ic);
                                din.at(xx, yy, ic) += g * w[widx(oc, ic, ky, kx)];
                            }
                        }
                    }
                }
        return din;
    }

    void sgd_step(const std::vector<double>& dw, const std::vector<double>& db,
                  double lr) {
        for (size_t i = 0; i < w.size(); ++i) w[i] -= lr * dw[i];
        for (size_t i = 0; i < b.size(); ++i) b[i] -= lr * db[i];
    }

    bool finite() const {
        for (double v : w)
            if (!std::isfinite(v)) return false;
        for (double v : b)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

}  // namespace detail

// Minimal surface the score terms need from the trainable estimator, so
// tests can substitute fixed-output stubs for the convolutional net.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual Image predict(const Image& x_t, int t, const Image* condition,
                          const std::string& prompt) = 0;
    virtual bool requires_condition() const = 0;
};

struct LearnedScoreConfig {
    int hidden_channels = 16;
    int num_steps = 1000;  // must match the schedule driving it
    bool requires_condition = true;
    uint64_t init_seed = 0x1ea51e5c0e5eedULL;
};

// Trainable convolutional noise estimator standing in for a conditioned
// low-rank adapter over a 2D backbone. Inputs per pixel: the noisy image, the
// condition image, a sinusoidal timestep embedding, and a prompt-id bias
// channel (prompts are interned to integers; full text conditioning belongs
// to real backend adapters).
class LearnedScore : public NoisePredictor {
public:
    explicit LearnedScore(LearnedScoreConfig cfg = {}) : cfg_(cfg) {
        Rng rng(cfg_.init_seed);
        conv1_.init(kImageCh + kCondCh + kTimeCh + kPromptCh, cfg_.hidden_channels, rng);
        conv2_.init(cfg_.hidden_channels, cfg_.hidden_channels, rng);
        conv3_.init(cfg_.hidden_channels, 3, rng);
    }

    bool requires_condition() const override { return cfg_.requires_condition; }

    Image predict(const Image& x_t, int t, const Image* condition,
                  const std::string& prompt) override {
        Image in = assemble_input(x_t, t, condition, prompt);
        Image h1 = relu(conv1_.forward(in));
        Image h2 = relu(conv2_.forward(h1));
        return conv3_.forward(h2);
    }

    // One SGD step on || predict(alpha_t x + sigma_t eps, t, cond, y) - eps ||^2
    // (mean over elements). Returns the pre-step loss.
    double train_step(const Image& x, int t, const Image* condition,
                      const std::string& prompt, const Image& eps,
                      const NoiseSchedule& schedule, double lr) {
        if (cfg_.num_steps != schedule.num_steps)
            throw InvalidConfigError("LearnedScore: schedule length mismatch");
        if (cfg_.requires_condition && condition == nullptr)
            throw InvalidConfigError("LearnedScore: condition required");
        Image x_t = add_noise(x, t, eps, schedule);
        Image in = assemble_input(x_t, t, condition, prompt);

        Image a1 = conv1_.forward(in);
        Image h1 = relu(a1);
        Image a2 = conv2_.forward(h1);
        Image h2 = relu(a2);
        Image pred = conv3_.forward(h2);

        require_same_shape(pred, eps, "learned_score_update");
        size_t n = pred.size();
        double loss = 0.0;
        Image dpred(pred.width, pred.height, pred.channels);
        for (size_t i = 0; i < n; ++i) {
            double r = pred.data[i] - eps.data[i];
            loss += r * r;
            dpred.data[i] = 2.0 * r / static_cast<double>(n);
        }
        loss /= static_cast<double>(n);
        if (!std::isfinite(loss))
            throw Error("learned_score_update: non-finite loss (t=" +
                        std::to_string(t) + ", lr=" + std::to_string(lr) + ")");

        std::vector<double> dw3(conv3_.w.size(), 0.0), db3(conv3_.b.size(), 0.0);
        std::vector<double> dw2(conv2_.w.size(), 0.0), db2(conv2_.b.size(), 0.0);
        std::vector<double> dw1(conv1_.w.size(), 0.0), db1(conv1_.b.size(), 0.0);
        Image dh2 = conv3_.backward(h2, dpred, dw3, db3);
        relu_backward(a2, dh2);
        Image dh1 = conv2_.backward(h1, dh2, dw2, db2);
        relu_backward(a1, dh1);
        conv1_.backward(in, dh1, dw1, db1);

        conv3_.sgd_step(dw3, db3, lr);
        conv2_.sgd_step(dw2, db2, lr);
        conv1_.sgd_step(dw1, db1, lr);
        if (!conv1_.finite() || !conv2_.finite() || !conv3_.finite())
            throw Error("learned_score_update: non-finite parameters after step");
        return loss;
    }

    size_t parameter_count() const {
        return conv1_.w.size() + conv1_.b.size() + conv2_.w.size() +
               conv2_.b.size() + conv3_.w.size() + conv3_.b.size();
    }

    // Flat snapshot of all parameters, in a fixed layer order.
    std::vector<double> parameters() const {
        std::vector<double> p;
        p.reserve(parameter_count());
        for (const auto* layer : {&conv1_, &conv2_, &conv3_}) {
            p.insert(p.end(), layer->w.begin(), layer->w.end());
            p.insert(p.end(), layer->b.begin(), layer->b.end());
        }
        return p;
    }

    void zero_parameters() {
        for (auto* layer : {&conv1_, &conv2_, &conv3_}) {
            layer->w.assign(layer->w.size(), 0.0);
            layer->b.assign(layer->b.size(), 0.0);
        }
    }

private:
    static constexpr int kImageCh = 3;
    static constexpr int kCondCh = 3;
    static constexpr int kTimeCh = 4;
    static constexpr int kPromptCh = 1;

    static Image relu(Image a) {
        for (double& v : a.data) v = std::max(v, 0.0);
        return a;
    }
    static void relu_backward(const Image& pre, Image& grad) {
        for (size_t i = 0; i < grad.size(); ++i)
            if (pre.data[i] <= 0.0) grad.data[i] = 0.0;
    }

    double prompt_bias(const std::string& prompt) {
        auto it = prompt_ids_.find(prompt);
        int id;
        if (it == prompt_ids_.end()) {
            id = static_cast<int>(prompt_ids_.size());
            prompt_ids_.emplace(prompt, id);
        } else {
            id = it->second;
        }
        return 0.1 * (1 + (id % 10));
    }

    Image assemble_input(const Image& x_t, int t, const Image* condition,
                         const std::string& prompt) {
        if (x_t.channels != 3)
            throw InvalidInputError("LearnedScore: x_t must have 3 channels");
        if (condition && condition->channels != 1 && condition->channels != 3)
            throw InvalidInputError("LearnedScore: condition must have 1 or 3 channels");
        if (condition && (condition->width != x_t.width || condition->height != x_t.height))
            throw InvalidInputError("LearnedScore: condition shape mismatch");
        double tau = static_cast<double>(t) / cfg_.num_steps;
        double temb[kTimeCh] = {std::sin(M_PI * tau), std::cos(M_PI * tau),
                                std::sin(4.0 * M_PI * tau), std::cos(4.0 * M_PI * tau)};
        double pbias = prompt_bias(prompt);

        Image in(x_t.width, x_t.height, kImageCh + kCondCh + kTimeCh + kPromptCh);
        for (int y = 0; y < x_t.height; ++y)
            for (int x = 0; x < x_t.width; ++x) {
                int c = 0;
                for (int i = 0; i < 3; ++i) in.at(x, y, c++) = x_t.at(x, y, i);
                for (int i = 0; i < 3; ++i) {
                    double v = 0.0;
                    if (condition)
                        v = condition->channels == 1 ? condition->at(x, y, 0)
                                                     : condition->at(x, y, i);
                    in.at(x, y, c++) = v;
                }
                for (int i = 0; i < kTimeCh; ++i) in.at(x, y, c++) = temb[i];
                in.at(x, y, c) = pbias;
            }
        return in;
    }

    LearnedScoreConfig cfg_;
    detail::ConvLayer conv1_, conv2_, conv3_;
    std::map<std::string, int> prompt_ids_;
};

// Spec-facing alias for one training step of the learned estimator.
inline double learned_score_update(LearnedScore& learned, const Image& x, int t,
                                   const Image* condition, const std::string& prompt,
                                   const Image& eps, const NoiseSchedule& schedule,
                                   double lr) {
    return learned.train_step(x, t, condition, prompt, eps, schedule, lr);
}

// Context for the two-backend score terms.
struct DualScoreContext {
    double cfg_scale_pretrained = 7.5;
    double cfg_scale_learned = 1.0;
    OmegaMode omega = OmegaMode::kSigmaSquared;
    const CameraPose* camera = nullptr;
    uint64_t seed = 0;
};

inline Image predict_learned_cfg(NoisePredictor& learned, const Image& x_t, int t,
                                 const Image* condition, const std::string& prompt,
                                 double scale) {
    Image cond = learned.predict(x_t, t, condition, prompt);
    if (scale == 1.0) return cond;
    Image uncond = learned.predict(x_t, t, condition, std::string());
    return apply_cfg(cond, uncond, scale);
}

// omega(t) * [ (eps_phi(x_t, t, edge, y) - eps) - lambda (eps_theta(x_t, t,
// normal, y) - eps) ]. Both predictions are constants w.r.t. the field. With
// lambda = 0 this is the conditioned SDS term; with lambda = 1 the eps
// contributions cancel and it matches the variational form.
inline Image weighted_score(GuidanceOracle& pretrained, NoisePredictor& learned,
                            const Image& x_t, const Image* edge_condition,
                            const Image* normal_condition, int t,
                            const std::string& prompt, const Image& eps,
                            double lambda, const NoiseSchedule& schedule,
                            const DualScoreContext& ctx = {}) {
    if (!pretrained.supports_condition())
        throw InvalidConfigError("weighted_score: pretrained oracle lacks condition support");
    if (lambda > 0.0 && learned.requires_condition() && normal_condition == nullptr)
        throw InvalidConfigError("weighted_score: learned estimator requires a condition");
    require_same_shape(x_t, eps, "weighted_score");

    ScoreContext pctx;
    pctx.cfg_scale = ctx.cfg_scale_pretrained;
    pctx.condition = edge_condition;
    pctx.camera = ctx.camera;
    pctx.seed = ctx.seed;
    Image pred_pre = predict_with_cfg(pretrained, x_t, t, prompt, pctx);
    require_same_shape(pred_pre, eps, "weighted_score: pretrained prediction");

    double w = omega_weight(schedule, t, ctx.omega);
    Image out = pred_pre;
    if (lambda == 0.0) {
        for (size_t i = 0; i < out.size(); ++i)
            out.data[i] = w * (pred_pre.data[i] - eps.data[i]);
        return out;
    }
    Image pred_learned = predict_learned_cfg(learned, x_t, t, normal_condition,
                                             prompt, ctx.cfg_scale_learned);
    require_same_shape(pred_learned, eps, "weighted_score: learned prediction");
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = w * ((pred_pre.data[i] - eps.data[i]) -
                           lambda * (pred_learned.data[i] - eps.data[i]));
    return out;
}

// Baseline variational term: omega(t) * (eps_phi(x_t, t, y) - eps_theta(x_t,
// t, cond, y)). The pretrained backend is queried without a condition image.
inline Image vsd_score(GuidanceOracle& pretrained, NoisePredictor& learned,
                       const Image& x_t, int t, const std::string& prompt,
                       const Image* learned_condition, const NoiseSchedule& schedule,
                       const DualScoreContext& ctx = {}) {
    ScoreContext pctx;
    pctx.cfg_scale = ctx.cfg_scale_pretrained;
    pctx.camera = ctx.camera;
    pctx.seed = ctx.seed;
    Image pred_pre = predict_with_cfg(pretrained, x_t, t, prompt, pctx);
    Image pred_learned = predict_learned_cfg(learned, x_t, t, learned_condition,
                                             prompt, ctx.cfg_scale_learned);
    require_same_shape(pred_pre, pred_learned, "vsd_score");
    double w = omega_weight(schedule, t, ctx.omega);
    Image out = pred_pre;
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = w * (pred_pre.data[i] - pred_learned.data[i]);
    return out;
}

}  // namespace voxlift
