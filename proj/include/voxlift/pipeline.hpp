// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "voxlift/condition.hpp"
#include "voxlift/config.hpp"
#include "voxlift/guidance.hpp"
#include "voxlift/learned_score.hpp"
#include "voxlift/mock_targets.hpp"
#include "voxlift/oracle_socket.hpp"
#include "voxlift/png_io.hpp"
#include "voxlift/render.hpp"
#include "voxlift/report.hpp"
#include "voxlift/termination.hpp"
#include "voxlift/viewpoint.hpp"

namespace voxlift {

// Initial pre-activation density of a fresh optimization field: a faint haze
// rather than hard emptiness, so early gradients have something to move.
inline constexpr double kHazeDensityParam = -3.0;

// Stage-1 blob init: a dense fuzzy ball around the look-at center, the usual
// starting scene for distillation runs. Starting from a formed-but-soft blob
// also puts the boundary-integrity metric on its expected trajectory: large
// while the boundary is fuzzy, shrinking as the surface sharpens.
inline void init_blob_density(RadianceField& field, double peak = 2.5,
                              double falloff = 3.5) {
    Vec3 center = 0.5 * (field.bounds.lo + field.bounds.hi);
    Vec3 ext = field.bounds.extent();
    double half = (ext.x + ext.y + ext.z) / 6.0;
    for (int k = 0; k < field.nz; ++k)
        for (int j = 0; j < field.ny; ++j)
            for (int i = 0; i < field.nx; ++i) {
                Vec3 p{field.bounds.lo.x + ext.x * i / (field.nx - 1),
                       field.bounds.lo.y + ext.y * j / (field.ny - 1),
                       field.bounds.lo.z + ext.z * k / (field.nz - 1)};
                double r = norm(p - center) / half;
                field.density[field.node_index(i, j, k)] =
                    std::max(peak - falloff * r, kEmptyDensityParam);
            }
}

// Named RNG stream tags. Every random draw in a run is keyed off
// (master seed, stream, iteration), which is what makes runs replayable and
// lets tests reproduce a stage's trajectory step by step.
namespace streams {
inline constexpr uint64_t kStage1Camera = 11;
inline constexpr uint64_t kStage1Timestep = 12;
inline constexpr uint64_t kStage1Noise = 13;
inline constexpr uint64_t kStage1Jitter = 14;
inline constexpr uint64_t kStage1Checkpoint = 15;
inline constexpr uint64_t kStage2Camera = 21;
inline constexpr uint64_t kStage2Timestep = 22;
inline constexpr uint64_t kStage2Noise = 23;
inline constexpr uint64_t kStage2Jitter = 24;
inline constexpr uint64_t kStage2LoraTimestep = 25;
inline constexpr uint64_t kStage2LoraNoise = 26;
inline constexpr uint64_t kLearnedInit = 27;
}  // namespace streams

// ---------------------------------------------------------------------------
// Config -> component adapters

inline RenderOptions render_options_from(const RunConfig& cfg) {
    RenderOptions opts;
    opts.width = cfg.field.render_width;
    opts.height = cfg.field.render_height;
    opts.samples_per_ray = cfg.field.samples_per_ray;
    opts.tau_valid = cfg.field.tau_valid;
    opts.normal_eps = cfg.field.normal_eps;
    opts.sigma_aggregate = SigmaAggregate::kOpacity;
    if (cfg.termination.sigma_aggregate == "max")
        opts.sigma_aggregate = SigmaAggregate::kMax;
    else if (cfg.termination.sigma_aggregate == "weighted")
        opts.sigma_aggregate = SigmaAggregate::kWeightedSum;
    return opts;
}

inline PoseSamplerConfig pose_sampler_from(const RunConfig& cfg) {
    PoseSamplerConfig p;
    p.elevation_min_deg = cfg.viewpoint.elevation_min;
    p.elevation_max_deg = cfg.viewpoint.elevation_max;
    p.distance_min = cfg.viewpoint.distance_min;
    p.distance_max = cfg.viewpoint.distance_max;
    p.fov_deg = cfg.viewpoint.fov;
    return p;
}

inline TerminationPolicy policy_from(const RunConfig& cfg) {
    TerminationPolicy p;
    p.threshold = cfg.termination.threshold;
    p.consecutive_window = cfg.termination.window;
    p.checkpoint_interval = cfg.termination.checkpoint_interval;
    p.max_iters = cfg.termination.max_iters;
    return p;
}

inline EdgeOptions edge_options_from(const RunConfig& cfg) {
    EdgeOptions e;
    e.binarize_threshold = cfg.condition.binarize_threshold;
    e.sobel_threshold = cfg.condition.sobel_threshold;
    e.dilation = cfg.condition.dilation;
    return e;
}

// The termination boundary band: the paper's learned edge detector produces
// thick edges, so the stand-in dilates its Sobel band independently of the
// thin stage-2 edge conditions.
inline EdgeDetectorFn detector_from(const RunConfig& cfg) {
    if (cfg.termination.detector == "sobel") {
        EdgeOptions opts = edge_options_from(cfg);
        opts.dilation = cfg.termination.boundary_dilation;
        return [opts](const Image& binary) { return sobel_edge_mask(binary, opts); };
    }
    return default_boundary_detector();
}

inline NoiseSchedule schedule_from(const RunConfig& cfg) {
    return NoiseSchedule::linear(cfg.guidance.num_steps, cfg.guidance.beta_start,
                                 cfg.guidance.beta_end);
}

inline OmegaMode omega_from(const RunConfig& cfg) {
    return cfg.guidance.omega == "one" ? OmegaMode::kOne : OmegaMode::kSigmaSquared;
}

inline LambdaSchedule lambda_schedule_from(const RunConfig& cfg) {
    return {cfg.guidance.lambda_start, cfg.guidance.lambda_end,
            cfg.guidance.lambda_ramp_iters};
}

// Backend selection. Mock oracles synthesize analytic targets at the run's
// render size; "remote:<path>" attaches to an out-of-process backend over a
// local socket.
inline std::unique_ptr<GuidanceOracle> build_oracle(const RunConfig& cfg) {
    const std::string& kind = cfg.guidance.oracle;
    NoiseSchedule schedule = schedule_from(cfg);
    int w = cfg.field.render_width, h = cfg.field.render_height;
    if (kind == "mock-sphere") {
        return make_mock_target_oracle(
            sphere_target_fn(w, h, {0, 0, 0}, cfg.guidance.target_radius,
                             cfg.guidance.target_color, cfg.field.background),
            schedule, cfg.guidance.oracle_bias);
    }
    if (kind == "mock-ellipsoid") {
        return make_mock_target_oracle(
            ellipsoid_target_fn(w, h, {0, 0, 0}, cfg.guidance.target_axes,
                                cfg.guidance.target_color, cfg.field.background),
            schedule, cfg.guidance.oracle_bias);
    }
    if (kind == "zero") return std::make_unique<ZeroSignalOracle>();
    if (kind.rfind("remote:", 0) == 0)
        return std::make_unique<RemoteOracleClient>(kind.substr(7));
    throw InvalidConfigError("unknown oracle '" + kind + "'");
}

class BrightnessScorer : public SimilarityScorer {
public:
    explicit BrightnessScorer(bool invert = false) : invert_(invert) {}
    double score(const std::string&, const Image& image) override {
        double m = mean(image);
        return invert_ ? 1.0 - m : m;
    }

private:
    bool invert_;
};

class ConstantScorer : public SimilarityScorer {
public:
    explicit ConstantScorer(double v) : value_(v) {}
    double score(const std::string&, const Image&) override { return value_; }

private:
    double value_;
};

inline std::unique_ptr<SimilarityScorer> build_scorer(const RunConfig& cfg) {
    const std::string& kind = cfg.viewpoint.scorer;
    if (kind == "brightness") return std::make_unique<BrightnessScorer>(false);
    if (kind == "darkness") return std::make_unique<BrightnessScorer>(true);
    if (kind.rfind("constant:", 0) == 0)
        return std::make_unique<ConstantScorer>(std::stod(kind.substr(9)));
    throw InvalidConfigError("unknown scorer '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Preprocess: viewpoint confidence analysis

struct PreprocessResult {
    std::array<double, 3> confidences{};
    ViewDistribution dist;
    std::vector<ViewProbeSample> samples;
};

inline PreprocessResult preprocess_views(const RunConfig& cfg, GuidanceOracle& oracle,
                                         SimilarityScorer& scorer) {
    TimestepSet probe;
    probe.steps = cfg.viewpoint.probe_timesteps;
    probe.validate(cfg.guidance.num_steps);
    PreprocessResult out;
    out.confidences = compute_view_confidence(oracle, scorer, cfg.pipeline.prompt,
                                              probe, cfg.pipeline.seed, &out.samples);
    out.dist = view_distribution(out.confidences);
    return out;
}

// ---------------------------------------------------------------------------
// Boundary-integrity checkpointing

// Delta_r averaged over `probe_poses` poses drawn from the view distribution.
// Poses that show no object are skipped; nullopt when none do.
inline std::optional<double> evaluate_delta_checkpoint(
    const RadianceField& field, const ViewDistribution& dist, const RunConfig& cfg,
    Rng& pose_rng) {
    RenderOptions opts = render_options_from(cfg);  // deterministic midpoints
    EdgeDetectorFn detector = detector_from(cfg);
    auto ranges = default_view_ranges();
    PoseSamplerConfig sampler = pose_sampler_from(cfg);
    double acc = 0.0;
    int count = 0;
    for (int k = 0; k < cfg.termination.probe_poses; ++k) {
        CameraPose cam = sample_camera(dist, ranges, sampler, pose_rng);
        RenderOutput ro = render(field, cam, opts);
        RayClassification rc =
            classify_rays(ro.opacity, ro.ray_density, detector, cfg.field.tau_valid);
        std::optional<double> delta =
            boundary_integrity(rc, cfg.termination.boundary_in_valid);
        if (delta) {
            acc += *delta;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return acc / count;
}

// ---------------------------------------------------------------------------
// Stage 1: self-prior generation

struct Stage1Result {
    RadianceField prior;
    std::array<double, 3> confidences{};
    ViewDistribution dist;
    std::vector<ViewProbeSample> probe_samples;
    std::vector<DeltaCheckpoint> history;
    StopReason reason = StopReason::kNone;
    int iterations = 0;
    std::vector<double> loss_trace;
    bool no_object = false;
    std::string diagnostics;
};

// One SDS step against `oracle` from pose `cam` at timestep `t`, with noise
// and jitter derived from the given seeds. Shared by the stage-1 loop and by
// tests that replay it.
inline double sds_field_step(RadianceField& field, GuidanceOracle& oracle,
                             const CameraPose& cam, int t, const std::string& prompt,
                             const NoiseSchedule& schedule, const RunConfig& cfg,
                             uint64_t eps_seed, uint64_t jitter_seed, double lr) {
    RenderOptions opts = render_options_from(cfg);
    opts.stratified = cfg.field.stratified;
    opts.jitter_seed = jitter_seed;
    RenderOutput ro = render(field, cam, opts);
    Image eps = sample_noise_like(ro.rgb, eps_seed);
    ScoreContext ctx;
    ctx.cfg_scale = cfg.guidance.cfg_scale_pretrained;
    ctx.omega = omega_from(cfg);
    ctx.camera = &cam;
    ctx.seed = eps_seed;
    Image g = sds_score(oracle, ro.rgb, t, prompt, eps, schedule, ctx);
    FieldGradients grads(field);
    render_backward(field, cam, opts, g, grads);
    apply_gradient_step(field, grads, lr);
    return mean_abs(g);
}

// Optimizes a fresh field under SDS with adaptive viewpoint sampling until
// the boundary-integrity policy (or the budget) stops it. A budget stop with
// no object formed is reported via `no_object`, not thrown, so callers can
// inspect the field and mark the run failed.
inline Stage1Result stage1_self_prior(const RunConfig& cfg, GuidanceOracle& oracle,
                                      SimilarityScorer& scorer) {
    validate_run_config(cfg);
    Stage1Result result;
    PreprocessResult pre = preprocess_views(cfg, oracle, scorer);
    result.confidences = pre.confidences;
    result.dist = pre.dist;
    result.probe_samples = std::move(pre.samples);

    NoiseSchedule schedule = schedule_from(cfg);
    TerminationPolicy policy = policy_from(cfg);
    validate_policy(policy);

    result.prior = make_field(cfg.field.grid_resolution,
                              Aabb{cfg.field.bounds_min, cfg.field.bounds_max},
                              cfg.field.background);
    if (cfg.field.stage1_init == "blob")
        init_blob_density(result.prior);
    else
        result.prior.density.assign(result.prior.density.size(), kHazeDensityParam);

    uint64_t seed = cfg.pipeline.seed;
    Rng cam_rng(derive_seed(seed, streams::kStage1Camera));
    Rng t_rng(derive_seed(seed, streams::kStage1Timestep));
    uint64_t noise_base = derive_seed(seed, streams::kStage1Noise);
    uint64_t jitter_base = derive_seed(seed, streams::kStage1Jitter);
    uint64_t checkpoint_base = derive_seed(seed, streams::kStage1Checkpoint);

    auto ranges = default_view_ranges();
    PoseSamplerConfig sampler = pose_sampler_from(cfg);

    int checkpoint_index = 0;
    for (int iter = 1; iter <= policy.max_iters; ++iter) {
        CameraPose cam = sample_camera(result.dist, ranges, sampler, cam_rng);
        int t = sample_distill_timestep(schedule, t_rng, cfg.guidance.t_min_frac,
                                        cfg.guidance.t_max_frac);
        double trace = sds_field_step(result.prior, oracle, cam, t,
                                      cfg.pipeline.prompt, schedule, cfg,
                                      derive_seed(noise_base, iter),
                                      derive_seed(jitter_base, iter),
                                      cfg.pipeline.stage1_lr);
        result.loss_trace.push_back(trace);
        result.iterations = iter;

        if (iter % policy.checkpoint_interval == 0) {
            Rng pose_rng(derive_seed(checkpoint_base, ++checkpoint_index));
            std::optional<double> delta =
                evaluate_delta_checkpoint(result.prior, result.dist, cfg, pose_rng);
            result.history.push_back({iter, delta});
            TerminationDecision dec = should_terminate(result.history, policy);
            if (dec.stop) {
                result.reason = dec.reason;
                break;
            }
        }
    }
    if (result.reason == StopReason::kNone) result.reason = StopReason::kBudget;
    if (result.reason == StopReason::kBudget) {
        bool formed = !result.history.empty() && result.history.back().delta.has_value();
        if (!formed) {
            result.no_object = true;
            result.diagnostics =
                "stage 1 exhausted its budget of " + std::to_string(policy.max_iters) +
                " iterations without forming an object (" +
                std::to_string(result.history.size()) + " checkpoints, all empty)";
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Stage 2: control-based distillation

struct Stage2Result {
    RadianceField field;
    std::vector<double> score_trace;
    std::vector<double> lora_loss_trace;
    int iterations = 0;
    bool aborted = false;
    std::string error;
};

// Alternates one weighted-score field update with one learned-score training
// step (strictly 1:1). The prior is read-only throughout. On a backend
// failure the partially optimized field is returned with `aborted` set so the
// caller can checkpoint it.
inline Stage2Result stage2_control_distill(const RunConfig& cfg,
                                           const RadianceField& prior,
                                           GuidanceOracle& pretrained,
                                           LearnedScore& learned,
                                           const ViewDistribution& dist) {
    validate_run_config(cfg);
    Stage2Result result;
    NoiseSchedule schedule = schedule_from(cfg);
    LambdaSchedule lambda_schedule = lambda_schedule_from(cfg);

    result.field = make_field(cfg.field.grid_resolution,
                              Aabb{cfg.field.bounds_min, cfg.field.bounds_max},
                              cfg.field.background);
    result.field.density.assign(result.field.density.size(), kHazeDensityParam);

    // Uniform azimuth sampling is the adaptive sampler with equal range
    // probabilities (the three ranges have equal width).
    ViewDistribution sampling_dist = dist;
    if (cfg.pipeline.stage2_sampling == "uniform")
        sampling_dist.probabilities = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

    uint64_t seed = cfg.pipeline.seed;
    Rng cam_rng(derive_seed(seed, streams::kStage2Camera));
    Rng t_rng(derive_seed(seed, streams::kStage2Timestep));
    Rng lora_t_rng(derive_seed(seed, streams::kStage2LoraTimestep));
    uint64_t noise_base = derive_seed(seed, streams::kStage2Noise);
    uint64_t jitter_base = derive_seed(seed, streams::kStage2Jitter);
    uint64_t lora_noise_base = derive_seed(seed, streams::kStage2LoraNoise);

    auto ranges = default_view_ranges();
    PoseSamplerConfig sampler = pose_sampler_from(cfg);
    EdgeOptions edge_opts = edge_options_from(cfg);

    for (int iter = 0; iter < cfg.pipeline.stage2_iters; ++iter) {
        try {
            CameraPose cam = sample_camera(sampling_dist, ranges, sampler, cam_rng);
            int t = sample_distill_timestep(schedule, t_rng, cfg.guidance.t_min_frac,
                                            cfg.guidance.t_max_frac);
            RenderOptions opts = render_options_from(cfg);
            opts.stratified = cfg.field.stratified;
            opts.jitter_seed = derive_seed(jitter_base, iter);
            PairedConditions pc =
                paired_conditions(result.field, prior, cam, opts, edge_opts);

            uint64_t eps_seed = derive_seed(noise_base, iter);
            Image eps = sample_noise_like(pc.rgb, eps_seed);
            Image x_t = add_noise(pc.rgb, t, eps, schedule);
            double lambda = lambda_at(lambda_schedule, iter);

            DualScoreContext ctx;
            ctx.cfg_scale_pretrained = cfg.guidance.cfg_scale_pretrained;
            ctx.cfg_scale_learned = cfg.guidance.cfg_scale_learned;
            ctx.omega = omega_from(cfg);
            ctx.camera = &cam;
            ctx.seed = eps_seed;
            Image g = weighted_score(pretrained, learned, x_t, &pc.edge.data,
                                     &pc.normal.data, t, cfg.pipeline.prompt, eps,
                                     lambda, schedule, ctx);
            FieldGradients grads(result.field);
            opts.compute_normals = true;  // matches the paired_conditions render
            render_backward(result.field, cam, opts, g, grads);
            apply_gradient_step(result.field, grads, cfg.pipeline.stage2_lr);
            result.score_trace.push_back(mean_abs(g));

            // The paired learned-score update on the current render as data.
            int t2 = sample_distill_timestep(schedule, lora_t_rng,
                                             cfg.guidance.t_min_frac,
                                             cfg.guidance.t_max_frac);
            Image eps2 = sample_noise_like(pc.rgb, derive_seed(lora_noise_base, iter));
            double loss = learned_score_update(learned, pc.rgb, t2, &pc.normal.data,
                                               cfg.pipeline.prompt, eps2, schedule,
                                               cfg.guidance.learned_lr);
            result.lora_loss_trace.push_back(loss);
            result.iterations = iter + 1;
        } catch (const std::exception& e) {
            result.aborted = true;
            result.error = e.what();
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Whole-run orchestration

inline RadianceField load_external_prior(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw FormatError("load_external_prior: cannot open " + path);
    std::string magic;
    std::getline(probe, magic);
    probe.close();
    if (magic == "VOXFIELD 1") return load_field(path);
    if (magic == "VOXOCC 1") {
        std::ifstream in(path, std::ios::binary);
        return load_occupancy_as_field(in);
    }
    throw FormatError("load_external_prior: unrecognized format in " + path);
}

inline std::vector<double> turntable_azimuths(int count) {
    std::vector<double> az(count);
    for (int i = 0; i < count; ++i)
        az[i] = normalize_azimuth(i * 360.0 / count);
    return az;
}

// Full run: preprocess -> stage 1 (or external prior) -> stage 2 ->
// turntable -> persist. Failures yield a partial report marked failed; the
// report and whatever artifacts exist are still written.
inline RunReport run_pipeline(const RunConfig& cfg,
                              GuidanceOracle* injected_oracle = nullptr,
                              SimilarityScorer* injected_scorer = nullptr) {
    validate_run_config(cfg);
    namespace fs = std::filesystem;
    auto t_start = std::chrono::steady_clock::now();
    auto seconds_since = [](std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    fs::path dir(cfg.pipeline.output_dir);
    fs::create_directories(dir / "checkpoints");
    fs::create_directories(dir / "renders");

    RunReport report;
    report.prompt = cfg.pipeline.prompt;
    report.seed = cfg.pipeline.seed;
    report.config_echo = echo_config(cfg);
    report.render_width = cfg.field.render_width;
    report.render_height = cfg.field.render_height;
    report.samples_per_ray = cfg.field.samples_per_ray;
    {
        std::ofstream echo(dir / "config.echo");
        echo << report.config_echo;
    }

    std::unique_ptr<GuidanceOracle> owned_oracle;
    std::unique_ptr<SimilarityScorer> owned_scorer;
    GuidanceOracle* oracle = injected_oracle;
    SimilarityScorer* scorer = injected_scorer;
    auto finalize = [&](bool failed, const std::string& why) {
        if (failed) {
            report.status = "failed";
            report.failure = why;
        }
        report.wall_clock_seconds = seconds_since(t_start);
        save_report(report, (dir / "report.json").string());
    };

    try {
        if (!oracle) {
            owned_oracle = build_oracle(cfg);
            oracle = owned_oracle.get();
        }
        if (!scorer) {
            owned_scorer = build_scorer(cfg);
            scorer = owned_scorer.get();
        }

        RadianceField prior;
        auto t_stage1 = std::chrono::steady_clock::now();
        if (!cfg.pipeline.external_prior.empty()) {
            PreprocessResult pre = preprocess_views(cfg, *oracle, *scorer);
            report.view_confidence = pre.confidences;
            report.p_star = pre.dist.probabilities;
            report.probe_samples = std::move(pre.samples);
            prior = load_external_prior(cfg.pipeline.external_prior);
            report.stage1_ran = false;
            report.stage1_reason = "skipped";
        } else {
            Stage1Result s1 = stage1_self_prior(cfg, *oracle, *scorer);
            report.view_confidence = s1.confidences;
            report.p_star = s1.dist.probabilities;
            report.probe_samples = std::move(s1.probe_samples);
            report.stage1_ran = true;
            report.stage1_reason = stop_reason_name(s1.reason);
            report.stage1_iterations = s1.iterations;
            report.delta_history = s1.history;
            report.stage1_loss_trace = std::move(s1.loss_trace);
            prior = std::move(s1.prior);
            report.stage1_seconds = seconds_since(t_stage1);
            {
                std::ofstream csv(dir / "deltas.csv");
                csv << deltas_to_csv(report.delta_history, policy_from(cfg));
                report.deltas_csv_path = "deltas.csv";
            }
            if (s1.no_object) {
                save_field(prior, (dir / "checkpoints" / "prior.ckpt").string());
                report.prior_checkpoint_path = "checkpoints/prior.ckpt";
                finalize(true, s1.diagnostics);
                return report;
            }
        }
        save_field(prior, (dir / "checkpoints" / "prior.ckpt").string());
        report.prior_checkpoint_path = "checkpoints/prior.ckpt";

        ViewDistribution dist = view_distribution(report.view_confidence);

        auto t_stage2 = std::chrono::steady_clock::now();
        LearnedScoreConfig lcfg;
        lcfg.hidden_channels = cfg.guidance.learned_hidden;
        lcfg.num_steps = cfg.guidance.num_steps;
        lcfg.init_seed = derive_seed(cfg.pipeline.seed, streams::kLearnedInit);
        LearnedScore learned(lcfg);
        Stage2Result s2 = stage2_control_distill(cfg, prior, *oracle, learned, dist);
        report.stage2_ran = true;
        report.stage2_iterations = s2.iterations;
        report.stage2_score_trace = std::move(s2.score_trace);
        report.stage2_lora_loss_trace = std::move(s2.lora_loss_trace);
        report.stage2_seconds = seconds_since(t_stage2);

        save_field(s2.field, (dir / "checkpoints" / "final.ckpt").string());
        report.final_checkpoint_path = "checkpoints/final.ckpt";
        if (s2.aborted) {
            finalize(true, "stage 2 aborted: " + s2.error);
            return report;
        }

        // Turntable of the final field.
        report.turntable_azimuths = turntable_azimuths(cfg.pipeline.turntable_count);
        report.turntable_elevation = cfg.pipeline.turntable_elevation;
        report.turntable_distance =
            0.5 * (cfg.viewpoint.distance_min + cfg.viewpoint.distance_max);
        report.turntable_fov = cfg.viewpoint.fov;
        RenderOptions opts = render_options_from(cfg);
        for (size_t i = 0; i < report.turntable_azimuths.size(); ++i) {
            CameraPose cam = make_camera(report.turntable_azimuths[i],
                                         report.turntable_elevation,
                                         report.turntable_distance,
                                         report.turntable_fov);
            RenderOutput ro = render(s2.field, cam, opts);
            char name[32];
            std::snprintf(name, sizeof(name), "turntable_%03zu.png", i);
            write_png(ro.rgb, (dir / "renders" / name).string());
            report.turntable_paths.push_back(std::string("renders/") + name);
        }

        if (cfg.pipeline.dump_conditions) {
            fs::create_directories(dir / "conditions");
            for (size_t i = 0; i < report.turntable_azimuths.size(); ++i) {
                CameraPose cam = make_camera(report.turntable_azimuths[i],
                                             report.turntable_elevation,
                                             report.turntable_distance,
                                             report.turntable_fov);
                Image mask = render_density_mask(prior, cam, opts);
                ConditionImage edge = edge_condition(mask, cam, edge_options_from(cfg));
                char name[32];
                std::snprintf(name, sizeof(name), "edge_%03zu.png", i);
                write_png(edge.data, (dir / "conditions" / name).string());
            }
        }

        finalize(false, "");
    } catch (const std::exception& e) {
        finalize(true, e.what());
    }
    return report;
}

}  // namespace voxlift
