// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "voxlift/viewpoint.hpp"

using namespace voxlift;

namespace {

// Generator whose output encodes the timestep in every pixel.
class TimestepImageGenerator : public GuidanceOracle {
public:
    int calls = 0;
    bool supports_condition() const override { return false; }
    bool supports_text() const override { return true; }
    Image predict_noise(const NoiseRequest&) override {
        throw BackendError("probe generator has no noise path");
    }
    Image generate(const std::string&, int t, uint64_t) override {
        ++calls;
        return Image(4, 4, 1, t / 100.0);
    }
};

class ConstantTestScorer : public SimilarityScorer {
public:
    explicit ConstantTestScorer(double v) : value_(v) {}
    double score(const std::string&, const Image&) override { return value_; }

private:
    double value_;
};

// Mean brightness for front-view prompts, zero otherwise.
class FrontOnlyScorer : public SimilarityScorer {
public:
    double score(const std::string& text, const Image& image) override {
        if (text.find("front view") == std::string::npos) return 0.0;
        return mean(image);
    }
};

}  // namespace

TEST(ViewRanges, PartitionIsTotalAndDisjoint) {
    auto ranges = default_view_ranges();
    for (double az = -180.0; az < 180.0; az += 0.25) {
        int hits = 0;
        ViewLabel hit = ViewLabel::kFront;
        for (const auto& r : ranges)
            if (r.contains(az)) {
                ++hits;
                hit = r.label;
            }
        ASSERT_EQ(hits, 1) << "azimuth " << az;
        EXPECT_EQ(classify_azimuth(az), hit);
    }
    // Half-open interval boundaries: [-60,60) front, [-120,-60) side,
    // [-180,-120) back.
    EXPECT_EQ(classify_azimuth(0.0), ViewLabel::kFront);
    EXPECT_EQ(classify_azimuth(-60.0), ViewLabel::kFront);
    EXPECT_EQ(classify_azimuth(60.0), ViewLabel::kSide);
    EXPECT_EQ(classify_azimuth(-120.0), ViewLabel::kSide);
    EXPECT_EQ(classify_azimuth(120.0), ViewLabel::kBack);
    EXPECT_EQ(classify_azimuth(-180.0), ViewLabel::kBack);
    EXPECT_EQ(classify_azimuth(180.0), ViewLabel::kBack);   // wraps to -180
    EXPECT_EQ(classify_azimuth(360.0), ViewLabel::kFront);  // wraps to 0
}

TEST(ViewPrompts, AppendsExactSuffixes) {
    auto prompts = make_view_prompts("a corgi");
    EXPECT_EQ(prompts[0], "a corgi, front view");
    EXPECT_EQ(prompts[1], "a corgi, side view");
    EXPECT_EQ(prompts[2], "a corgi, back view");
}

TEST(ViewPrompts, NoDeduplication) {
    auto prompts = make_view_prompts("statue, front view");
    EXPECT_EQ(prompts[0], "statue, front view, front view");
}

TEST(ViewPrompts, EmptyPromptRejected) {
    EXPECT_THROW(make_view_prompts(""), InvalidInputError);
}

TEST(ViewConfidence, ConstantScorerGivesConstantConfidence) {
    TimestepImageGenerator gen;
    ConstantTestScorer scorer(0.3);
    auto s = compute_view_confidence(gen, scorer, "a corgi",
                                     TimestepSet::default_set());
    EXPECT_DOUBLE_EQ(s[0], 0.3);
    EXPECT_DOUBLE_EQ(s[1], 0.3);
    EXPECT_DOUBLE_EQ(s[2], 0.3);
}

TEST(ViewConfidence, FrontBiasedScorerAveragesTimesteps) {
    // Front score at timestep t is t/100; mean over {10,...,100} is 0.55.
    TimestepImageGenerator gen;
    FrontOnlyScorer scorer;
    auto s = compute_view_confidence(gen, scorer, "a corgi",
                                     TimestepSet::default_set());
    EXPECT_NEAR(s[0], 0.55, 1e-12);
    EXPECT_DOUBLE_EQ(s[1], 0.0);
    EXPECT_DOUBLE_EQ(s[2], 0.0);
}

TEST(ViewConfidence, ThirtyGeneratorInvocations) {
    TimestepImageGenerator gen;
    ConstantTestScorer scorer(0.1);
    compute_view_confidence(gen, scorer, "a corgi", TimestepSet::default_set());
    EXPECT_EQ(gen.calls, 30);  // 3 views x 10 timesteps
}

TEST(ViewConfidence, BackendFailureCarriesViewAndTimestep) {
    class FailingGenerator : public TimestepImageGenerator {
    public:
        Image generate(const std::string&, int t, uint64_t) override {
            if (t == 40) throw std::runtime_error("backend down");
            return Image(4, 4, 1, 0.5);
        }
    } gen;
    ConstantTestScorer scorer(0.2);
    try {
        compute_view_confidence(gen, scorer, "a corgi", TimestepSet::default_set());
        FAIL() << "expected BackendError";
    } catch (const BackendError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("front"), std::string::npos);
        EXPECT_NE(msg.find("t=40"), std::string::npos);
    }
}

TEST(ViewDistribution, EqualConfidencesAreUniform) {
    ViewDistribution d = view_distribution({0.7, 0.7, 0.7});
    for (double p : d.probabilities) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
}

TEST(ViewDistribution, MatchesIndependentExpSum) {
    // Independent route: direct exp/sum without the max-subtraction trick.
    std::array<double, 3> s{2.0, 0.0, 1.0};
    double z = std::exp(2.0) + std::exp(0.0) + std::exp(1.0);
    ViewDistribution d = view_distribution(s);
    EXPECT_NEAR(d.probabilities[0], std::exp(2.0) / z, 1e-12);
    EXPECT_NEAR(d.probabilities[1], std::exp(0.0) / z, 1e-12);
    EXPECT_NEAR(d.probabilities[2], std::exp(1.0) / z, 1e-12);
    EXPECT_NEAR(d.probabilities[0], 0.6652, 1e-4);
    EXPECT_NEAR(d.probabilities[1], 0.0900, 1e-4);
    EXPECT_NEAR(d.probabilities[2], 0.2447, 1e-4);
}

TEST(ViewDistribution, SumsToOneAndPositive) {
    ViewDistribution d = view_distribution({-3.0, 12.0, 0.25});
    EXPECT_NEAR(d.probabilities[0] + d.probabilities[1] + d.probabilities[2], 1.0,
                1e-9);
    for (double p : d.probabilities) EXPECT_GT(p, 0.0);
}

TEST(ViewDistribution, CorgiProbabilitiesRecoverFromLogits) {
    // Published distribution; log-probabilities are valid logits for it.
    std::array<double, 3> published{0.6875, 0.0475, 0.2651};
    std::array<double, 3> logits{std::log(published[0]), std::log(published[1]),
                                 std::log(published[2])};
    ViewDistribution d = view_distribution(logits);
    for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(d.probabilities[i], published[i], 1e-4);  // 0.01% absolute
}

TEST(ViewDistribution, ShiftInvariance) {
    std::array<double, 3> s{0.31, -1.2, 2.05};
    ViewDistribution a = view_distribution(s);
    ViewDistribution b = view_distribution({s[0] + 100.0, s[1] + 100.0, s[2] + 100.0});
    for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(a.probabilities[i], b.probabilities[i], 1e-9);
}

TEST(ViewDistribution, NonFiniteInputRejected) {
    EXPECT_THROW(view_distribution({std::nan(""), 0.0, 0.0}), InvalidInputError);
    EXPECT_THROW(softmax({1.0, std::numeric_limits<double>::infinity()}),
                 InvalidInputError);
}

TEST(SampleCamera, DegenerateDistributionStaysInRange) {
    ViewDistribution d;
    d.probabilities = {1.0, 0.0, 0.0};
    auto ranges = default_view_ranges();
    PoseSamplerConfig cfg;
    Rng rng(12);
    for (int i = 0; i < 500; ++i) {
        CameraPose cam = sample_camera(d, ranges, cfg, rng);
        EXPECT_GE(cam.azimuth_deg, -60.0);
        EXPECT_LT(cam.azimuth_deg, 60.0);
        EXPECT_GE(cam.elevation_deg, cfg.elevation_min_deg);
        EXPECT_LE(cam.elevation_deg, cfg.elevation_max_deg);
        EXPECT_GE(cam.distance, cfg.distance_min);
        EXPECT_LE(cam.distance, cfg.distance_max);
    }
}

TEST(SampleCamera, CorgiFrequenciesMatchPublishedDistribution) {
    ViewDistribution d;
    d.probabilities = {0.6875, 0.0475, 0.2651};
    auto ranges = default_view_ranges();
    PoseSamplerConfig cfg;
    Rng rng(271828);
    const int n = 100000;
    std::array<int, 3> counts{0, 0, 0};
    for (int i = 0; i < n; ++i) {
        CameraPose cam = sample_camera(d, ranges, cfg, rng);
        counts[static_cast<int>(classify_azimuth(cam.azimuth_deg))]++;
    }
    for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(counts[i] / static_cast<double>(n), d.probabilities[i], 0.01);

    // Chi-square goodness of fit, df = 2, critical value at alpha = 0.01.
    double chi2 = 0.0;
    for (int i = 0; i < 3; ++i) {
        double expected = d.probabilities[i] * n;
        double diff = counts[i] - expected;
        chi2 += diff * diff / expected;
    }
    EXPECT_LT(chi2, 9.21034);
}

TEST(SampleCamera, SideSubIntervalsHitEqually) {
    ViewDistribution d;
    d.probabilities = {0.0, 1.0, 0.0};
    auto ranges = default_view_ranges();
    PoseSamplerConfig cfg;
    Rng rng(55);
    const int n = 20000;
    int left = 0, right = 0;
    for (int i = 0; i < n; ++i) {
        CameraPose cam = sample_camera(d, ranges, cfg, rng);
        if (cam.azimuth_deg < 0)
            ++left;
        else
            ++right;
    }
    EXPECT_NEAR(left / static_cast<double>(n), 0.5, 0.02);
    EXPECT_NEAR(right / static_cast<double>(n), 0.5, 0.02);
}

TEST(SampleCamera, SeededDeterminism) {
    ViewDistribution d = view_distribution({1.0, 0.4, 0.2});
    auto ranges = default_view_ranges();
    PoseSamplerConfig cfg;
    Rng a(42), b(42);
    for (int i = 0; i < 200; ++i) {
        CameraPose ca = sample_camera(d, ranges, cfg, a);
        CameraPose cb = sample_camera(d, ranges, cfg, b);
        EXPECT_EQ(ca.azimuth_deg, cb.azimuth_deg);
        EXPECT_EQ(ca.elevation_deg, cb.elevation_deg);
        EXPECT_EQ(ca.distance, cb.distance);
    }
}

TEST(TimestepSet, Validation) {
    TimestepSet t = TimestepSet::default_set();
    EXPECT_NO_THROW(t.validate(1000));
    EXPECT_THROW(t.validate(50), InvalidConfigError);  // 100 exceeds range
    TimestepSet empty;
    EXPECT_THROW(empty.validate(1000), InvalidConfigError);
    TimestepSet unordered;
    unordered.steps = {10, 10, 20};
    EXPECT_THROW(unordered.validate(1000), InvalidConfigError);
}
