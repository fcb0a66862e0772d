// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "voxlift/eval.hpp"

using namespace voxlift;

namespace {

// Deterministic preference model: softmax over per-image mean brightness.
class BrightnessPreference : public PreferenceScorer {
public:
    std::vector<double> preferences(const std::string&,
                                    const std::vector<const Image*>& images) override {
        std::vector<double> p(images.size());
        double z = 0.0;
        for (size_t i = 0; i < images.size(); ++i) {
            p[i] = std::exp(mean(*images[i]));
            z += p[i];
        }
        for (double& v : p) v /= z;
        return p;
    }
};

class FixedTablePreference : public PreferenceScorer {
public:
    // table[prompt_index][view_index] = preference vector
    std::vector<std::vector<std::vector<double>>> table;
    std::vector<std::string> prompts;
    std::map<std::pair<std::string, const Image*>, int> seen;

    std::vector<double> preferences(const std::string& prompt,
                                    const std::vector<const Image*>& images) override {
        size_t p = std::find(prompts.begin(), prompts.end(), prompt) - prompts.begin();
        size_t v = counters_[p]++;
        (void)images;
        return table[p][v];
    }

private:
    std::map<size_t, size_t> counters_;
};

EvaluationBatch toy_batch(int methods, int prompts, int views, uint64_t seed = 1) {
    EvaluationBatch b;
    Rng rng(seed);
    for (int m = 0; m < methods; ++m) b.methods.push_back("method" + std::to_string(m));
    for (int p = 0; p < prompts; ++p) b.prompts.push_back("prompt" + std::to_string(p));
    b.renders.resize(methods);
    for (int m = 0; m < methods; ++m) {
        b.renders[m].resize(prompts);
        for (int p = 0; p < prompts; ++p)
            for (int v = 0; v < views; ++v)
                b.renders[m][p].push_back(Image(4, 4, 3, rng.uniform(0.0, 1.0)));
    }
    return b;
}

}  // namespace

TEST(JanusRate, PublishedTableArithmetic) {
    std::vector<JanusAnnotation> a(30);
    for (int i = 0; i < 3; ++i) a[i] = {true, JanusCategory::kMultiPart};
    EXPECT_EQ(format_percent2(janus_rate(a)), "10.00");

    std::vector<JanusAnnotation> b(30);
    for (int i = 0; i < 17; ++i) b[i] = {true, JanusCategory::kPaperThin};
    EXPECT_EQ(format_percent2(janus_rate(b)), "56.67");
}

TEST(JanusRate, ZeroFlagsIsZero) {
    std::vector<JanusAnnotation> a(12);
    EXPECT_EQ(format_percent2(janus_rate(a)), "0.00");
}

TEST(JanusRate, EmptySetRejected) {
    EXPECT_THROW(janus_rate({}), InvalidInputError);
}

TEST(JanusRate, PureFunctionAndPermutationInvariant) {
    std::vector<JanusAnnotation> a(10);
    a[2] = {true, JanusCategory::kContentDrift};
    a[7] = {true, JanusCategory::kMultiPart};
    double reference = janus_rate(a);
    std::mt19937 g(4);
    for (int i = 0; i < 5; ++i) {
        std::shuffle(a.begin(), a.end(), g);
        EXPECT_DOUBLE_EQ(janus_rate(a), reference);
    }
    EXPECT_DOUBLE_EQ(reference, 20.0);
}

TEST(JanusCategories, ParseRoundTrip) {
    for (JanusCategory c : {JanusCategory::kNone, JanusCategory::kMultiPart,
                            JanusCategory::kContentDrift, JanusCategory::kPaperThin})
        EXPECT_EQ(parse_janus_category(janus_category_name(c)), c);
    EXPECT_THROW(parse_janus_category("weird"), InvalidInputError);
}

TEST(PickScore, SinglePromptSingleViewPassesThrough) {
    EvaluationBatch b = toy_batch(2, 1, 1);
    FixedTablePreference scorer;
    scorer.prompts = b.prompts;
    scorer.table = {{{0.42, 0.58}}};
    auto scores = pick_score(scorer, b);
    ASSERT_EQ(scores.size(), 2u);
    EXPECT_NEAR(scores[0], 0.42, 1e-12);
    EXPECT_NEAR(scores[1], 0.58, 1e-12);
}

TEST(PickScore, UniformScorerGivesOneOverK) {
    for (int k : {2, 3, 5}) {
        EvaluationBatch b = toy_batch(k, 3, 4);
        class Uniform : public PreferenceScorer {
        public:
            std::vector<double> preferences(
                const std::string&, const std::vector<const Image*>& images) override {
                return std::vector<double>(images.size(), 1.0 / images.size());
            }
        } scorer;
        auto scores = pick_score(scorer, b);
        for (double s : scores) EXPECT_NEAR(s, 1.0 / k, 1e-12);
    }
}

TEST(PickScore, MatchesBruteForceNestedMean) {
    // 2 prompts x 3 views toy table, hand-aggregated with a double loop.
    EvaluationBatch b = toy_batch(2, 2, 3);
    FixedTablePreference scorer;
    scorer.prompts = b.prompts;
    scorer.table = {
        {{0.9, 0.1}, {0.6, 0.4}, {0.3, 0.7}},
        {{0.2, 0.8}, {0.5, 0.5}, {0.8, 0.2}},
    };
    auto scores = pick_score(scorer, b);

    // Brute force: ps(y) per method, then mean over prompts.
    double m0 = 0.0, m1 = 0.0;
    for (int p = 0; p < 2; ++p) {
        double ps0 = 0.0, ps1 = 0.0;
        for (int v = 0; v < 3; ++v) {
            ps0 += scorer.table[p][v][0];
            ps1 += scorer.table[p][v][1];
        }
        m0 += ps0 / 3.0;
        m1 += ps1 / 3.0;
    }
    m0 /= 2.0;
    m1 /= 2.0;
    EXPECT_NEAR(scores[0], m0, 1e-9);
    EXPECT_NEAR(scores[1], m1, 1e-9);
}

TEST(PickScore, PermutationInvariantOverPromptsAndViews) {
    EvaluationBatch b = toy_batch(3, 4, 5, 99);
    BrightnessPreference scorer;
    auto reference = pick_score(scorer, b);

    // Permute prompts (and their render columns) consistently.
    EvaluationBatch shuffled = b;
    std::vector<size_t> order{2, 0, 3, 1};
    for (size_t m = 0; m < b.renders.size(); ++m)
        for (size_t p = 0; p < order.size(); ++p)
            shuffled.renders[m][p] = b.renders[m][order[p]];
    for (size_t p = 0; p < order.size(); ++p)
        shuffled.prompts[p] = b.prompts[order[p]];
    auto permuted = pick_score(scorer, shuffled);
    for (size_t m = 0; m < reference.size(); ++m)
        EXPECT_NEAR(permuted[m], reference[m], 1e-12);

    // Permute views within every (method, prompt).
    EvaluationBatch vshuf = b;
    std::vector<size_t> vorder{4, 2, 0, 1, 3};
    for (auto& per_method : vshuf.renders)
        for (auto& views : per_method) {
            auto orig = views;
            for (size_t v = 0; v < vorder.size(); ++v) views[v] = orig[vorder[v]];
        }
    auto vperm = pick_score(scorer, vshuf);
    for (size_t m = 0; m < reference.size(); ++m)
        EXPECT_NEAR(vperm[m], reference[m], 1e-12);
}

TEST(PickScore, MissingViewsRejected) {
    EvaluationBatch b = toy_batch(2, 2, 3);
    b.renders[1][0].pop_back();
    BrightnessPreference scorer;
    EXPECT_THROW(pick_score(scorer, b), InvalidInputError);
}

TEST(ClipScore, SinglePromptPassesThrough) {
    class FixedScorer : public SimilarityScorer {
    public:
        double score(const std::string&, const Image&) override { return 0.2814; }
    } scorer;
    std::vector<ClipRender> renders;
    renders.push_back({"a corgi", Image(4, 4, 3, 0.5), canonical_clip_pose()});
    EXPECT_NEAR(clip_score(scorer, renders), 0.2814, 1e-12);
}

TEST(ClipScore, ConstantScorerAveragesToConstant) {
    class FixedScorer : public SimilarityScorer {
    public:
        double score(const std::string&, const Image&) override { return 0.77; }
    } scorer;
    std::vector<ClipRender> renders;
    for (int i = 0; i < 5; ++i)
        renders.push_back({"p" + std::to_string(i), Image(4, 4, 3, 0.1 * i),
                           canonical_clip_pose()});
    EXPECT_NEAR(clip_score(scorer, renders), 0.77, 1e-12);
}

TEST(ClipScore, ToyTableMatchesHandAverage) {
    class TableScorer : public SimilarityScorer {
    public:
        double score(const std::string& text, const Image&) override {
            if (text == "a") return 0.31;
            if (text == "b") return 0.22;
            return 0.49;
        }
    } scorer;
    std::vector<ClipRender> renders;
    for (const char* p : {"a", "b", "c"})
        renders.push_back({p, Image(2, 2, 3, 0.0), canonical_clip_pose()});
    EXPECT_NEAR(clip_score(scorer, renders), (0.31 + 0.22 + 0.49) / 3.0, 1e-9);
}

TEST(ClipScore, CanonicalPoseEnforced) {
    // Elevation 45, azimuth 30 is the fixed evaluation pose.
    CameraPose pose = canonical_clip_pose();
    EXPECT_DOUBLE_EQ(pose.elevation_deg, 45.0);
    EXPECT_DOUBLE_EQ(pose.azimuth_deg, 30.0);

    class FixedScorer : public SimilarityScorer {
    public:
        double score(const std::string&, const Image&) override { return 0.5; }
    } scorer;
    std::vector<ClipRender> renders;
    renders.push_back({"p", Image(2, 2, 3, 0.0), make_camera(31.0, 45.0)});
    EXPECT_THROW(clip_score(scorer, renders), InvalidInputError);
}
