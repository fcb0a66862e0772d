// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "voxlift/condition.hpp"
#include "voxlift/mock_targets.hpp"

using namespace voxlift;

namespace {

Image disc_mask(int size, double radius_px, double cx, double cy) {
    Image m(size, size, 1);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (std::hypot(x - cx, y - cy) <= radius_px) m.at(x, y, 0) = 1.0;
    return m;
}

// Two-sided transition set: pixels whose binarized value differs from a
// 4-neighbor.
Image transition_set(const Image& binary) {
    Image out(binary.width, binary.height, 1);
    for (int y = 0; y < binary.height; ++y)
        for (int x = 0; x < binary.width; ++x) {
            double v = binary.at(x, y, 0);
            const int d[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
            for (auto& [dx, dy] : d) {
                int xx = x + dx, yy = y + dy;
                if (xx < 0 || xx >= binary.width || yy < 0 || yy >= binary.height)
                    continue;
                if (binary.at(xx, yy, 0) != v) {
                    out.at(x, y, 0) = 1.0;
                    break;
                }
            }
        }
    return out;
}

}  // namespace

TEST(EdgeCondition, ConstantMaskHasNoEdges) {
    for (double fill : {0.0, 1.0}) {
        ConditionImage cond = edge_condition(Image(16, 16, 1, fill));
        EXPECT_EQ(cond.kind, ConditionKind::kEdge);
        for (double v : cond.data.data) EXPECT_EQ(v, 0.0);
    }
}

// Ring of thickness <= 2 covering >= 95% of the analytically rasterized
// circle.
TEST(EdgeCondition, FilledDiscGivesThinRingOnAnalyticCircle) {
    int size = 64;
    double r = 20.0, cx = 31.5, cy = 31.5;
    Image mask = disc_mask(size, r, cx, cy);
    ConditionImage cond = edge_condition(mask);

    // Analytic circle rasterization: pixels within +-1 of the radius.
    int circle_total = 0, circle_covered = 0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double d = std::hypot(x - cx, y - cy);
            if (std::abs(d - r) <= 1.0) {
                ++circle_total;
                bool near_edge = false;
                for (int dy = -1; dy <= 1 && !near_edge; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int xx = x + dx, yy = y + dy;
                        if (xx >= 0 && xx < size && yy >= 0 && yy < size &&
                            cond.data.at(xx, yy, 0) > 0.0) {
                            near_edge = true;
                            break;
                        }
                    }
                if (near_edge) ++circle_covered;
            }
            // Thickness bound: edge pixels stay within 2 px of the circle.
            if (cond.data.at(x, y, 0) > 0.0) EXPECT_LE(std::abs(d - r), 2.0);
        }
    EXPECT_GE(circle_covered, static_cast<int>(0.95 * circle_total));
}

TEST(EdgeCondition, EdgePixelsStayNextToTransitions) {
    Image mask = disc_mask(32, 9.0, 15.2, 16.1);
    ConditionImage cond = edge_condition(mask);
    Image binary = binarize_mask(mask, 0.5);
    Image trans = transition_set(binary);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            if (cond.data.at(x, y, 0) <= 0.0) continue;
            bool near = false;
            for (int dy = -1; dy <= 1 && !near; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    int xx = x + dx, yy = y + dy;
                    if (xx >= 0 && xx < 32 && yy >= 0 && yy < 32 &&
                        trans.at(xx, yy, 0) > 0.0) {
                        near = true;
                        break;
                    }
                }
            EXPECT_TRUE(near) << "edge pixel (" << x << "," << y
                              << ") not adjacent to a 0/1 transition";
        }
}

TEST(EdgeCondition, DeterministicAndStableOnBinarizedInput) {
    Image mask(24, 24, 1);
    Rng rng(8);
    for (double& v : mask.data) v = rng.uniform(0.0, 1.0);

    ConditionImage a = edge_condition(mask);
    ConditionImage b = edge_condition(mask);
    EXPECT_EQ(max_abs_diff(a.data, b.data), 0.0);

    // Binarizing first changes nothing: detection only sees the binary mask.
    ConditionImage c = edge_condition(binarize_mask(mask, 0.5));
    EXPECT_EQ(max_abs_diff(a.data, c.data), 0.0);
}

TEST(EdgeCondition, EdgesAreSparseOnObjectMasks) {
    Image mask = disc_mask(48, 15.0, 23.5, 23.5);
    ConditionImage cond = edge_condition(mask);
    double fraction = mean(cond.data);
    EXPECT_LT(fraction, 0.5);
    EXPECT_GT(fraction, 0.0);
}

TEST(EdgeCondition, DilationGrowsRing) {
    Image mask = disc_mask(32, 10.0, 15.5, 15.5);
    EdgeOptions opts;
    ConditionImage thin = edge_condition(mask, {}, opts);
    opts.dilation = 1;
    ConditionImage thick = edge_condition(mask, {}, opts);
    double thin_count = 0, thick_count = 0;
    for (double v : thin.data.data) thin_count += v;
    for (double v : thick.data.data) thick_count += v;
    EXPECT_GT(thick_count, thin_count);
    // Dilation only adds pixels.
    for (size_t i = 0; i < thin.data.size(); ++i)
        if (thin.data.data[i] > 0.0) EXPECT_GT(thick.data.data[i], 0.0);
}

TEST(PairedConditions, SelfPriorOutlinesOwnSilhouette) {
    RadianceField field = testutil::make_sphere_field(25, 0.5, 10.0);
    CameraPose cam = make_camera(20.0, 15.0);
    RenderOptions opts;
    opts.width = 48;
    opts.height = 48;
    opts.samples_per_ray = 64;

    PairedConditions pc = paired_conditions(field, field, cam, opts);

    // The prior edge, dilated once, should cover the current silhouette's own
    // boundary (IoU of dilated edge sets >= 0.9, both from the same field).
    ConditionImage own = edge_condition(pc.current_render.opacity, cam);
    EdgeOptions dilate;
    dilate.dilation = 1;
    ConditionImage own_d = edge_condition(pc.current_render.opacity, cam, dilate);
    Image prior_mask = render_density_mask(field, cam, opts);
    ConditionImage prior_d = edge_condition(prior_mask, cam, dilate);
    EXPECT_GE(mask_iou(own_d.data, prior_d.data), 0.9);
    EXPECT_EQ(max_abs_diff(own.data, pc.edge.data), 0.0);
}

TEST(PairedConditions, EmptyPriorIsAnError) {
    RadianceField current = testutil::make_sphere_field(17, 0.5, 8.0);
    RadianceField empty_prior = make_field(17, Aabb{});
    RenderOptions opts;
    opts.width = 24;
    opts.height = 24;
    EXPECT_THROW(paired_conditions(current, empty_prior, make_camera(0, 10), opts),
                 Error);
}

TEST(PairedConditions, PoseRecordedOnAllOutputs) {
    RadianceField field = testutil::make_sphere_field(17, 0.5, 8.0);
    CameraPose cam = make_camera(-42.0, 12.0, 3.3);
    RenderOptions opts;
    opts.width = 24;
    opts.height = 24;
    PairedConditions pc = paired_conditions(field, field, cam, opts);
    EXPECT_EQ(pc.normal.source_pose.azimuth_deg, cam.azimuth_deg);
    EXPECT_EQ(pc.edge.source_pose.azimuth_deg, cam.azimuth_deg);
    EXPECT_EQ(pc.normal.source_pose.elevation_deg, cam.elevation_deg);
    EXPECT_EQ(pc.edge.source_pose.distance, cam.distance);
}

TEST(PairedConditions, RegenerateBitIdenticallyFromCheckpoint) {
    RadianceField field = testutil::make_sphere_field(17, 0.45, 9.0);
    std::stringstream buf;
    save_field(field, buf);
    RadianceField reloaded = load_field(buf);

    CameraPose cam = make_camera(33.0, 18.0);
    RenderOptions opts;
    opts.width = 32;
    opts.height = 32;
    opts.samples_per_ray = 48;

    PairedConditions a = paired_conditions(field, field, cam, opts);
    PairedConditions b = paired_conditions(reloaded, reloaded, cam, opts);
    // The checkpoint payload is f32; rebuild the original through the same
    // quantization for a bit-exact comparison.
    std::stringstream buf2;
    save_field(reloaded, buf2);
    RadianceField reloaded2 = load_field(buf2);
    PairedConditions c = paired_conditions(reloaded2, reloaded2, cam, opts);
    EXPECT_EQ(max_abs_diff(b.rgb, c.rgb), 0.0);
    EXPECT_EQ(max_abs_diff(b.edge.data, c.edge.data), 0.0);
    EXPECT_EQ(max_abs_diff(b.normal.data, c.normal.data), 0.0);
    // And the pre-checkpoint conditions agree to float precision.
    EXPECT_LT(max_abs_diff(a.rgb, b.rgb), 1e-5);
}

TEST(NormalCondition, PacksWorldNormalsIntoUnitRange) {
    RadianceField field = testutil::make_sphere_field(25, 0.5, 10.0);
    CameraPose cam = make_camera(0.0, 0.0);
    RenderOptions opts;
    opts.width = 32;
    opts.height = 32;
    opts.compute_normals = true;
    RenderOutput ro = render(field, cam, opts);
    ConditionImage cond = normal_condition(ro, cam);
    EXPECT_EQ(cond.kind, ConditionKind::kNormal);
    for (double v : cond.data.data) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    // Center pixel faces +x, packed to ~(1.0, 0.5, 0.5).
    EXPECT_NEAR(cond.data.at(16, 16, 0), 1.0, 0.05);
    EXPECT_NEAR(cond.data.at(16, 16, 1), 0.5, 0.05);
    EXPECT_NEAR(cond.data.at(16, 16, 2), 0.5, 0.05);
}
