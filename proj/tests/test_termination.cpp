// Copyright Contributors to the Voxlift Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "voxlift/termination.hpp"

using namespace voxlift;

namespace {

Image disc_mask(int size, double radius_px) {
    Image m(size, size, 1);
    double c = (size - 1) / 2.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (std::hypot(x - c, y - c) <= radius_px) m.at(x, y, 0) = 1.0;
    return m;
}

// Brute-force neighborhood scan: a mask pixel is boundary when any 4-neighbor
// (or the image frame) is off.
Image brute_force_boundary(const Image& mask) {
    Image out(mask.width, mask.height, 1);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y, 0) <= 0.0) continue;
            bool b = false;
            const int d[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
            for (auto& [dx, dy] : d) {
                int xx = x + dx, yy = y + dy;
                if (xx < 0 || xx >= mask.width || yy < 0 || yy >= mask.height ||
                    mask.at(xx, yy, 0) <= 0.0) {
                    b = true;
                    break;
                }
            }
            if (b) out.at(x, y, 0) = 1.0;
        }
    return out;
}

}  // namespace

TEST(ClassifyRays, AllZeroMaskFlagsNoObject) {
    Image opacity(8, 8, 1, 0.0);
    Image sigma(8, 8, 1, 0.0);
    RayClassification rc =
        classify_rays(opacity, sigma, default_boundary_detector(), 0.5);
    EXPECT_TRUE(rc.no_object);
    EXPECT_EQ(rc.valid_count, 0u);
    EXPECT_FALSE(boundary_integrity(rc).has_value());
}

TEST(ClassifyRays, FilledDiscAgainstBruteForceOracle) {
    int size = 32;
    double r = 10.0;
    Image opacity = disc_mask(size, r);
    Image sigma(size, size, 1, 1.0);
    RayClassification rc =
        classify_rays(opacity, sigma, default_boundary_detector(), 0.5);

    Image oracle = brute_force_boundary(opacity);
    size_t oracle_count = 0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            size_t pix = static_cast<size_t>(y) * size + x;
            EXPECT_EQ(rc.boundary[pix], oracle.at(x, y, 0) > 0.0 ? 1 : 0);
            if (oracle.at(x, y, 0) > 0.0) ++oracle_count;
        }
    EXPECT_EQ(rc.boundary_count, oracle_count);

    // |R_v| ~ area, |R_b| ~ perimeter.
    EXPECT_NEAR(static_cast<double>(rc.valid_count), M_PI * r * r,
                0.15 * M_PI * r * r);
    EXPECT_NEAR(static_cast<double>(rc.boundary_count), 2.0 * M_PI * r,
                0.25 * 2.0 * M_PI * r);
}

TEST(ClassifyRays, FullFrameMaskBoundsAtImageBorder) {
    int size = 10;
    Image opacity(size, size, 1, 1.0);
    Image sigma(size, size, 1, 2.0);
    RayClassification rc =
        classify_rays(opacity, sigma, default_boundary_detector(), 0.5);
    EXPECT_EQ(rc.valid_count, static_cast<size_t>(size * size));
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            bool frame = x == 0 || x == size - 1 || y == 0 || y == size - 1;
            EXPECT_EQ(rc.boundary[static_cast<size_t>(y) * size + x], frame ? 1 : 0);
        }
}

TEST(ClassifyRays, RejectsOutOfRangeOpacity) {
    Image opacity(4, 4, 1, 1.5);
    Image sigma(4, 4, 1, 0.0);
    EXPECT_THROW(classify_rays(opacity, sigma, default_boundary_detector(), 0.5),
                 InvalidInputError);
}

TEST(BoundaryIntegrity, ConstantSigmaGivesZero) {
    Image opacity = disc_mask(16, 5.0);
    Image sigma(16, 16, 1, 3.7);
    RayClassification rc =
        classify_rays(opacity, sigma, default_boundary_detector(), 0.5);
    auto delta = boundary_integrity(rc);
    ASSERT_TRUE(delta.has_value());
    EXPECT_NEAR(*delta, 0.0, 1e-12);
}

TEST(BoundaryIntegrity, HandComputedCase) {
    // 6 interior rays at 2.0 and 4 boundary rays at 0.8 in a 10-ray strip:
    // valid mean = (6*2.0 + 4*0.8)/10 = 1.52, boundary mean = 0.8,
    // delta = 0.72.
    RayClassification rc;
    rc.width = 10;
    rc.height = 1;
    rc.valid.assign(10, 1);
    rc.boundary.assign(10, 0);
    rc.sigma.assign(10, 2.0);
    for (int i = 6; i < 10; ++i) {
        rc.boundary[i] = 1;
        rc.sigma[i] = 0.8;
    }
    rc.valid_count = 10;
    rc.boundary_count = 4;
    auto delta = boundary_integrity(rc);
    ASSERT_TRUE(delta.has_value());
    EXPECT_NEAR(*delta, 0.72, 1e-12);

    // Interior-only valid mean variant: 2.0 - 0.8 = 1.2.
    auto delta_interior = boundary_integrity(rc, /*boundary_in_valid_mean=*/false);
    ASSERT_TRUE(delta_interior.has_value());
    EXPECT_NEAR(*delta_interior, 1.2, 1e-12);
}

TEST(BoundaryIntegrity, ScalesLinearlyWithSigma) {
    Image opacity = disc_mask(24, 8.0);
    Image sigma(24, 24, 1, 0.0);
    Rng rng(5);
    for (double& v : sigma.data) v = rng.uniform(0.5, 3.0);
    RayClassification rc =
        classify_rays(opacity, sigma, default_boundary_detector(), 0.5);
    auto base = boundary_integrity(rc);
    ASSERT_TRUE(base.has_value());
    for (double& v : rc.sigma) v *= 4.5;
    auto scaled = boundary_integrity(rc);
    ASSERT_TRUE(scaled.has_value());
    EXPECT_NEAR(*scaled, 4.5 * *base, 1e-9);
}

TEST(BoundaryIntegrity, PermutationInvariant) {
    // Delta_r depends on set membership only, not ray order.
    std::vector<double> sigmas{1.0, 2.0, 3.0, 0.5, 0.25, 4.0};
    std::vector<uint8_t> valid{1, 1, 1, 1, 1, 1};
    std::vector<uint8_t> boundary{1, 0, 0, 1, 0, 0};

    auto build = [&](const std::vector<int>& perm) {
        RayClassification rc;
        rc.width = 6;
        rc.height = 1;
        for (int i : perm) {
            rc.sigma.push_back(sigmas[i]);
            rc.valid.push_back(valid[i]);
            rc.boundary.push_back(boundary[i]);
        }
        rc.valid_count = 6;
        rc.boundary_count = 2;
        return rc;
    };
    std::vector<int> perm{0, 1, 2, 3, 4, 5};
    auto reference = boundary_integrity(build(perm));
    std::mt19937 g(3);
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(perm.begin(), perm.end(), g);
        EXPECT_DOUBLE_EQ(*boundary_integrity(build(perm)), *reference);
    }
}

TEST(BoundaryIntegrity, LowerBoundarySigmaGivesPositiveDelta) {
    Image opacity = disc_mask(20, 7.0);
    RayClassification rc =
        classify_rays(opacity, Image(20, 20, 1, 0.0), default_boundary_detector(), 0.5);
    Rng rng(17);
    rc.sigma.assign(rc.sigma.size(), 0.0);
    for (size_t i = 0; i < rc.sigma.size(); ++i) {
        if (rc.boundary[i])
            rc.sigma[i] = rng.uniform(0.1, 0.9);  // strictly below interior
        else if (rc.valid[i])
            rc.sigma[i] = rng.uniform(1.0, 2.0);
    }
    auto delta = boundary_integrity(rc);
    ASSERT_TRUE(delta.has_value());
    EXPECT_GT(*delta, 0.0);
}

TEST(ShouldTerminate, FiresAtThirdConsecutiveCheckpointBelowThreshold) {
    TerminationPolicy policy;  // threshold 0.1, window 3
    policy.max_iters = 10000;
    std::vector<DeltaCheckpoint> history;
    std::vector<double> deltas{0.5, 0.09, 0.08, 0.07};
    for (size_t i = 0; i < deltas.size(); ++i) {
        history.push_back({static_cast<int>((i + 1) * 100), deltas[i]});
        TerminationDecision dec = should_terminate(history, policy);
        if (i < 3) {
            EXPECT_FALSE(dec.stop) << "checkpoint " << i;
        } else {
            EXPECT_TRUE(dec.stop);
            EXPECT_EQ(dec.reason, StopReason::kBoundaryIntegrity);
        }
    }
}

TEST(ShouldTerminate, InterruptedStreakDoesNotFire) {
    TerminationPolicy policy;
    policy.max_iters = 10000;
    std::vector<DeltaCheckpoint> history{
        {100, 0.09}, {200, 0.30}, {300, 0.09}, {400, 0.09}};
    TerminationDecision dec = should_terminate(history, policy);
    EXPECT_FALSE(dec.stop);
}

TEST(ShouldTerminate, BudgetAlwaysTerminates) {
    TerminationPolicy policy;
    policy.max_iters = 400;
    std::vector<DeltaCheckpoint> history{{100, 0.9}, {200, 0.8}, {300, 0.9}, {400, 0.7}};
    TerminationDecision dec = should_terminate(history, policy);
    EXPECT_TRUE(dec.stop);
    EXPECT_EQ(dec.reason, StopReason::kBudget);
}

TEST(ShouldTerminate, NoObjectCheckpointsNeverCountAsBelowThreshold) {
    TerminationPolicy policy;
    policy.max_iters = 10000;
    std::vector<DeltaCheckpoint> history{
        {100, std::nullopt}, {200, std::nullopt}, {300, std::nullopt}};
    EXPECT_FALSE(should_terminate(history, policy).stop);
}

TEST(ShouldTerminate, PureFunctionOfInputs) {
    TerminationPolicy policy;
    policy.max_iters = 5000;
    std::vector<DeltaCheckpoint> history{{100, 0.05}, {200, 0.04}, {300, 0.02}};
    TerminationDecision a = should_terminate(history, policy);
    TerminationDecision b = should_terminate(history, policy);
    EXPECT_EQ(a.stop, b.stop);
    EXPECT_EQ(a.reason, b.reason);
    EXPECT_TRUE(a.stop);
}

TEST(ShouldTerminate, PolicyValidation) {
    std::vector<DeltaCheckpoint> history;
    TerminationPolicy bad;
    bad.threshold = 0.0;
    EXPECT_THROW(should_terminate(history, bad), InvalidConfigError);
    bad = TerminationPolicy{};
    bad.consecutive_window = 0;
    EXPECT_THROW(should_terminate(history, bad), InvalidConfigError);
    bad = TerminationPolicy{};
    bad.checkpoint_interval = 0;
    EXPECT_THROW(should_terminate(history, bad), InvalidConfigError);
}
