#include <doctest.h>

#include <cmath>
#include <vector>

#include "mipose/common.hpp"
#include "mipose/heatmap.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mipose;

TEST_CASE("encode places a unit-amplitude gaussian at the keypoint") {
    Pose p;
    p.keypoints.push_back({5.0, 5.0, Visibility::labeled});
    HeatmapSet h = encode_heatmaps(p, 16, 16, 2.0);
    REQUIRE(h.channels == 1);
    CHECK(h.at(5, 5, 0) == doctest::Approx(1.0));
    // One pixel away: exp(-1 / (2 * sigma^2)) with sigma = 2.
    CHECK(h.at(5, 6, 0) == doctest::Approx(0.8824969025845955).epsilon(1e-6));
    CHECK(h.at(6, 5, 0) == doctest::Approx(0.8824969025845955).epsilon(1e-6));
    // Diagonal: exp(-2 / 8).
    CHECK(h.at(6, 6, 0) == doctest::Approx(std::exp(-0.25)).epsilon(1e-6));
}

TEST_CASE("encode zeroes unlabeled and out-of-bounds keypoints") {
    Pose p;
    p.keypoints.push_back({5.0, 5.0, Visibility::unlabeled});
    p.keypoints.push_back({-3.0, 5.0, Visibility::labeled});
    p.keypoints.push_back({5.0, 40.0, Visibility::labeled});
    HeatmapSet h = encode_heatmaps(p, 16, 16);
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) sum += h.at(y, x, c);
        CHECK(sum == doctest::Approx(0.0));
    }
}

TEST_CASE("encode validates its arguments") {
    Pose p;
    p.keypoints.push_back({1.0, 1.0, Visibility::labeled});
    CHECK_THROWS_AS(encode_heatmaps(p, 0, 16), std::invalid_argument);
    CHECK_THROWS_AS(encode_heatmaps(p, 16, 16, 0.0), std::invalid_argument);
}

TEST_CASE("decode refines a quarter pixel toward the larger neighbour") {
    HeatmapSet h(16, 16, 1);
    h.at(5, 5, 0) = 1.0f;
    h.at(5, 6, 0) = 0.9f;
    h.at(5, 4, 0) = 0.1f;
    h.at(4, 5, 0) = 0.3f;
    h.at(6, 5, 0) = 0.2f;
    ScoredPose out = decode_heatmaps(h);
    REQUIRE(out.keypoints.size() == 1);
    CHECK(out.keypoints[0].x == doctest::Approx(5.25));
    CHECK(out.keypoints[0].y == doctest::Approx(4.75));
    CHECK(out.keypoints[0].score == doctest::Approx(1.0));
    CHECK(out.aggregate_score == doctest::Approx(1.0));
}

TEST_CASE("decode at the border treats missing neighbours as zero") {
    HeatmapSet h(8, 8, 2);
    // Channel 0: peak in the corner with a larger right neighbour.
    h.at(0, 0, 0) = 0.8f;
    h.at(0, 1, 0) = 0.9f;  // actually the max; refine pulls toward (0,0)
    // Channel 1: lone corner peak, neighbours all zero -> no refinement.
    h.at(0, 0, 1) = 0.5f;
    ScoredPose out = decode_heatmaps(h);
    CHECK(out.keypoints[0].x == doctest::Approx(0.75));
    CHECK(out.keypoints[0].y == doctest::Approx(0.0));
    CHECK(out.keypoints[1].x == doctest::Approx(0.0));
    CHECK(out.keypoints[1].y == doctest::Approx(0.0));
    CHECK(out.keypoints[1].score == doctest::Approx(0.5));
}

TEST_CASE("decode reports an all-zero channel as absent") {
    HeatmapSet h(8, 8, 2);
    h.at(3, 3, 1) = 1.0f;
    ScoredPose out = decode_heatmaps(h);
    CHECK(out.keypoints[0].score == doctest::Approx(0.0));
    CHECK(out.keypoints[0].x == doctest::Approx(0.0));
    // The aggregate averages only scores at or above the floor.
    CHECK(out.aggregate_score == doctest::Approx(1.0));
    Pose p = out.to_pose();
    CHECK_FALSE(p.keypoints[0].labeled());
    CHECK(p.keypoints[1].labeled());
}

TEST_CASE("decode clamps scores above one") {
    HeatmapSet h(8, 8, 1);
    h.at(2, 2, 0) = 3.5f;
    ScoredPose out = decode_heatmaps(h);
    CHECK(out.keypoints[0].score == doctest::Approx(1.0));
}

TEST_CASE("round-trip error stays within half a heatmap pixel") {
    Rng rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        Pose p = miptest::random_pose(rng, 5, 1.0, 14.0);
        HeatmapSet h = encode_heatmaps(p, 16, 16);
        ScoredPose dec = decode_heatmaps(h);
        for (int c = 0; c < 5; ++c) {
            const double err = std::hypot(dec.keypoints[c].x - p.keypoints[c].x,
                                          dec.keypoints[c].y - p.keypoints[c].y);
            worst = std::max(worst, err);
        }
    }
    CHECK(worst <= 0.5);
}

TEST_CASE("mse_loss matches direct summation and handles empty weights") {
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        HeatmapSet a(6, 7, 3), b(6, 7, 3);
        for (auto& v : a.data) v = static_cast<float>(rng.uniform(-1, 1));
        for (auto& v : b.data) v = static_cast<float>(rng.uniform(-1, 1));
        std::vector<double> w{1.0, 0.0, 1.0};
        HeatmapLoss loss = mse_loss(a, b, w);
        CHECK(loss.supervised);
        CHECK(loss.value == doctest::Approx(miptest::direct_mse(a, b, w)).epsilon(1e-9));
    }

    HeatmapSet a(4, 4, 2), b(4, 4, 2);
    a.at(0, 0, 0) = 1.0f;
    HeatmapLoss none = mse_loss(a, b, {0.0, 0.0});
    CHECK_FALSE(none.supervised);
    CHECK(none.value == doctest::Approx(0.0));

    CHECK_THROWS_AS(mse_loss(a, b, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(mse_loss(a, b, {0.5, 0.5}), std::invalid_argument);
    HeatmapSet c(4, 5, 2);
    CHECK_THROWS_AS(mse_loss(a, c, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("mse_loss frozen example") {
    // Single weighted channel, 2x2 map, differences {0.1, 0.2, 0.3, 0.4}:
    // loss = (0.01 + 0.04 + 0.09 + 0.16) / 4 = 0.075.
    HeatmapSet pred(2, 2, 2), target(2, 2, 2);
    pred.at(0, 0, 0) = 0.1f;
    pred.at(0, 1, 0) = 0.2f;
    pred.at(1, 0, 0) = 0.3f;
    pred.at(1, 1, 0) = 0.4f;
    pred.at(0, 0, 1) = 9.0f;  // unweighted channel must not contribute
    HeatmapLoss loss = mse_loss(pred, target, {1.0, 0.0});
    CHECK(loss.value == doctest::Approx(0.075).epsilon(1e-6));
}

TEST_CASE("channel_to_gray clamps and scales") {
    HeatmapSet h(2, 2, 1);
    h.at(0, 0, 0) = -0.5f;
    h.at(0, 1, 0) = 0.5f;
    h.at(1, 0, 0) = 1.5f;
    h.at(1, 1, 0) = 1.0f;
    auto gray = channel_to_gray(h, 0);
    REQUIRE(gray.size() == 4);
    CHECK(gray[0] == 0);
    CHECK(gray[1] == 128);
    CHECK(gray[2] == 255);
    CHECK(gray[3] == 255);
    CHECK_THROWS_AS(channel_to_gray(h, 1), std::out_of_range);
}
