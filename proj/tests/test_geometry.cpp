#include <doctest.h>

#include <cmath>
#include <vector>

#include "mipose/common.hpp"
#include "mipose/geometry.hpp"
#include "test_util.hpp"

using namespace mipose;

namespace {

Pose make_pose(std::initializer_list<std::pair<double, double>> pts,
               std::int64_t id = 0) {
    Pose p;
    p.instance_id = id;
    for (const auto& [x, y] : pts)
        p.keypoints.push_back({x, y, Visibility::labeled});
    return p;
}

}  // namespace

TEST_CASE("center_distance matches the 3-4-5 triangle") {
    BoundingBox a{0, 0, 2, 2};
    BoundingBox b{3, 4, 2, 2};
    CHECK(center_distance(a, a) == doctest::Approx(0.0));
    CHECK(center_distance(a, b) == doctest::Approx(5.0));
    CHECK(center_distance(b, a) == doctest::Approx(5.0));
}

TEST_CASE("box_iou basics and symmetry") {
    BoundingBox a{0, 0, 10, 10};
    CHECK(box_iou(a, a) == doctest::Approx(1.0));
    BoundingBox b{10, 10, 5, 5};
    CHECK(box_iou(a, b) == doctest::Approx(0.0));  // corner touch, zero area
    // Right half overlap: inter 50, union 150.
    BoundingBox c{5, 0, 10, 10};
    CHECK(box_iou(a, c) == doctest::Approx(50.0 / 150.0));
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        BoundingBox p{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 20),
                      rng.uniform(1, 20)};
        BoundingBox q{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 20),
                      rng.uniform(1, 20)};
        const double iou = box_iou(p, q);
        CHECK(iou == doctest::Approx(box_iou(q, p)));
        CHECK(iou >= 0.0);
        CHECK(iou <= 1.0);
    }
}

TEST_CASE("count_keypoints_in_box is boundary inclusive and skips unlabeled") {
    BoundingBox b{10, 10, 10, 10};
    Pose p = make_pose({{10, 10}, {20, 20}, {15, 15}, {9.999, 15}, {15, 20.001}});
    CHECK(count_keypoints_in_box(p, b) == 3);
    p.keypoints[2].visibility = Visibility::unlabeled;
    CHECK(count_keypoints_in_box(p, b) == 2);
}

TEST_CASE("pose_bounding_box expands the hull by the margin") {
    // Hull (10,20)-(30,60): extent 20x40; margin 0.1 adds 2 and 4 per side.
    Pose p = make_pose({{10, 20}, {30, 60}, {20, 40}});
    BoundingBox b = pose_bounding_box(p, 0.1);
    CHECK(b.x == doctest::Approx(8.0));
    CHECK(b.y == doctest::Approx(16.0));
    CHECK(b.w == doctest::Approx(24.0));
    CHECK(b.h == doctest::Approx(48.0));

    Pose empty;
    empty.keypoints.resize(3);
    CHECK_THROWS_AS(pose_bounding_box(empty), std::invalid_argument);
}

TEST_CASE("pose_bounding_box guards degenerate hulls") {
    Pose p = make_pose({{5, 5}, {5, 9}});  // zero width
    BoundingBox b = pose_bounding_box(p, 0.1);
    CHECK(b.w > 0.0);
    CHECK(b.h == doctest::Approx(4.0 * 1.2));
}

TEST_CASE("compute_oks frozen values") {
    const std::vector<double> kappas{0.1};
    Pose gt = make_pose({{10, 10}});
    CHECK(compute_oks(gt, gt, 100.0, kappas) == doctest::Approx(1.0));

    // Choose the distance so d^2 = 2 * scale_sq * kappa^2 => OKS = e^-1.
    const double scale_sq = 100.0;
    const double d = std::sqrt(2.0 * scale_sq * 0.1 * 0.1);
    Pose pred = make_pose({{10 + d, 10}});
    CHECK(compute_oks(gt, pred, scale_sq, kappas) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-12));
}

TEST_CASE("compute_oks ignores unlabeled gt keypoints and validates input") {
    const std::vector<double> kappas{0.1, 0.1};
    Pose gt = make_pose({{10, 10}, {50, 50}});
    gt.keypoints[1].visibility = Visibility::unlabeled;
    Pose pred = make_pose({{10, 10}, {999, 999}});  // wild miss on unlabeled kp
    CHECK(compute_oks(gt, pred, 100.0, kappas) == doctest::Approx(1.0));

    CHECK_THROWS_AS(compute_oks(gt, pred, 0.0, kappas), std::invalid_argument);
    gt.keypoints[0].visibility = Visibility::unlabeled;
    CHECK_THROWS_AS(compute_oks(gt, pred, 100.0, kappas), std::invalid_argument);
}

TEST_CASE("make_crop_transform pads the narrow side and scales uniformly") {
    // Box 20x40 into a square target with no margin: width padded to 40,
    // source becomes (0,10,40,40), scale 64/40 = 1.6.
    BoundingBox box{10, 10, 20, 40};
    CropTransform t = make_crop_transform(box, 64, 64, 0.0);
    CHECK(t.source_box.x == doctest::Approx(0.0));
    CHECK(t.source_box.y == doctest::Approx(10.0));
    CHECK(t.source_box.w == doctest::Approx(40.0));
    CHECK(t.source_box.h == doctest::Approx(40.0));
    CHECK(t.scale_x == doctest::Approx(1.6));
    CHECK(t.scale_y == doctest::Approx(1.6));

    Keypoint k{10.0, 10.0, Visibility::labeled};
    Keypoint c = t.apply(k);
    CHECK(c.x == doctest::Approx(16.0));
    CHECK(c.y == doctest::Approx(0.0));
    Keypoint far = t.apply({30.0, 50.0, Visibility::labeled});
    CHECK(far.x == doctest::Approx(48.0));
    CHECK(far.y == doctest::Approx(64.0));
}

TEST_CASE("make_crop_transform margin expands before padding") {
    // Square box 10x10, margin 0.125: source is 12.5x12.5 centered on the box.
    BoundingBox box{0, 0, 10, 10};
    CropTransform t = make_crop_transform(box, 64, 64, 0.125);
    CHECK(t.source_box.x == doctest::Approx(-1.25));
    CHECK(t.source_box.w == doctest::Approx(12.5));
    CHECK(t.scale_x == doctest::Approx(64.0 / 12.5));
    CHECK_THROWS_AS(make_crop_transform(BoundingBox{0, 0, 0, 5}, 64, 64, 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_crop_transform(box, 0, 64, 0.1), std::invalid_argument);
}

TEST_CASE("crop transform round-trips and is always uniform-scale") {
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        BoundingBox box{rng.uniform(-20, 80), rng.uniform(-20, 80), rng.uniform(0.5, 60),
                        rng.uniform(0.5, 60)};
        CropTransform t = make_crop_transform(box, 64, 64, 0.125);
        CHECK(t.scale_x == doctest::Approx(t.scale_y).epsilon(1e-12));
        Keypoint k{rng.uniform(-10, 110), rng.uniform(-10, 110), Visibility::labeled};
        Keypoint back = t.invert(t.apply(k));
        CHECK(back.x == doctest::Approx(k.x).epsilon(1e-9));
        CHECK(back.y == doctest::Approx(k.y).epsilon(1e-9));
    }
}

TEST_CASE("pose_bounding_box commutes with uniform-scale crops") {
    // The assignment stage rebuilds the primary's box from the transformed
    // pose; that only works because deriving the box and applying the crop
    // commute. Verify on random poses.
    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        Pose p = miptest::random_pose(rng, 5, 5.0, 90.0);
        BoundingBox image_box = pose_bounding_box(p);
        CropTransform t = make_crop_transform(image_box, 64, 64, 0.125);
        BoundingBox rebuilt = pose_bounding_box(t.apply(p));
        CHECK(rebuilt.x == doctest::Approx((image_box.x - t.offset_x) * t.scale_x).epsilon(1e-9));
        CHECK(rebuilt.y == doctest::Approx((image_box.y - t.offset_y) * t.scale_y).epsilon(1e-9));
        CHECK(rebuilt.w == doctest::Approx(image_box.w * t.scale_x).epsilon(1e-9));
        CHECK(rebuilt.h == doctest::Approx(image_box.h * t.scale_y).epsilon(1e-9));
    }
}

TEST_CASE("select_overlapping_instances qualifies by shared keypoints") {
    Pose primary = make_pose({{10, 10}, {30, 10}, {10, 30}, {30, 30}, {20, 20}}, 0);
    BoundingBox box = pose_bounding_box(primary);

    // Neighbour with exactly 3 keypoints inside the primary's box.
    Pose near = make_pose({{12, 12}, {28, 28}, {20, 15}, {90, 90}, {95, 95}}, 1);
    // Far pose with none inside.
    Pose far = make_pose({{70, 70}, {75, 75}, {80, 80}, {85, 85}, {90, 90}}, 2);

    auto sel = select_overlapping_instances(primary, box, {far, primary, near}, 3);
    REQUIRE(sel.size() == 2);
    CHECK(sel[0].instance_id == 0);
    CHECK(sel[1].instance_id == 1);

    // Raising k above the shared count drops the neighbour.
    auto strict = select_overlapping_instances(primary, box, {far, primary, near}, 4);
    REQUIRE(strict.size() == 1);
    CHECK(strict[0].instance_id == 0);
}

TEST_CASE("select_overlapping_instances orders by center distance with id ties") {
    Pose primary = make_pose({{40, 40}, {60, 40}, {40, 60}, {60, 60}, {50, 50}}, 7);
    BoundingBox box = pose_bounding_box(primary);

    auto shifted = [&](double dx, std::int64_t id) {
        Pose p = primary;
        p.instance_id = id;
        for (auto& k : p.keypoints) k.x += dx;
        return p;
    };
    Pose a = shifted(4.0, 3);    // nearer
    Pose b = shifted(-8.0, 1);   // farther
    Pose c = shifted(-4.0, 9);   // ties with a on distance, larger id

    auto sel = select_overlapping_instances(primary, box, {b, c, primary, a}, 3);
    REQUIRE(sel.size() == 4);
    CHECK(sel[0].instance_id == 7);
    CHECK(sel[1].instance_id == 3);
    CHECK(sel[2].instance_id == 9);
    CHECK(sel[3].instance_id == 1);
}

TEST_CASE("select_overlapping_instances rejects a missing primary and bad k") {
    Pose primary = make_pose({{10, 10}, {20, 20}}, 5);
    BoundingBox box = pose_bounding_box(primary);
    Pose other = make_pose({{10, 10}, {20, 20}}, 6);
    CHECK_THROWS_AS(select_overlapping_instances(primary, box, {other}, 3),
                    std::invalid_argument);
    CHECK_THROWS_AS(select_overlapping_instances(primary, box, {primary}, 0),
                    std::invalid_argument);
}
