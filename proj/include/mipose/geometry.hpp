#pragma once

// Keypoint, pose and bounding-box types plus the geometric operations the
// pipeline is built on: overlap selection, distance ordering, crop
// transforms and OKS similarity.

#include <cstdint>
#include <span>
#include <vector>

namespace mipose {

enum class Visibility { unlabeled, labeled };

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    Visibility visibility = Visibility::unlabeled;

    bool labeled() const { return visibility == Visibility::labeled; }
};

struct Pose {
    std::vector<Keypoint> keypoints;
    std::int64_t instance_id = -1;
};

struct BoundingBox {
    double x = 0.0;  // top-left
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double center_x() const { return x + 0.5 * w; }
    double center_y() const { return y + 0.5 * h; }
    bool valid() const;
};

/// Affine map from image frame to a fixed-size crop frame.
/// crop = (image - offset) * scale, axis-wise.
struct CropTransform {
    BoundingBox source_box;  // expanded and aspect-padded source rectangle
    int target_h = 0;
    int target_w = 0;
    double scale_x = 1.0;
    double scale_y = 1.0;
    double offset_x = 0.0;
    double offset_y = 0.0;

    Keypoint apply(const Keypoint& k) const;
    Keypoint invert(const Keypoint& k) const;
    Pose apply(const Pose& p) const;
    Pose invert(const Pose& p) const;
};

/// Euclidean distance between box centers.
double center_distance(const BoundingBox& a, const BoundingBox& b);

/// Labeled keypoints inside the box, boundary inclusive.
int count_keypoints_in_box(const Pose& p, const BoundingBox& b);

/// Tight box over labeled keypoints, expanded by `margin` of its width/height
/// per side. Throws if the pose has no labeled keypoints.
BoundingBox pose_bounding_box(const Pose& p, double margin = 0.1);

double box_iou(const BoundingBox& a, const BoundingBox& b);

/// Poses sharing at least k labeled keypoints with `primary_box`, the primary
/// pose first, the rest ordered by nondecreasing center distance of their
/// derived boxes from `primary_box` (ties by instance_id). The primary is
/// matched inside `all` by instance_id; absence is an annotation error.
std::vector<Pose> select_overlapping_instances(const Pose& primary,
                                               const BoundingBox& primary_box,
                                               const std::vector<Pose>& all,
                                               int k);

/// Mean over labeled gt keypoints of exp(-d^2 / (2 * scale_sq * kappa^2)).
/// Throws if the gt pose has no labeled keypoints or scale_sq <= 0.
double compute_oks(const Pose& gt, const Pose& pred, double scale_sq,
                   std::span<const double> kappas);

/// Build the affine crop map: expand `box` by `margin` per side, pad the
/// shorter side to match the target aspect ratio, map onto target_w x target_h.
CropTransform make_crop_transform(const BoundingBox& box, int target_h,
                                  int target_w, double margin);

}  // namespace mipose
