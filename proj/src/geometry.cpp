#include "mipose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mipose {

bool BoundingBox::valid() const {
    return std::isfinite(x) && std::isfinite(y) && w > 0.0 && h > 0.0;
}

Keypoint CropTransform::apply(const Keypoint& k) const {
    Keypoint out = k;
    out.x = (k.x - offset_x) * scale_x;
    out.y = (k.y - offset_y) * scale_y;
    return out;
}

Keypoint CropTransform::invert(const Keypoint& k) const {
    Keypoint out = k;
    out.x = k.x / scale_x + offset_x;
    out.y = k.y / scale_y + offset_y;
    return out;
}

Pose CropTransform::apply(const Pose& p) const {
    Pose out = p;
    for (auto& k : out.keypoints) k = apply(k);
    return out;
}

Pose CropTransform::invert(const Pose& p) const {
    Pose out = p;
    for (auto& k : out.keypoints) k = invert(k);
    return out;
}

double center_distance(const BoundingBox& a, const BoundingBox& b) {
    const double dx = a.center_x() - b.center_x();
    const double dy = a.center_y() - b.center_y();
    return std::sqrt(dx * dx + dy * dy);
}

int count_keypoints_in_box(const Pose& p, const BoundingBox& b) {
    int count = 0;
    for (const auto& k : p.keypoints) {
        if (!k.labeled()) continue;
        if (k.x >= b.x && k.x <= b.x + b.w && k.y >= b.y && k.y <= b.y + b.h) ++count;
    }
    return count;
}

BoundingBox pose_bounding_box(const Pose& p, double margin) {
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();
    int labeled = 0;
    for (const auto& k : p.keypoints) {
        if (!k.labeled()) continue;
        ++labeled;
        min_x = std::min(min_x, k.x);
        min_y = std::min(min_y, k.y);
        max_x = std::max(max_x, k.x);
        max_y = std::max(max_y, k.y);
    }
    if (labeled == 0)
        throw std::invalid_argument("pose_bounding_box: pose has no labeled keypoints");
    // Guard against zero-extent boxes from collinear/degenerate poses.
    constexpr double kMinExtent = 1e-3;
    double w = std::max(max_x - min_x, kMinExtent);
    double h = std::max(max_y - min_y, kMinExtent);
    BoundingBox box;
    box.x = min_x - margin * w;
    box.y = min_y - margin * h;
    box.w = w * (1.0 + 2.0 * margin);
    box.h = h * (1.0 + 2.0 * margin);
    return box;
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<Pose> select_overlapping_instances(const Pose& primary,
                                               const BoundingBox& primary_box,
                                               const std::vector<Pose>& all,
                                               int k) {
    if (k < 1) throw std::invalid_argument("select_overlapping_instances: k must be >= 1");
    bool found = false;
    for (const auto& p : all)
        if (p.instance_id == primary.instance_id) found = true;
    if (!found)
        throw std::invalid_argument(
            "select_overlapping_instances: primary instance " +
            std::to_string(primary.instance_id) + " not present in annotation set");

    struct Entry {
        double distance;
        std::int64_t id;
        const Pose* pose;
    };
    std::vector<Entry> others;
    for (const auto& p : all) {
        if (p.instance_id == primary.instance_id) continue;
        if (count_keypoints_in_box(p, primary_box) < k) continue;
        others.push_back({center_distance(pose_bounding_box(p), primary_box), p.instance_id, &p});
    }
    std::sort(others.begin(), others.end(), [](const Entry& a, const Entry& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.id < b.id;
    });

    std::vector<Pose> out;
    out.reserve(others.size() + 1);
    out.push_back(primary);
    for (const auto& e : others) out.push_back(*e.pose);
    return out;
}

double compute_oks(const Pose& gt, const Pose& pred, double scale_sq,
                   std::span<const double> kappas) {
    if (scale_sq <= 0.0) throw std::invalid_argument("compute_oks: scale_sq must be > 0");
    if (gt.keypoints.size() != pred.keypoints.size() || gt.keypoints.size() != kappas.size())
        throw std::invalid_argument("compute_oks: keypoint/kappa count mismatch");
    double sum = 0.0;
    int labeled = 0;
    for (std::size_t i = 0; i < gt.keypoints.size(); ++i) {
        const auto& g = gt.keypoints[i];
        if (!g.labeled()) continue;
        ++labeled;
        const double dx = g.x - pred.keypoints[i].x;
        const double dy = g.y - pred.keypoints[i].y;
        const double d2 = dx * dx + dy * dy;
        sum += std::exp(-d2 / (2.0 * scale_sq * kappas[i] * kappas[i]));
    }
    if (labeled == 0)
        throw std::invalid_argument("compute_oks: gt pose has no labeled keypoints, OKS undefined");
    return sum / labeled;
}

CropTransform make_crop_transform(const BoundingBox& box, int target_h,
                                  int target_w, double margin) {
    if (!box.valid()) throw std::invalid_argument("make_crop_transform: degenerate box");
    if (target_h <= 0 || target_w <= 0)
        throw std::invalid_argument("make_crop_transform: target size must be positive");

    BoundingBox src;
    src.x = box.x - margin * box.w;
    src.y = box.y - margin * box.h;
    src.w = box.w * (1.0 + 2.0 * margin);
    src.h = box.h * (1.0 + 2.0 * margin);

    // Pad the shorter side so source and target aspect ratios agree.
    const double target_aspect = static_cast<double>(target_w) / target_h;
    const double src_aspect = src.w / src.h;
    if (src_aspect < target_aspect) {
        const double new_w = src.h * target_aspect;
        src.x -= 0.5 * (new_w - src.w);
        src.w = new_w;
    } else if (src_aspect > target_aspect) {
        const double new_h = src.w / target_aspect;
        src.y -= 0.5 * (new_h - src.h);
        src.h = new_h;
    }

    CropTransform t;
    t.source_box = src;
    t.target_h = target_h;
    t.target_w = target_w;
    t.scale_x = target_w / src.w;
    t.scale_y = target_h / src.h;
    t.offset_x = src.x;
    t.offset_y = src.y;
    return t;
}

}  // namespace mipose
