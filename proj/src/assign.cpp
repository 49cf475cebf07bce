#include "mipose/assign.hpp"

#include <stdexcept>
#include <string>

namespace mipose {

TrainingSample build_targets(const CropTransform& crop, const Pose& primary,
                             const std::vector<Pose>& all_poses, int n_slots,
                             int k_threshold, int heatmap_height,
                             int heatmap_width, ResidualMode mode) {
    if (n_slots < 1)
        throw std::invalid_argument("build_targets: n_slots must be >= 1");
    if (crop.target_h <= 0 || crop.target_w <= 0)
        throw std::invalid_argument("build_targets: crop transform has no target size");

    const std::size_t k = primary.keypoints.size();
    for (const auto& p : all_poses)
        if (p.keypoints.size() != k)
            throw std::invalid_argument("build_targets: inconsistent keypoint counts");

    // Qualification and ordering both run in the crop frame. The membership
    // rectangle is the primary's own box, not the (margin-padded) crop: the
    // box is re-derived from the transformed pose, which reproduces the
    // original box exactly because the crop scale is uniform and the box
    // margin is relative to the keypoint hull.
    Pose primary_crop = crop.apply(primary);
    std::vector<Pose> all_crop;
    all_crop.reserve(all_poses.size());
    for (const auto& p : all_poses) all_crop.push_back(crop.apply(p));
    const BoundingBox primary_box = pose_bounding_box(primary_crop);
    std::vector<Pose> ordered =
        select_overlapping_instances(primary_crop, primary_box, all_crop, k_threshold);

    TrainingSample sample;
    sample.primary_instance_id = primary.instance_id;
    sample.n_true = std::min<int>(static_cast<int>(ordered.size()), n_slots);
    sample.targets.reserve(static_cast<std::size_t>(n_slots));
    sample.target_weights.reserve(static_cast<std::size_t>(n_slots));

    const double to_hm_x = static_cast<double>(heatmap_width) / crop.target_w;
    const double to_hm_y = static_cast<double>(heatmap_height) / crop.target_h;
    for (int i = 0; i < sample.n_true; ++i) {
        Pose hm_pose = ordered[static_cast<std::size_t>(i)];
        for (auto& kp : hm_pose.keypoints) {
            kp.x *= to_hm_x;
            kp.y *= to_hm_y;
        }
        sample.targets.push_back(
            encode_heatmaps(hm_pose, heatmap_height, heatmap_width));
        std::vector<double> w(k, 0.0);
        for (std::size_t c = 0; c < k; ++c)
            if (hm_pose.keypoints[c].labeled()) w[c] = 1.0;
        sample.target_weights.push_back(std::move(w));
    }

    for (int i = sample.n_true; i < n_slots; ++i) {
        if (mode == ResidualMode::duplicate) {
            sample.targets.push_back(sample.targets.front());
            sample.target_weights.push_back(sample.target_weights.front());
        } else {
            sample.targets.emplace_back(heatmap_height, heatmap_width,
                                        static_cast<int>(k));
            sample.target_weights.emplace_back(k, 0.0);
        }
    }
    return sample;
}

double multi_instance_loss(const std::vector<HeatmapSet>& predictions,
                           const TrainingSample& sample) {
    if (predictions.size() != sample.targets.size())
        throw std::invalid_argument(
            "multi_instance_loss: prediction count " +
            std::to_string(predictions.size()) + " != target count " +
            std::to_string(sample.targets.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        sum += mse_loss(predictions[i], sample.targets[i], sample.target_weights[i]).value;
    return sum / static_cast<double>(predictions.size());
}

}  // namespace mipose
