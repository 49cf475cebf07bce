#pragma once

// Ground-truth assignment for multi-instance training: each crop gets N
// target heatmap sets, slot 0 the box owner and subsequent slots the nearest
// qualifying neighbours; leftover slots repeat slot 0 so that every
// prediction head is supervised even for single-person crops.

#include <cstdint>
#include <vector>

#include "mipose/geometry.hpp"
#include "mipose/heatmap.hpp"

namespace mipose {

/// How slots beyond the number of genuine instances are supervised:
/// `duplicate` repeats the primary target (default); `dont_care` zeroes the
/// slot's weights so those heads receive no gradient (ablation only — it
/// trades misses for spurious detections).
enum class ResidualMode { duplicate, dont_care };

struct TrainingSample {
    // Crop pixels, HWC in [0,1] with channels = 3; filled by the data layer.
    int input_height = 0;
    int input_width = 0;
    int input_channels = 0;
    std::vector<float> input_image;

    std::vector<HeatmapSet> targets;               // exactly N entries
    std::vector<std::vector<double>> target_weights;  // N x K in {0,1}
    int n_true = 0;  // genuine instances assigned, min(n, N)

    // Provenance, carried through for dumps and evaluation.
    std::uint64_t image_id = 0;
    std::int64_t primary_instance_id = -1;
    BoundingBox source_box;
};

/// Build the N distance-ordered targets for the crop of `primary`'s box.
/// Qualification uses the k-shared-keypoint rule evaluated in the crop frame
/// (neighbours count labeled keypoints landing inside the crop rectangle).
/// Slot 0 is always the primary; slots past min(n, N)-1 follow `mode`.
/// The input image is left empty for the caller to fill.
TrainingSample build_targets(const CropTransform& crop, const Pose& primary,
                             const std::vector<Pose>& all_poses, int n_slots,
                             int k_threshold, int heatmap_height,
                             int heatmap_width,
                             ResidualMode mode = ResidualMode::duplicate);

/// Average of the per-slot weighted MSE losses: (1/N) sum_i
/// mse_loss(predictions[i], targets[i], target_weights[i]). Slots whose
/// weights are all zero contribute 0.
double multi_instance_loss(const std::vector<HeatmapSet>& predictions,
                           const TrainingSample& sample);

}  // namespace mipose
