#pragma once

// Keypoint <-> Gaussian heatmap codec. A pose becomes K single-channel maps
// (one unnormalized Gaussian per labeled keypoint, amplitude 1.0); decoding
// recovers scored keypoints via argmax with quarter-pixel refinement.
//
// All coordinates at this layer are in heatmap pixels: callers map image or
// crop coordinates into the heatmap grid before encoding (see
// make_crop_transform with the heatmap resolution as target).

#include <cstdint>
#include <vector>

#include "mipose/geometry.hpp"
#include "mipose/selector.hpp"

namespace mipose {

/// Default Gaussian std in heatmap pixels.
inline constexpr double kHeatmapSigma = 2.0;
/// Input-to-heatmap resolution divisor (64x64 crop -> 16x16 maps).
inline constexpr int kHeatmapStride = 4;
/// Decoded keypoints scoring below this are treated as absent.
inline constexpr double kKeypointScoreFloor = 0.05;

/// K channels of H'xW' maps, stored row-major HWC:
/// data[(y*width + x)*channels + c].
struct HeatmapSet {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    HeatmapSet() = default;
    HeatmapSet(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, 0.0f) {}

    float& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

struct ScoredKeypoint {
    double x = 0.0;
    double y = 0.0;
    double score = 0.0;
};

/// One decoded prediction: per-keypoint locations and confidences plus the
/// selector and source box that produced it.
struct ScoredPose {
    std::vector<ScoredKeypoint> keypoints;
    double aggregate_score = 0.0;
    InstanceSelector selector_used = InstanceSelector::hard(0);
    BoundingBox source_box;

    /// Convert to a Pose, marking keypoints below the score floor unlabeled.
    Pose to_pose() const;
};

/// Render each labeled, in-bounds keypoint as a Gaussian of std `sigma`
/// centered at its (sub-pixel) location, amplitude 1.0. Unlabeled keypoints
/// and keypoints whose nearest grid cell falls outside the map give an
/// all-zero channel.
HeatmapSet encode_heatmaps(const Pose& pose, int height, int width,
                           double sigma = kHeatmapSigma);

/// Argmax per channel, refined a quarter pixel toward the larger adjacent
/// neighbor along each axis (missing border neighbors count as zero).
/// Score is the peak value clamped to [0,1]; an all-zero channel decodes to
/// (0,0) with score 0. aggregate_score averages scores at or above the floor.
ScoredPose decode_heatmaps(const HeatmapSet& h);

struct HeatmapLoss {
    double value = 0.0;
    /// False when every channel weight was zero (no supervision signal).
    bool supervised = true;
};

/// Mean squared difference over the weighted channels (weights in {0,1},
/// one per keypoint); unweighted channels are excluded from the mean.
HeatmapLoss mse_loss(const HeatmapSet& pred, const HeatmapSet& target,
                     const std::vector<double>& weights);

/// One channel as 8-bit grayscale (values clamped to [0,1], scaled by 255),
/// row-major, for PGM dumps and debugging.
std::vector<std::uint8_t> channel_to_gray(const HeatmapSet& h, int channel);

}  // namespace mipose
