#include "mipose/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mipose {

Pose ScoredPose::to_pose() const {
    Pose p;
    p.keypoints.reserve(keypoints.size());
    for (const auto& kp : keypoints) {
        Keypoint out;
        out.x = kp.x;
        out.y = kp.y;
        out.visibility = kp.score >= kKeypointScoreFloor ? Visibility::labeled
                                                         : Visibility::unlabeled;
        p.keypoints.push_back(out);
    }
    return p;
}

HeatmapSet encode_heatmaps(const Pose& pose, int height, int width, double sigma) {
    if (height < 1 || width < 1)
        throw std::invalid_argument("encode_heatmaps: resolution must be positive");
    if (!(sigma > 0.0))
        throw std::invalid_argument("encode_heatmaps: sigma must be > 0");

    const int k = static_cast<int>(pose.keypoints.size());
    HeatmapSet h(height, width, k);
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);

    for (int c = 0; c < k; ++c) {
        const Keypoint& kp = pose.keypoints[static_cast<std::size_t>(c)];
        if (!kp.labeled()) continue;
        const long cx = std::lround(kp.x);
        const long cy = std::lround(kp.y);
        if (cx < 0 || cx >= width || cy < 0 || cy >= height) continue;

        // The Gaussian is negligible past ~4 sigma; restrict the stamp window.
        const int radius = static_cast<int>(std::ceil(4.0 * sigma)) + 1;
        const int y0 = std::max(0, static_cast<int>(cy) - radius);
        const int y1 = std::min(height - 1, static_cast<int>(cy) + radius);
        const int x0 = std::max(0, static_cast<int>(cx) - radius);
        const int x1 = std::min(width - 1, static_cast<int>(cx) + radius);
        for (int y = y0; y <= y1; ++y) {
            const double dy = y - kp.y;
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - kp.x;
                const double v = std::exp(-(dx * dx + dy * dy) * inv_two_sigma_sq);
                h.at(y, x, c) = static_cast<float>(v);
            }
        }
    }
    return h;
}

namespace {

// Quarter-pixel shift toward the larger neighbor along one axis; neighbors
// outside the map count as zero, so border peaks shift inward.
double refine_axis(double lo_neighbor, double hi_neighbor) {
    if (hi_neighbor > lo_neighbor) return 0.25;
    if (lo_neighbor > hi_neighbor) return -0.25;
    return 0.0;
}

}  // namespace

ScoredPose decode_heatmaps(const HeatmapSet& h) {
    ScoredPose out;
    out.keypoints.resize(static_cast<std::size_t>(h.channels));

    double score_sum = 0.0;
    int score_count = 0;
    for (int c = 0; c < h.channels; ++c) {
        int best_x = 0, best_y = 0;
        float best_v = h.at(0, 0, c);
        for (int y = 0; y < h.height; ++y)
            for (int x = 0; x < h.width; ++x)
                if (h.at(y, x, c) > best_v) {
                    best_v = h.at(y, x, c);
                    best_x = x;
                    best_y = y;
                }

        ScoredKeypoint& kp = out.keypoints[static_cast<std::size_t>(c)];
        if (!(best_v > 0.0f)) {
            kp = {0.0, 0.0, 0.0};
            continue;
        }

        const double left = best_x > 0 ? h.at(best_y, best_x - 1, c) : 0.0;
        const double right = best_x < h.width - 1 ? h.at(best_y, best_x + 1, c) : 0.0;
        const double up = best_y > 0 ? h.at(best_y - 1, best_x, c) : 0.0;
        const double down = best_y < h.height - 1 ? h.at(best_y + 1, best_x, c) : 0.0;

        kp.x = std::clamp(best_x + refine_axis(left, right), 0.0,
                          static_cast<double>(h.width - 1));
        kp.y = std::clamp(best_y + refine_axis(up, down), 0.0,
                          static_cast<double>(h.height - 1));
        kp.score = std::clamp(static_cast<double>(best_v), 0.0, 1.0);
        if (kp.score >= kKeypointScoreFloor) {
            score_sum += kp.score;
            ++score_count;
        }
    }
    out.aggregate_score = score_count > 0 ? score_sum / score_count : 0.0;
    return out;
}

HeatmapLoss mse_loss(const HeatmapSet& pred, const HeatmapSet& target,
                     const std::vector<double>& weights) {
    if (pred.height != target.height || pred.width != target.width ||
        pred.channels != target.channels)
        throw std::invalid_argument("mse_loss: shape mismatch");
    if (static_cast<int>(weights.size()) != pred.channels)
        throw std::invalid_argument("mse_loss: weights size must equal channel count");

    int active = 0;
    for (double w : weights) {
        if (w != 0.0 && w != 1.0)
            throw std::invalid_argument("mse_loss: weights must be 0 or 1");
        if (w == 1.0) ++active;
    }
    if (active == 0) return {0.0, false};

    double sum = 0.0;
    for (int c = 0; c < pred.channels; ++c) {
        if (weights[static_cast<std::size_t>(c)] == 0.0) continue;
        for (int y = 0; y < pred.height; ++y)
            for (int x = 0; x < pred.width; ++x) {
                const double d = static_cast<double>(pred.at(y, x, c)) -
                                 static_cast<double>(target.at(y, x, c));
                sum += d * d;
            }
    }
    const double pixels = static_cast<double>(pred.height) * pred.width;
    return {sum / (pixels * active), true};
}

std::vector<std::uint8_t> channel_to_gray(const HeatmapSet& h, int channel) {
    if (channel < 0 || channel >= h.channels)
        throw std::out_of_range("channel_to_gray: channel out of range");
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(h.height) * h.width);
    for (int y = 0; y < h.height; ++y)
        for (int x = 0; x < h.width; ++x) {
            const double v = std::clamp(static_cast<double>(h.at(y, x, channel)), 0.0, 1.0);
            gray[static_cast<std::size_t>(y) * h.width + x] =
                static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    return gray;
}

}  // namespace mipose
