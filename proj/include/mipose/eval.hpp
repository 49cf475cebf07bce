#pragma once

// Inference-time merging and evaluation: selector sweeps per box, OKS-based
// non-maximum suppression over the pooled poses, and greedy AP/AR scoring
// against the manifest annotations.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mipose/heatmap.hpp"
#include "mipose/model.hpp"
#include "mipose/synth.hpp"

namespace mipose {

/// Per-keypoint OKS falloff. One mid-range value for every joint; the
/// synthetic skeleton has no per-joint annotation-noise statistics to
/// differentiate them.
inline constexpr double kUniformKappa = 0.08;
inline constexpr double kNmsThresholdDefault = 0.90;

std::vector<double> uniform_kappas(int count = kKeypointCount);

/// Content hash of coordinates and scores; the deterministic tie-break for
/// every score sort.
std::uint64_t pose_hash(const ScoredPose& p);

/// OKS between two predictions for suppression purposes: `a`'s confident
/// keypoints act as the reference set and the scale is the mean of the two
/// source-box areas. 0 when either side has nothing confident.
double suppression_oks(const ScoredPose& a, const ScoredPose& b,
                       const std::vector<double>& kappas);

/// Greedy: keep the best-scoring pose, drop everything within `threshold`
/// OKS of a kept pose, repeat. The top-scoring input always survives.
std::vector<ScoredPose> oks_nms(std::vector<ScoredPose> poses, double threshold,
                                const std::vector<double>& kappas);

/// Full multi-instance pipeline for one image: crop each box, run the
/// selector sweep off a single stem evaluation, decode, map poses back to
/// image coordinates, and merge everything with OKS-NMS.
std::vector<ScoredPose> infer_image(const Model<float>& model, const ImageU8& image,
                                    const std::vector<BoundingBox>& boxes,
                                    double nms_threshold,
                                    const std::vector<double>& kappas);

struct Prediction {
    std::uint64_t image_id = 0;
    ScoredPose pose;
};

nlohmann::json predictions_to_json(const std::vector<Prediction>& preds);
std::vector<Prediction> predictions_from_json(const nlohmann::json& j);
void save_predictions(const std::vector<Prediction>& preds, const std::string& path);
std::vector<Prediction> load_predictions(const std::string& path);

struct MetricBlock {
    double ap = 0.0;    // mean over OKS thresholds 0.50:0.05:0.95
    double ap50 = 0.0;
    double ap75 = 0.0;
    double ar = 0.0;    // mean final recall over the same thresholds
    int images = 0;
    int gt_instances = 0;
};

struct EvalReport {
    MetricBlock overall;
    // One block per present scene difficulty, in fixed difficulty order.
    std::vector<std::pair<std::string, MetricBlock>> per_difficulty;
    std::map<int, double> instance_hist;  // annotation-side crowding histogram
    double ms_per_image = 0.0;            // filled by callers that time inference

    nlohmann::json to_json() const;
    std::string format_table(bool include_difficulty) const;
};

/// COCO-style scoring: per image and OKS threshold, predictions greedily
/// match the unmatched ground truth of highest OKS (>= threshold); AP uses
/// 101-point precision-recall interpolation. Predictions must reference
/// image_ids of the given split.
EvalReport evaluate(const std::vector<Prediction>& preds,
                    const DatasetManifest& manifest, const std::string& split,
                    const std::vector<double>& kappas);

/// infer_image over every record of a split, with the annotated boxes
/// standing in for a detector. Parallel over images, deterministic output
/// order. Optionally reports the median per-image wall time.
std::vector<Prediction> predict_split(const Model<float>& model,
                                      const LoadedDataset& data,
                                      const std::string& split, double nms_threshold,
                                      const std::vector<double>& kappas,
                                      int workers = 0,
                                      double* median_ms_per_image = nullptr);

}  // namespace mipose
