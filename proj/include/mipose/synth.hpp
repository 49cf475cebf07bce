#pragma once

// Procedural multi-person scene generator and dataset plumbing. Scenes are
// grayscale stick figures (head disk + limb capsules) with five labeled
// keypoints each; overlap is controlled by targeting a pairwise bounding-box
// IoU, and draw order decides who occludes whom. Annotations stay complete
// under occlusion, so occlusion difficulty comes from the pixels, not from
// missing labels.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mipose/assign.hpp"
#include "mipose/geometry.hpp"
#include "mipose/io/image.hpp"

namespace mipose {

inline constexpr int kKeypointCount = 5;
inline const std::array<const char*, kKeypointCount> kKeypointNames = {
    "head", "left_hand", "right_hand", "left_foot", "right_foot"};
/// Visualization skeleton: limbs hang off the head hub.
inline const std::array<std::array<int, 2>, 4> kSkeletonEdges = {
    {{0, 1}, {0, 2}, {0, 3}, {0, 4}}};

/// Margin (per side, fraction of extent) of the annotated ground-truth box
/// around the tight keypoint hull.
inline constexpr double kBoxMargin = 0.1;
/// Extra context added when cropping a box for the network.
inline constexpr double kCropMargin = 0.125;
/// A neighbour joins a crop's supervision when at least this many of its
/// keypoints land inside the crop rectangle.
inline constexpr int kOverlapK = 3;

struct SceneSpec {
    int image_size = 96;
    int instance_count = 1;  // 1..3
    double iou_min = 0.0;    // target pairwise box IoU range (consecutive
    double iou_max = 0.0;    // instances); ignored for single-person scenes
    double scale_min = 0.85;  // per-instance figure scale range
    double scale_max = 1.15;

    void validate() const;
};

struct Scene {
    ImageU8 image;  // grayscale
    std::vector<Pose> poses;
    std::vector<BoundingBox> boxes;  // annotated gt box per pose
};

/// Deterministic in (spec, seed). Instances are placed by bisecting the
/// center offset until the measured box IoU hits the sampled target
/// (tolerance 0.02); unplaceable specs raise after bounded retries.
Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// One slice of the difficulty mix: `fraction` of each split's scenes get
/// this instance count and IoU range.
struct MixComponent {
    double fraction = 0.0;
    int instance_count = 1;
    double iou_min = 0.0;
    double iou_max = 0.0;
};

struct DatasetConfig {
    int image_size = 96;
    double scale_min = 0.85;
    double scale_max = 1.15;
    std::vector<std::pair<std::string, int>> split_counts;  // (split, scenes)
    std::vector<MixComponent> mix;                          // fractions sum to 1
    bool inline_images = false;  // base64 in the manifest instead of PNGs

    /// Half single-person, half two-person at heavy overlap.
    static DatasetConfig defaults(int train_scenes = 4000, int val_scenes = 500,
                                  int test_scenes = 500);
    void validate() const;
};

struct ManifestRecord {
    std::uint64_t image_id = 0;
    std::string split;
    std::string image_file;  // relative to the manifest, empty when inline
    int image_h = 0;         // inline payload dimensions
    int image_w = 0;
    std::string image_base64;  // raw grayscale bytes, row-major
    std::vector<Pose> poses;
    std::vector<BoundingBox> boxes;
};

struct DatasetManifest {
    int keypoints = kKeypointCount;
    std::uint64_t seed = 0;
    int image_size = 96;
    std::vector<ManifestRecord> records;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
};

/// Generate every split into out_dir (manifest.json, stats.csv, images/).
/// Scene seeds derive from (seed, global scene index), so the result is
/// byte-reproducible and independent of generation order.
DatasetManifest make_dataset(const DatasetConfig& cfg, std::uint64_t seed,
                             const std::string& out_dir);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

enum class Difficulty { single, two_moderate, two_heavy, multi };
const char* difficulty_name(Difficulty d);
/// Classified from the record's annotated boxes; two-person scenes split at
/// box IoU 0.4.
Difficulty scene_difficulty(const ManifestRecord& rec);

/// Crop/target geometry shared by training, evaluation and statistics.
struct SampleParams {
    int input_h = 64;
    int input_w = 64;
    int heatmap_h = 16;
    int heatmap_w = 16;
    int n_slots = 2;
    int overlap_k = kOverlapK;
    ResidualMode residual_mode = ResidualMode::duplicate;
};

/// Instances qualifying for the crop of `rec.boxes[pose_idx]` under the
/// k-keypoint rule (the primary included, so the minimum is 1).
int count_instances_in_crop(const ManifestRecord& rec, int pose_idx,
                            const SampleParams& p);

/// Fraction of (image, primary box) pairs per qualifying-instance count
/// (counts of 3 or more are binned together as 3).
std::map<int, double> instance_histogram(const DatasetManifest& m,
                                         const std::string& split,
                                         const SampleParams& p);

/// CSV with columns split,instances_per_box,fraction.
void write_stats_csv(const std::string& path, const DatasetManifest& m,
                     const SampleParams& p);

/// Manifest plus decoded images, indexed alongside records.
struct LoadedDataset {
    DatasetManifest manifest;
    std::vector<ImageU8> images;

    static LoadedDataset load(const std::string& manifest_path);
    static LoadedDataset from_memory(DatasetManifest m, std::vector<ImageU8> imgs);
};

/// Lazily renders one TrainingSample per (image, primary instance) pair of a
/// split. Rendering on demand keeps memory at scene resolution.
class SampleSource {
public:
    SampleSource(const LoadedDataset& data, SampleParams params, std::string split);

    std::size_t size() const { return index_.size(); }
    TrainingSample get(std::size_t i) const;

    /// Manifest coordinates of sample i (record index, pose index).
    std::pair<int, int> location(std::size_t i) const;

private:
    const LoadedDataset* data_;
    SampleParams params_;
    std::vector<std::pair<int, int>> index_;
};

}  // namespace mipose
