#include "mipose/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mipose/common.hpp"

namespace fs = std::filesystem;

namespace mipose {

void SceneSpec::validate() const {
    if (image_size < 32) throw std::invalid_argument("SceneSpec: image_size too small");
    if (instance_count < 1 || instance_count > 3)
        throw std::invalid_argument("SceneSpec: instance_count must be 1..3");
    if (instance_count > 1) {
        if (!(iou_min >= 0.0 && iou_max < 1.0 && iou_min <= iou_max))
            throw std::invalid_argument("SceneSpec: IoU range must satisfy 0 <= min <= max < 1");
    }
    if (!(scale_min > 0.0 && scale_min <= scale_max))
        throw std::invalid_argument("SceneSpec: bad scale range");
}

namespace {

// A stick figure in local coordinates (origin at the pelvis, y grows down).
// Only the five extremity keypoints are annotated; the neck and pelvis are
// internal joints used for drawing.
struct Figure {
    double head_r = 0.0;
    double limb_r = 0.0;
    double neck_y = 0.0;
    Keypoint head, lhand, rhand, lfoot, rfoot;

    std::vector<Keypoint> keypoints() const { return {head, lhand, rhand, lfoot, rfoot}; }
};

Keypoint labeled_at(double x, double y) {
    return Keypoint{x, y, Visibility::labeled};
}

// Limb angles are constrained so left keypoints stay on the figure's left:
// the dataset is solvable without modeling left/right flips.
Figure sample_figure(Rng& rng, double scale, int image_size) {
    const double l = 0.62 * image_size * scale;  // nominal figure height
    Figure f;
    // Bulky proportions on purpose: at box IoU >= 0.4 the later-drawn figure
    // must erase a large share of the earlier one, otherwise every crop stays
    // unambiguous and a selector adds nothing over the plain baseline.
    f.head_r = 0.14 * l;
    f.limb_r = 0.105 * l;
    f.neck_y = -0.40 * l;
    f.head = labeled_at(0.0, f.neck_y - f.head_r - 0.03 * l);

    const double arm = 0.30 * l;
    const double a_l = rng.uniform(0.35, 1.25);  // from straight-down, radians
    const double a_r = rng.uniform(0.35, 1.25);
    f.lhand = labeled_at(-std::sin(a_l) * arm, f.neck_y + std::cos(a_l) * arm);
    f.rhand = labeled_at(std::sin(a_r) * arm, f.neck_y + std::cos(a_r) * arm);

    const double leg = 0.42 * l;
    const double g_l = rng.uniform(0.12, 0.55);
    const double g_r = rng.uniform(0.12, 0.55);
    f.lfoot = labeled_at(-std::sin(g_l) * leg, std::cos(g_l) * leg);
    f.rfoot = labeled_at(std::sin(g_r) * leg, std::cos(g_r) * leg);
    return f;
}

struct Extent {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

// Drawn extent (ink, not just keypoints) in local coordinates.
Extent draw_extent(const Figure& f) {
    Extent e;
    e.x0 = std::min({f.head.x - f.head_r, f.lhand.x - f.limb_r, f.lfoot.x - f.limb_r});
    e.x1 = std::max({f.head.x + f.head_r, f.rhand.x + f.limb_r, f.rfoot.x + f.limb_r});
    e.y0 = f.head.y - f.head_r;
    e.y1 = std::max(f.lfoot.y, f.rfoot.y) + f.limb_r;
    return e;
}

Pose place_pose(const Figure& f, double cx, double cy, std::int64_t id) {
    Pose p;
    p.instance_id = id;
    for (const Keypoint& k : f.keypoints())
        p.keypoints.push_back(labeled_at(k.x + cx, k.y + cy));
    return p;
}

bool fits(const Extent& e, double cx, double cy, int size) {
    return e.x0 + cx >= 1.0 && e.x1 + cx <= size - 1.0 && e.y0 + cy >= 1.0 &&
           e.y1 + cy <= size - 1.0;
}

double point_segment_dist(double px, double py, double x0, double y0, double x1,
                          double y1) {
    const double dx = x1 - x0, dy = y1 - y0;
    const double len_sq = dx * dx + dy * dy;
    double t = len_sq > 0.0 ? ((px - x0) * dx + (py - y0) * dy) / len_sq : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = px - (x0 + t * dx);
    const double ey = py - (y0 + t * dy);
    return std::sqrt(ex * ex + ey * ey);
}

// Paint a soft-edged capsule (thick segment); coverage blends over whatever
// is already there, so later figures occlude earlier ones.
void draw_capsule(ImageU8& img, double x0, double y0, double x1, double y1,
                  double radius, std::uint8_t tone) {
    const int cx0 = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - radius - 1)));
    const int cx1 = std::min(img.width - 1,
                             static_cast<int>(std::ceil(std::max(x0, x1) + radius + 1)));
    const int cy0 = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - radius - 1)));
    const int cy1 = std::min(img.height - 1,
                             static_cast<int>(std::ceil(std::max(y0, y1) + radius + 1)));
    for (int y = cy0; y <= cy1; ++y)
        for (int x = cx0; x <= cx1; ++x) {
            const double d =
                point_segment_dist(x + 0.5, y + 0.5, x0, y0, x1, y1);
            const double cov = std::clamp(radius + 0.5 - d, 0.0, 1.0);
            if (cov <= 0.0) continue;
            std::uint8_t& px = img.at(y, x, 0);
            px = static_cast<std::uint8_t>(
                std::lround((1.0 - cov) * px + cov * tone));
        }
}

void draw_figure(ImageU8& img, const Figure& f, double cx, double cy,
                 std::uint8_t tone) {
    const double nx = cx, ny = cy + f.neck_y;
    draw_capsule(img, nx, ny, cx, cy, f.limb_r * 1.65, tone);  // torso
    draw_capsule(img, nx, ny, f.lhand.x + cx, f.lhand.y + cy, f.limb_r, tone);
    draw_capsule(img, nx, ny, f.rhand.x + cx, f.rhand.y + cy, f.limb_r, tone);
    draw_capsule(img, cx, cy, f.lfoot.x + cx, f.lfoot.y + cy, f.limb_r, tone);
    draw_capsule(img, cx, cy, f.rfoot.x + cx, f.rfoot.y + cy, f.limb_r, tone);
    draw_capsule(img, f.head.x + cx, f.head.y + cy, f.head.x + cx, f.head.y + cy,
                 f.head_r, tone);  // head disk
}

}  // namespace

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(mix_seed(seed, 0xA11CE));
    const int size = spec.image_size;

    // Distinct mid-to-light tones on a dark noisy background; shuffled so
    // the occluder is not always the brighter figure.
    std::vector<int> palette = {100, 140, 180, 220};
    rng.shuffle(palette.begin(), palette.end());

    std::vector<Figure> figures;
    std::vector<double> cxs, cys;

    // First figure anywhere it fully fits.
    figures.push_back(sample_figure(rng, rng.uniform(spec.scale_min, spec.scale_max), size));
    {
        const Extent e = draw_extent(figures[0]);
        const double lo_x = 1.0 - e.x0, hi_x = size - 1.0 - e.x1;
        const double lo_y = 1.0 - e.y0, hi_y = size - 1.0 - e.y1;
        if (lo_x > hi_x || lo_y > hi_y)
            throw std::runtime_error("generate_scene: figure does not fit the image");
        cxs.push_back(rng.uniform(lo_x, hi_x));
        cys.push_back(rng.uniform(lo_y, hi_y));
    }

    // Each further figure targets a box IoU against its predecessor: pick a
    // direction, then bisect the center distance (IoU is monotone in it).
    for (int i = 1; i < spec.instance_count; ++i) {
        const BoundingBox prev_box =
            pose_bounding_box(place_pose(figures[i - 1], cxs[i - 1], cys[i - 1],
                                         i - 1),
                              kBoxMargin);
        bool placed = false;
        constexpr int kMaxAttempts = 120;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            Figure fig =
                sample_figure(rng, rng.uniform(spec.scale_min, spec.scale_max), size);
            const double target = rng.uniform(spec.iou_min, spec.iou_max);
            const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            const double dir_x = std::cos(angle), dir_y = std::sin(angle);

            auto iou_at = [&](double d) {
                const Pose p = place_pose(fig, cxs[i - 1] + d * dir_x,
                                          cys[i - 1] + d * dir_y, i);
                return box_iou(pose_bounding_box(p, kBoxMargin), prev_box);
            };
            if (iou_at(0.0) < target) continue;  // concentric IoU already below target
            double lo = 0.0, hi = size / 8.0;
            while (iou_at(hi) > target && hi < 4.0 * size) hi *= 2.0;
            for (int it = 0; it < 48; ++it) {
                const double mid = 0.5 * (lo + hi);
                (iou_at(mid) > target ? lo : hi) = mid;
            }
            const double d = 0.5 * (lo + hi);
            if (std::abs(iou_at(d) - target) > 0.02) continue;

            const double cx = cxs[i - 1] + d * dir_x;
            const double cy = cys[i - 1] + d * dir_y;
            if (!fits(draw_extent(fig), cx, cy, size)) continue;
            figures.push_back(fig);
            cxs.push_back(cx);
            cys.push_back(cy);
            placed = true;
        }
        if (!placed)
            throw std::runtime_error(
                "generate_scene: could not reach the requested IoU range in bounds");
    }

    Scene scene;
    scene.image = ImageU8(size, size, 1);
    Rng bg(mix_seed(seed, 0xB6));
    for (auto& px : scene.image.data)
        px = static_cast<std::uint8_t>(18 + bg.uniform_int(0, 12));

    for (int i = 0; i < spec.instance_count; ++i) {
        const int tone = palette[static_cast<std::size_t>(i) % palette.size()] +
                         rng.uniform_int(-10, 10);
        draw_figure(scene.image, figures[static_cast<std::size_t>(i)],
                    cxs[static_cast<std::size_t>(i)], cys[static_cast<std::size_t>(i)],
                    static_cast<std::uint8_t>(std::clamp(tone, 0, 255)));
    }
    for (int i = 0; i < spec.instance_count; ++i) {
        scene.poses.push_back(place_pose(figures[static_cast<std::size_t>(i)],
                                         cxs[static_cast<std::size_t>(i)],
                                         cys[static_cast<std::size_t>(i)], i));
        scene.boxes.push_back(pose_bounding_box(scene.poses.back(), kBoxMargin));
    }
    return scene;
}

DatasetConfig DatasetConfig::defaults(int train_scenes, int val_scenes, int test_scenes) {
    DatasetConfig c;
    c.split_counts = {{"train", train_scenes}, {"val", val_scenes}, {"test", test_scenes}};
    c.mix = {{0.5, 1, 0.0, 0.0}, {0.5, 2, 0.4, 0.7}};
    return c;
}

void DatasetConfig::validate() const {
    if (split_counts.empty())
        throw std::invalid_argument("DatasetConfig: no splits requested");
    for (const auto& [name, count] : split_counts)
        if (name.empty() || count < 0)
            throw std::invalid_argument("DatasetConfig: bad split '" + name + "'");
    if (mix.empty()) throw std::invalid_argument("DatasetConfig: empty difficulty mix");
    double total = 0.0;
    for (const auto& m : mix) {
        if (m.fraction < 0.0)
            throw std::invalid_argument("DatasetConfig: negative mix fraction");
        SceneSpec spec;
        spec.image_size = image_size;
        spec.instance_count = m.instance_count;
        spec.iou_min = m.iou_min;
        spec.iou_max = m.iou_max;
        spec.scale_min = scale_min;
        spec.scale_max = scale_max;
        spec.validate();
        total += m.fraction;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("DatasetConfig: mix fractions must sum to 1");
}

namespace {

nlohmann::json pose_to_json(const Pose& p, const BoundingBox& b) {
    nlohmann::json kps = nlohmann::json::array();
    for (const auto& k : p.keypoints)
        kps.push_back({k.x, k.y, k.labeled() ? 1 : 0});
    return {{"instance_id", p.instance_id},
            {"keypoints", std::move(kps)},
            {"bbox", {b.x, b.y, b.w, b.h}}};
}

void pose_from_json(const nlohmann::json& j, int expected_k, Pose& p, BoundingBox& b) {
    p.instance_id = j.at("instance_id").get<std::int64_t>();
    const auto& kps = j.at("keypoints");
    if (static_cast<int>(kps.size()) != expected_k)
        throw std::runtime_error("manifest: pose has " + std::to_string(kps.size()) +
                                 " keypoints, expected " + std::to_string(expected_k));
    for (const auto& kj : kps) {
        Keypoint k;
        k.x = kj.at(0).get<double>();
        k.y = kj.at(1).get<double>();
        k.visibility =
            kj.at(2).get<int>() != 0 ? Visibility::labeled : Visibility::unlabeled;
        p.keypoints.push_back(k);
    }
    const auto& bj = j.at("bbox");
    b = {bj.at(0).get<double>(), bj.at(1).get<double>(), bj.at(2).get<double>(),
         bj.at(3).get<double>()};
}

}  // namespace

nlohmann::json DatasetManifest::to_json() const {
    nlohmann::json names = nlohmann::json::array();
    for (const char* n : kKeypointNames) names.push_back(n);
    nlohmann::json skeleton = nlohmann::json::array();
    for (const auto& e : kSkeletonEdges) skeleton.push_back({e[0], e[1]});

    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json poses = nlohmann::json::array();
        for (std::size_t i = 0; i < r.poses.size(); ++i)
            poses.push_back(pose_to_json(r.poses[i], r.boxes[i]));
        nlohmann::json rec = {{"image_id", r.image_id},
                              {"split", r.split},
                              {"poses", std::move(poses)}};
        if (!r.image_file.empty()) {
            rec["image_file"] = r.image_file;
        } else {
            rec["image_inline"] = {{"height", r.image_h},
                                   {"width", r.image_w},
                                   {"base64", r.image_base64}};
        }
        recs.push_back(std::move(rec));
    }
    return {{"config",
             {{"keypoints", keypoints},
              {"keypoint_names", std::move(names)},
              {"skeleton", std::move(skeleton)},
              {"seed", seed},
              {"image_size", image_size}}},
            {"records", std::move(recs)}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    DatasetManifest m;
    const auto& cfg = j.at("config");
    m.keypoints = cfg.at("keypoints").get<int>();
    m.seed = cfg.at("seed").get<std::uint64_t>();
    m.image_size = cfg.at("image_size").get<int>();
    for (const auto& rj : j.at("records")) {
        ManifestRecord r;
        r.image_id = rj.at("image_id").get<std::uint64_t>();
        r.split = rj.at("split").get<std::string>();
        if (rj.contains("image_file")) {
            r.image_file = rj.at("image_file").get<std::string>();
        } else {
            const auto& inl = rj.at("image_inline");
            r.image_h = inl.at("height").get<int>();
            r.image_w = inl.at("width").get<int>();
            r.image_base64 = inl.at("base64").get<std::string>();
        }
        std::vector<std::int64_t> seen_ids;
        for (const auto& pj : rj.at("poses")) {
            Pose p;
            BoundingBox b;
            pose_from_json(pj, m.keypoints, p, b);
            if (std::find(seen_ids.begin(), seen_ids.end(), p.instance_id) !=
                seen_ids.end())
                throw std::runtime_error("manifest: duplicate instance_id in image " +
                                         std::to_string(r.image_id));
            seen_ids.push_back(p.instance_id);
            r.poses.push_back(std::move(p));
            r.boxes.push_back(b);
        }
        m.records.push_back(std::move(r));
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_manifest: cannot open " + path);
    out << m.to_json().dump(1) << '\n';
    if (!out) throw std::runtime_error("save_manifest: write failed for " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_manifest: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("load_manifest: " + path + ": " + e.what());
    }
    return DatasetManifest::from_json(j);
}

DatasetManifest make_dataset(const DatasetConfig& cfg, std::uint64_t seed,
                             const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    if (!cfg.inline_images) fs::create_directories(fs::path(out_dir) / "images");

    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.image_size = cfg.image_size;

    std::uint64_t global_index = 0;
    for (const auto& [split, count] : cfg.split_counts) {
        // Exact per-component quotas: floor everything, then hand remaining
        // scenes to the components with the largest fractional parts.
        std::vector<int> quota(cfg.mix.size(), 0);
        std::vector<std::pair<double, std::size_t>> frac;
        int assigned = 0;
        for (std::size_t c = 0; c < cfg.mix.size(); ++c) {
            const double want = cfg.mix[c].fraction * count;
            quota[c] = static_cast<int>(std::floor(want));
            assigned += quota[c];
            frac.push_back({want - quota[c], c});
        }
        std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (int r = 0; r < count - assigned; ++r)
            ++quota[frac[static_cast<std::size_t>(r) % frac.size()].second];

        std::vector<int> component;
        for (std::size_t c = 0; c < cfg.mix.size(); ++c)
            component.insert(component.end(), static_cast<std::size_t>(quota[c]),
                             static_cast<int>(c));
        Rng order(mix_seed(seed, fnv1a64(split) ^ 0x0DDC0FFEEull));
        order.shuffle(component.begin(), component.end());

        for (int i = 0; i < count; ++i, ++global_index) {
            const MixComponent& mc = cfg.mix[static_cast<std::size_t>(component[i])];
            SceneSpec spec;
            spec.image_size = cfg.image_size;
            spec.instance_count = mc.instance_count;
            spec.iou_min = mc.iou_min;
            spec.iou_max = mc.iou_max;
            spec.scale_min = cfg.scale_min;
            spec.scale_max = cfg.scale_max;
            Scene scene = generate_scene(spec, mix_seed(seed, global_index));

            ManifestRecord rec;
            rec.image_id = global_index;
            rec.split = split;
            rec.poses = std::move(scene.poses);
            rec.boxes = std::move(scene.boxes);
            if (cfg.inline_images) {
                rec.image_h = scene.image.height;
                rec.image_w = scene.image.width;
                rec.image_base64 = base64_encode(scene.image.data);
            } else {
                char name[32];
                std::snprintf(name, sizeof name, "images/%06llu.png",
                              static_cast<unsigned long long>(global_index));
                rec.image_file = name;
                write_png((fs::path(out_dir) / name).string(), scene.image);
            }
            manifest.records.push_back(std::move(rec));
        }
    }

    save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    write_stats_csv((fs::path(out_dir) / "stats.csv").string(), manifest, SampleParams{});
    return manifest;
}

const char* difficulty_name(Difficulty d) {
    switch (d) {
        case Difficulty::single: return "single";
        case Difficulty::two_moderate: return "two_moderate";
        case Difficulty::two_heavy: return "two_heavy";
        case Difficulty::multi: return "multi";
    }
    throw std::logic_error("difficulty_name: bad enum");
}

Difficulty scene_difficulty(const ManifestRecord& rec) {
    if (rec.poses.size() <= 1) return Difficulty::single;
    if (rec.poses.size() == 2)
        return box_iou(rec.boxes[0], rec.boxes[1]) >= 0.4 ? Difficulty::two_heavy
                                                          : Difficulty::two_moderate;
    return Difficulty::multi;
}

int count_instances_in_crop(const ManifestRecord& rec, int pose_idx,
                            const SampleParams& p) {
    // Same qualification rule as build_targets: membership in the primary's
    // own box, tested in the crop frame.
    const CropTransform crop = make_crop_transform(
        rec.boxes[static_cast<std::size_t>(pose_idx)], p.input_h, p.input_w, kCropMargin);
    Pose primary = crop.apply(rec.poses[static_cast<std::size_t>(pose_idx)]);
    std::vector<Pose> all;
    all.reserve(rec.poses.size());
    for (const auto& pose : rec.poses) all.push_back(crop.apply(pose));
    const BoundingBox primary_box = pose_bounding_box(primary);
    return static_cast<int>(
        select_overlapping_instances(primary, primary_box, all, p.overlap_k).size());
}

std::map<int, double> instance_histogram(const DatasetManifest& m,
                                         const std::string& split,
                                         const SampleParams& p) {
    std::map<int, double> hist{{1, 0.0}, {2, 0.0}, {3, 0.0}};
    int total = 0;
    for (const auto& rec : m.records) {
        if (rec.split != split) continue;
        for (int i = 0; i < static_cast<int>(rec.poses.size()); ++i) {
            const int n = std::min(count_instances_in_crop(rec, i, p), 3);
            hist[n] += 1.0;
            ++total;
        }
    }
    if (total > 0)
        for (auto& [bin, value] : hist) value /= total;
    return hist;
}

void write_stats_csv(const std::string& path, const DatasetManifest& m,
                     const SampleParams& p) {
    std::vector<std::string> splits;
    for (const auto& rec : m.records)
        if (std::find(splits.begin(), splits.end(), rec.split) == splits.end())
            splits.push_back(rec.split);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_stats_csv: cannot open " + path);
    out << "split,instances_per_box,fraction\n";
    char buf[64];
    for (const auto& split : splits) {
        const auto hist = instance_histogram(m, split, p);
        for (const auto& [bin, fraction] : hist) {
            std::snprintf(buf, sizeof buf, "%.6f", fraction);
            out << split << ',' << bin << ',' << buf << '\n';
        }
    }
    if (!out) throw std::runtime_error("write_stats_csv: write failed for " + path);
}

LoadedDataset LoadedDataset::load(const std::string& manifest_path) {
    LoadedDataset d;
    d.manifest = load_manifest(manifest_path);
    const fs::path dir = fs::path(manifest_path).parent_path();
    d.images.reserve(d.manifest.records.size());
    for (const auto& rec : d.manifest.records) {
        if (!rec.image_file.empty()) {
            d.images.push_back(read_png((dir / rec.image_file).string()));
        } else {
            ImageU8 img(rec.image_h, rec.image_w, 1);
            img.data = base64_decode(rec.image_base64);
            if (img.data.size() != static_cast<std::size_t>(rec.image_h) * rec.image_w)
                throw std::runtime_error("manifest: inline image size mismatch in image " +
                                         std::to_string(rec.image_id));
            d.images.push_back(std::move(img));
        }
    }
    return d;
}

LoadedDataset LoadedDataset::from_memory(DatasetManifest m, std::vector<ImageU8> imgs) {
    if (m.records.size() != imgs.size())
        throw std::invalid_argument("LoadedDataset: record/image count mismatch");
    LoadedDataset d;
    d.manifest = std::move(m);
    d.images = std::move(imgs);
    return d;
}

SampleSource::SampleSource(const LoadedDataset& data, SampleParams params,
                           std::string split)
    : data_(&data), params_(params) {
    for (int r = 0; r < static_cast<int>(data.manifest.records.size()); ++r) {
        const auto& rec = data.manifest.records[static_cast<std::size_t>(r)];
        if (rec.split != split) continue;
        for (int p = 0; p < static_cast<int>(rec.poses.size()); ++p)
            index_.push_back({r, p});
    }
}

std::pair<int, int> SampleSource::location(std::size_t i) const {
    if (i >= index_.size()) throw std::out_of_range("SampleSource: index out of range");
    return index_[i];
}

TrainingSample SampleSource::get(std::size_t i) const {
    const auto [r, p] = location(i);
    const ManifestRecord& rec = data_->manifest.records[static_cast<std::size_t>(r)];
    const CropTransform crop = make_crop_transform(
        rec.boxes[static_cast<std::size_t>(p)], params_.input_h, params_.input_w,
        kCropMargin);
    TrainingSample sample = build_targets(
        crop, rec.poses[static_cast<std::size_t>(p)], rec.poses, params_.n_slots,
        params_.overlap_k, params_.heatmap_h, params_.heatmap_w, params_.residual_mode);
    sample.input_height = params_.input_h;
    sample.input_width = params_.input_w;
    sample.input_channels = 3;
    sample.input_image = render_crop(data_->images[static_cast<std::size_t>(r)], crop);
    sample.image_id = rec.image_id;
    sample.source_box = rec.boxes[static_cast<std::size_t>(p)];
    return sample;
}

}  // namespace mipose
