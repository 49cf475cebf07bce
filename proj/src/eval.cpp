#include "mipose/eval.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "mipose/common.hpp"
#include "mipose/parallel.hpp"

namespace mipose {

std::vector<double> uniform_kappas(int count) {
    if (count < 1) throw std::invalid_argument("uniform_kappas: count must be >= 1");
    return std::vector<double>(static_cast<std::size_t>(count), kUniformKappa);
}

namespace {

std::uint64_t hash_double(std::uint64_t h, double v) {
    std::uint64_t bits = 0;
    static_assert(sizeof bits == sizeof v);
    std::memcpy(&bits, &v, sizeof bits);
    h ^= bits;
    h *= 0x100000001B3ull;
    return h;
}

}  // namespace

std::uint64_t pose_hash(const ScoredPose& p) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const auto& k : p.keypoints) {
        h = hash_double(h, k.x);
        h = hash_double(h, k.y);
        h = hash_double(h, k.score);
    }
    return hash_double(h, p.aggregate_score);
}

double suppression_oks(const ScoredPose& a, const ScoredPose& b,
                       const std::vector<double>& kappas) {
    const Pose ref = a.to_pose();  // confident keypoints only
    bool any = false;
    for (const auto& k : ref.keypoints) any = any || k.labeled();
    if (!any) return 0.0;
    const double scale_sq = 0.5 * (a.source_box.area() + b.source_box.area());
    if (scale_sq <= 0.0) return 0.0;
    return compute_oks(ref, b.to_pose(), scale_sq, kappas);
}

std::vector<ScoredPose> oks_nms(std::vector<ScoredPose> poses, double threshold,
                                const std::vector<double>& kappas) {
    std::sort(poses.begin(), poses.end(), [](const ScoredPose& a, const ScoredPose& b) {
        if (a.aggregate_score != b.aggregate_score)
            return a.aggregate_score > b.aggregate_score;
        return pose_hash(a) < pose_hash(b);
    });
    std::vector<ScoredPose> kept;
    for (auto& cand : poses) {
        bool suppressed = false;
        for (const auto& k : kept)
            if (suppression_oks(k, cand, kappas) > threshold) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(std::move(cand));
    }
    return kept;
}

std::vector<ScoredPose> infer_image(const Model<float>& model, const ImageU8& image,
                                    const std::vector<BoundingBox>& boxes,
                                    double nms_threshold,
                                    const std::vector<double>& kappas) {
    const ModelConfig& cfg = model.config();
    const double sx = static_cast<double>(cfg.input_w) / cfg.heatmap_w();
    const double sy = static_cast<double>(cfg.input_h) / cfg.heatmap_h();

    std::vector<ScoredPose> pool;
    for (const BoundingBox& box : boxes) {
        const CropTransform crop =
            make_crop_transform(box, cfg.input_h, cfg.input_w, kCropMargin);
        nn::Tensor<float> x({cfg.input_h, cfg.input_w, 3});
        const std::vector<float> pixels = render_crop(image, crop);
        std::copy(pixels.begin(), pixels.end(), x.data.begin());

        const std::vector<HeatmapSet> maps = model.sweep(x, cfg.n_slots);
        for (int lam = 0; lam < static_cast<int>(maps.size()); ++lam) {
            ScoredPose sp = decode_heatmaps(maps[static_cast<std::size_t>(lam)]);
            for (auto& kp : sp.keypoints) {
                const Keypoint img_kp = crop.invert(
                    Keypoint{kp.x * sx, kp.y * sy, Visibility::labeled});
                kp.x = img_kp.x;
                kp.y = img_kp.y;
            }
            sp.selector_used = InstanceSelector::hard(lam);
            sp.source_box = box;
            pool.push_back(std::move(sp));
        }
    }
    return oks_nms(std::move(pool), nms_threshold, kappas);
}

nlohmann::json predictions_to_json(const std::vector<Prediction>& preds) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : preds) {
        nlohmann::json kps = nlohmann::json::array();
        for (const auto& k : p.pose.keypoints) kps.push_back({k.x, k.y, k.score});
        nlohmann::json lambda;
        if (p.pose.selector_used.is_hard()) {
            lambda = p.pose.selector_used.hard_index();
        } else {
            lambda = p.pose.selector_used.soft_weights();
        }
        out.push_back({{"image_id", p.image_id},
                       {"keypoints", std::move(kps)},
                       {"aggregate_score", p.pose.aggregate_score},
                       {"lambda", std::move(lambda)},
                       {"box",
                        {p.pose.source_box.x, p.pose.source_box.y, p.pose.source_box.w,
                         p.pose.source_box.h}}});
    }
    return out;
}

std::vector<Prediction> predictions_from_json(const nlohmann::json& j) {
    std::vector<Prediction> preds;
    for (const auto& pj : j) {
        Prediction p;
        p.image_id = pj.at("image_id").get<std::uint64_t>();
        for (const auto& kj : pj.at("keypoints"))
            p.pose.keypoints.push_back({kj.at(0).get<double>(), kj.at(1).get<double>(),
                                        kj.at(2).get<double>()});
        p.pose.aggregate_score = pj.at("aggregate_score").get<double>();
        const auto& lj = pj.at("lambda");
        p.pose.selector_used = lj.is_array()
                                   ? InstanceSelector::soft(lj.get<std::vector<double>>())
                                   : InstanceSelector::hard(lj.get<int>());
        const auto& bj = pj.at("box");
        p.pose.source_box = {bj.at(0).get<double>(), bj.at(1).get<double>(),
                             bj.at(2).get<double>(), bj.at(3).get<double>()};
        preds.push_back(std::move(p));
    }
    return preds;
}

void save_predictions(const std::vector<Prediction>& preds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_predictions: cannot open " + path);
    out << predictions_to_json(preds).dump(1) << '\n';
    if (!out) throw std::runtime_error("save_predictions: write failed for " + path);
}

std::vector<Prediction> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_predictions: cannot open " + path);
    return predictions_from_json(nlohmann::json::parse(in));
}

namespace {

constexpr int kNumThresholds = 10;  // 0.50:0.05:0.95

double threshold_at(int i) { return 0.50 + 0.05 * i; }

struct MatchEntry {
    double score = 0.0;
    std::uint64_t hash = 0;
    bool tp = false;
};

// Matching outcome of every prediction of one record, per OKS threshold.
struct RecordMatches {
    std::array<std::vector<MatchEntry>, kNumThresholds> entries;
    int gt_count = 0;
};

RecordMatches match_record(const ManifestRecord& rec,
                           std::vector<const Prediction*> preds,
                           const std::vector<double>& kappas) {
    RecordMatches rm;
    rm.gt_count = static_cast<int>(rec.poses.size());

    std::vector<std::uint64_t> hashes;
    hashes.reserve(preds.size());
    for (const auto* p : preds) hashes.push_back(pose_hash(p->pose));
    std::vector<std::size_t> order(preds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (preds[a]->pose.aggregate_score != preds[b]->pose.aggregate_score)
            return preds[a]->pose.aggregate_score > preds[b]->pose.aggregate_score;
        return hashes[a] < hashes[b];
    });

    // OKS of every (prediction, ground truth) pair, scale = gt box area.
    std::vector<std::vector<double>> oks(preds.size(),
                                         std::vector<double>(rec.poses.size(), 0.0));
    for (std::size_t pi = 0; pi < preds.size(); ++pi) {
        const Pose pred_pose = preds[pi]->pose.to_pose();
        for (std::size_t gi = 0; gi < rec.poses.size(); ++gi)
            oks[pi][gi] = compute_oks(rec.poses[gi], pred_pose, rec.boxes[gi].area(),
                                      kappas);
    }

    for (int ti = 0; ti < kNumThresholds; ++ti) {
        const double thr = threshold_at(ti);
        std::vector<bool> gt_used(rec.poses.size(), false);
        for (std::size_t oi = 0; oi < order.size(); ++oi) {
            const std::size_t pi = order[oi];
            int best_gt = -1;
            double best_oks = 0.0;
            for (std::size_t gi = 0; gi < rec.poses.size(); ++gi) {
                if (gt_used[gi]) continue;
                if (oks[pi][gi] >= thr && oks[pi][gi] > best_oks) {
                    best_oks = oks[pi][gi];
                    best_gt = static_cast<int>(gi);
                }
            }
            if (best_gt >= 0) gt_used[static_cast<std::size_t>(best_gt)] = true;
            rm.entries[static_cast<std::size_t>(ti)].push_back(
                {preds[pi]->pose.aggregate_score, hashes[pi], best_gt >= 0});
        }
    }
    return rm;
}

MetricBlock compute_block(const std::vector<const RecordMatches*>& records) {
    MetricBlock block;
    block.images = static_cast<int>(records.size());
    for (const auto* r : records) block.gt_instances += r->gt_count;
    if (block.gt_instances == 0) return block;

    double ap_sum = 0.0, ar_sum = 0.0;
    for (int ti = 0; ti < kNumThresholds; ++ti) {
        std::vector<MatchEntry> all;
        for (const auto* r : records)
            all.insert(all.end(), r->entries[static_cast<std::size_t>(ti)].begin(),
                       r->entries[static_cast<std::size_t>(ti)].end());
        std::sort(all.begin(), all.end(), [](const MatchEntry& a, const MatchEntry& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.hash < b.hash;
        });

        std::vector<double> precision(all.size()), recall(all.size());
        int tp = 0;
        for (std::size_t k = 0; k < all.size(); ++k) {
            if (all[k].tp) ++tp;
            precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
            recall[k] = static_cast<double>(tp) / block.gt_instances;
        }
        // Running max of precision from the tail: the interpolated envelope.
        std::vector<double> envelope(all.size());
        for (std::size_t k = all.size(); k-- > 0;)
            envelope[k] = k + 1 < all.size() ? std::max(precision[k], envelope[k + 1])
                                             : precision[k];

        double ap = 0.0;
        std::size_t k = 0;
        for (int r = 0; r <= 100; ++r) {
            const double level = r / 100.0;
            while (k < all.size() && recall[k] + 1e-12 < level) ++k;
            if (k >= all.size()) break;
            ap += envelope[k];
        }
        ap /= 101.0;

        ap_sum += ap;
        ar_sum += all.empty() ? 0.0 : recall.back();
        if (ti == 0) block.ap50 = ap;
        if (ti == 5) block.ap75 = ap;
    }
    block.ap = ap_sum / kNumThresholds;
    block.ar = ar_sum / kNumThresholds;
    return block;
}

}  // namespace

EvalReport evaluate(const std::vector<Prediction>& preds,
                    const DatasetManifest& manifest, const std::string& split,
                    const std::vector<double>& kappas) {
    std::vector<std::size_t> record_ids;
    std::unordered_map<std::uint64_t, std::size_t> by_image;  // image_id -> local index
    for (std::size_t r = 0; r < manifest.records.size(); ++r) {
        if (manifest.records[r].split != split) continue;
        by_image[manifest.records[r].image_id] = record_ids.size();
        record_ids.push_back(r);
    }
    if (record_ids.empty())
        throw std::invalid_argument("evaluate: split '" + split + "' has no records");

    std::vector<std::vector<const Prediction*>> per_record(record_ids.size());
    for (const auto& p : preds) {
        auto it = by_image.find(p.image_id);
        if (it == by_image.end())
            throw std::invalid_argument("evaluate: prediction references image_id " +
                                        std::to_string(p.image_id) +
                                        " outside split '" + split + "'");
        per_record[it->second].push_back(&p);
    }

    std::vector<RecordMatches> matches(record_ids.size());
    for (std::size_t i = 0; i < record_ids.size(); ++i)
        matches[i] = match_record(manifest.records[record_ids[i]],
                                  std::move(per_record[i]), kappas);

    EvalReport report;
    std::vector<const RecordMatches*> all;
    for (const auto& m : matches) all.push_back(&m);
    report.overall = compute_block(all);

    for (Difficulty d : {Difficulty::single, Difficulty::two_moderate,
                         Difficulty::two_heavy, Difficulty::multi}) {
        std::vector<const RecordMatches*> subset;
        for (std::size_t i = 0; i < record_ids.size(); ++i)
            if (scene_difficulty(manifest.records[record_ids[i]]) == d)
                subset.push_back(&matches[i]);
        if (!subset.empty())
            report.per_difficulty.emplace_back(difficulty_name(d),
                                               compute_block(subset));
    }
    report.instance_hist = instance_histogram(manifest, split, SampleParams{});
    return report;
}

namespace {

nlohmann::json block_to_json(const MetricBlock& b) {
    return {{"ap", b.ap},     {"ap50", b.ap50},     {"ap75", b.ap75},
            {"ar", b.ar},     {"images", b.images}, {"gt_instances", b.gt_instances}};
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::json diff = nlohmann::json::object();
    for (const auto& [name, block] : per_difficulty) diff[name] = block_to_json(block);
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [bin, fraction] : instance_hist)
        hist[std::to_string(bin)] = fraction;
    return {{"overall", block_to_json(overall)},
            {"per_difficulty", std::move(diff)},
            {"instance_histogram", std::move(hist)},
            {"ms_per_image", ms_per_image}};
}

std::string EvalReport::format_table(bool include_difficulty) const {
    char line[160];
    std::string out;
    std::snprintf(line, sizeof line, "%-14s %7s %7s %7s %7s %7s %5s\n", "subset", "AP",
                  "AP50", "AP75", "AR", "images", "GTs");
    out += line;
    auto row = [&](const std::string& name, const MetricBlock& b) {
        std::snprintf(line, sizeof line, "%-14s %7.4f %7.4f %7.4f %7.4f %7d %5d\n",
                      name.c_str(), b.ap, b.ap50, b.ap75, b.ar, b.images,
                      b.gt_instances);
        out += line;
    };
    row("overall", overall);
    if (include_difficulty)
        for (const auto& [name, block] : per_difficulty) row(name, block);
    return out;
}

std::vector<Prediction> predict_split(const Model<float>& model,
                                      const LoadedDataset& data,
                                      const std::string& split, double nms_threshold,
                                      const std::vector<double>& kappas, int workers,
                                      double* median_ms_per_image) {
    std::vector<std::size_t> record_ids;
    for (std::size_t r = 0; r < data.manifest.records.size(); ++r)
        if (data.manifest.records[r].split == split) record_ids.push_back(r);

    std::vector<std::vector<ScoredPose>> results(record_ids.size());
    std::vector<double> ms(record_ids.size(), 0.0);
    parallel_for(record_ids.size(), workers, [&](std::size_t i) {
        const auto& rec = data.manifest.records[record_ids[i]];
        const auto t0 = std::chrono::steady_clock::now();
        results[i] = infer_image(model, data.images[record_ids[i]], rec.boxes,
                                 nms_threshold, kappas);
        ms[i] = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    });

    if (median_ms_per_image) {
        *median_ms_per_image = 0.0;
        if (!ms.empty()) {
            std::sort(ms.begin(), ms.end());
            const std::size_t mid = ms.size() / 2;
            *median_ms_per_image =
                ms.size() % 2 ? ms[mid] : 0.5 * (ms[mid - 1] + ms[mid]);
        }
    }

    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < record_ids.size(); ++i)
        for (auto& pose : results[i])
            preds.push_back({data.manifest.records[record_ids[i]].image_id,
                             std::move(pose)});
    return preds;
}

}  // namespace mipose
