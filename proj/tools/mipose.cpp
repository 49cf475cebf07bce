// Command-line front end: dataset generation, training, evaluation,
// single-image inference, and the architecture benchmark. Every run writes
// its fully resolved configuration (run_config.json) into the output
// directory. Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mipose/bench.hpp"
#include "mipose/eval.hpp"
#include "mipose/io/image.hpp"
#include "mipose/io/runconfig.hpp"
#include "mipose/model.hpp"
#include "mipose/synth.hpp"
#include "mipose/train.hpp"

namespace fs = std::filesystem;
using namespace mipose;

namespace {

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig();
    try {
        return RunConfig::from_file(path);
    } catch (const std::exception& e) {
        throw CLI::ValidationError("--config", e.what());
    }
}

void check_known(const RunConfig& rc, const std::set<std::string>& known) {
    try {
        rc.ensure_known(known);
    } catch (const std::exception& e) {
        throw CLI::ValidationError("--config", e.what());
    }
}

Variant variant_from_cli(const std::string& name) {
    if (name == "mipnet") return Variant::mipnet;
    if (name == "baseline" || name == "baseline_n1") return Variant::baseline_n1;
    if (name == "two-heads" || name == "two_heads") return Variant::two_heads;
    throw CLI::ValidationError("--variant", "unknown variant '" + name +
                                                "' (mipnet | baseline | two-heads)");
}

ResidualMode residual_from_cli(const std::string& name) {
    if (name == "duplicate") return ResidualMode::duplicate;
    if (name == "dont-care") return ResidualMode::dont_care;
    throw CLI::ValidationError("--residual", "unknown mode '" + name +
                                                 "' (duplicate | dont-care)");
}

LoadedDataset load_dataset(const std::string& dir) {
    return LoadedDataset::load((fs::path(dir) / "manifest.json").string());
}

std::vector<BoundingBox> load_boxes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open boxes file " + path);
    const nlohmann::json j = nlohmann::json::parse(in);
    std::vector<BoundingBox> boxes;
    for (const auto& bj : j)
        boxes.push_back({bj.at(0).get<double>(), bj.at(1).get<double>(),
                         bj.at(2).get<double>(), bj.at(3).get<double>()});
    return boxes;
}

// Shared train/benchmark knobs: config-file values overridden by explicit
// flags, resolved values recorded back for the run_config dump.
struct TrainFlags {
    int epochs = 30;
    int batch_size = 16;
    double lr = 1e-3;
    std::uint64_t seed = 1;
    std::string residual = "duplicate";

    void add_to(CLI::App* cmd) {
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--batch-size", batch_size, "minibatch size");
        cmd->add_option("--lr", lr, "initial Adam learning rate");
        cmd->add_option("--seed", seed, "run seed (init, shuffling)");
        cmd->add_option("--residual", residual,
                        "residual-slot supervision: duplicate | dont-care");
    }

    TrainConfig resolve(CLI::App* cmd, RunConfig& rc, int workers) const {
        if (cmd->count("--epochs")) rc.set("train.epochs", epochs);
        if (cmd->count("--batch-size")) rc.set("train.batch_size", batch_size);
        if (cmd->count("--lr")) rc.set("train.learning_rate", lr);
        if (cmd->count("--seed")) rc.set("seed", seed);
        if (cmd->count("--residual")) rc.set("train.residual_mode", residual);

        TrainConfig tc;
        tc.epochs = rc.get_int("train.epochs", epochs);
        tc.batch_size = rc.get_int("train.batch_size", batch_size);
        tc.learning_rate = rc.get_double("train.learning_rate", lr);
        tc.seed = rc.get_u64("seed", seed);
        tc.residual_mode =
            residual_from_cli(rc.get_string("train.residual_mode", residual));
        tc.workers = workers;

        rc.set("train.epochs", tc.epochs);
        rc.set("train.batch_size", tc.batch_size);
        rc.set("train.learning_rate", tc.learning_rate);
        rc.set("seed", tc.seed);
        rc.set("train.residual_mode",
               tc.residual_mode == ResidualMode::duplicate ? "duplicate" : "dont-care");
        return tc;
    }
};

void write_run_config(RunConfig& rc, const std::string& out_dir) {
    fs::create_directories(out_dir);
    rc.write((fs::path(out_dir) / "run_config.json").string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-instance top-down pose estimation toolkit"};
    app.require_subcommand(1);
    int exit_code = 0;

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic pose dataset");
    std::string gen_config, gen_out;
    std::uint64_t gen_seed = 1;
    int gen_train = 4000, gen_val = 500, gen_test = 500, gen_size = 96;
    double gen_two = 0.5, gen_three = 0.0, gen_iou_min = 0.4, gen_iou_max = 0.7;
    bool gen_inline = false;
    int gen_workers = 0;
    gen->add_option("--config", gen_config, "flat JSON config file");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gen_seed, "dataset seed");
    gen->add_option("--train-scenes", gen_train, "scenes in the train split");
    gen->add_option("--val-scenes", gen_val, "scenes in the val split");
    gen->add_option("--test-scenes", gen_test, "scenes in the test split");
    gen->add_option("--image-size", gen_size, "square scene size in pixels");
    gen->add_option("--two-person-fraction", gen_two, "fraction of 2-person scenes");
    gen->add_option("--three-person-fraction", gen_three,
                    "fraction of 3-person scenes");
    gen->add_option("--iou-min", gen_iou_min, "multi-person target box IoU lower bound");
    gen->add_option("--iou-max", gen_iou_max, "multi-person target box IoU upper bound");
    gen->add_flag("--inline-images", gen_inline,
                  "embed images in the manifest as base64 instead of PNGs");
    gen->add_option("--workers", gen_workers, "unused for generation; accepted for symmetry");
    gen->callback([&] {
        RunConfig rc = load_run_config(gen_config);
        if (gen->count("--seed")) rc.set("seed", gen_seed);
        if (gen->count("--train-scenes")) rc.set("data.train_scenes", gen_train);
        if (gen->count("--val-scenes")) rc.set("data.val_scenes", gen_val);
        if (gen->count("--test-scenes")) rc.set("data.test_scenes", gen_test);
        if (gen->count("--image-size")) rc.set("data.image_size", gen_size);
        if (gen->count("--two-person-fraction")) rc.set("data.two_person_fraction", gen_two);
        if (gen->count("--three-person-fraction"))
            rc.set("data.three_person_fraction", gen_three);
        if (gen->count("--iou-min")) rc.set("data.iou_min", gen_iou_min);
        if (gen->count("--iou-max")) rc.set("data.iou_max", gen_iou_max);
        if (gen->count("--inline-images")) rc.set("data.inline_images", gen_inline);
        check_known(rc, {"seed", "data.train_scenes", "data.val_scenes",
                         "data.test_scenes", "data.image_size",
                         "data.two_person_fraction", "data.three_person_fraction",
                         "data.iou_min", "data.iou_max", "data.inline_images"});

        DatasetConfig dc;
        dc.image_size = rc.get_int("data.image_size", gen_size);
        dc.inline_images = rc.get_bool("data.inline_images", gen_inline);
        const int train_n = rc.get_int("data.train_scenes", gen_train);
        const int val_n = rc.get_int("data.val_scenes", gen_val);
        const int test_n = rc.get_int("data.test_scenes", gen_test);
        dc.split_counts.clear();
        if (train_n > 0) dc.split_counts.push_back({"train", train_n});
        if (val_n > 0) dc.split_counts.push_back({"val", val_n});
        if (test_n > 0) dc.split_counts.push_back({"test", test_n});
        const double two = rc.get_double("data.two_person_fraction", gen_two);
        const double three = rc.get_double("data.three_person_fraction", gen_three);
        const double one = 1.0 - two - three;
        const double iou_min = rc.get_double("data.iou_min", gen_iou_min);
        const double iou_max = rc.get_double("data.iou_max", gen_iou_max);
        if (one < -1e-9)
            throw CLI::ValidationError("--two-person-fraction",
                                       "scene fractions exceed 1");
        dc.mix.clear();
        if (one > 1e-12) dc.mix.push_back({one, 1, 0.0, 0.0});
        if (two > 1e-12) dc.mix.push_back({two, 2, iou_min, iou_max});
        if (three > 1e-12) dc.mix.push_back({three, 3, iou_min, iou_max});
        const std::uint64_t seed = rc.get_u64("seed", gen_seed);

        rc.set("seed", seed);
        rc.set("data.train_scenes", train_n);
        rc.set("data.val_scenes", val_n);
        rc.set("data.test_scenes", test_n);
        rc.set("data.image_size", dc.image_size);
        rc.set("data.two_person_fraction", two);
        rc.set("data.three_person_fraction", three);
        rc.set("data.iou_min", iou_min);
        rc.set("data.iou_max", iou_max);
        rc.set("data.inline_images", dc.inline_images);

        const DatasetManifest m = make_dataset(dc, seed, gen_out);
        write_run_config(rc, gen_out);
        std::printf("wrote %zu scenes to %s\n", m.records.size(), gen_out.c_str());
    });

    // ---- train ----
    auto* train = app.add_subcommand("train", "train a pose model");
    std::string train_config, train_data, train_out, train_variant = "mipnet";
    TrainFlags train_flags;
    int train_n_slots = -1;
    int train_workers = 0;
    bool train_resume = false;
    train->add_option("--config", train_config, "flat JSON config file");
    train->add_option("--data", train_data, "dataset directory (with manifest.json)")
        ->required();
    train->add_option("--out", train_out, "output directory")->required();
    train->add_option("--variant", train_variant, "mipnet | baseline | two-heads");
    train->add_option("--n", train_n_slots, "prediction slots (selector range)");
    train_flags.add_to(train);
    train->add_flag("--resume", train_resume, "continue from <out>/last.ckpt");
    train->add_option("--workers", train_workers, "threads for batch samples (0 = auto)");
    train->callback([&] {
        RunConfig rc = load_run_config(train_config);
        if (train->count("--variant")) rc.set("model.variant", train_variant);
        if (train->count("--n")) rc.set("model.n_slots", train_n_slots);
        const Variant variant =
            variant_from_cli(rc.get_string("model.variant", train_variant));
        int n_slots = rc.get_int("model.n_slots", train_n_slots);
        if (n_slots < 0) n_slots = variant == Variant::baseline_n1 ? 1 : 2;
        if (variant == Variant::baseline_n1 && n_slots != 1)
            throw CLI::ValidationError("--n", "baseline supports only --n 1");
        if (variant == Variant::two_heads && n_slots != 2)
            throw CLI::ValidationError("--n", "two-heads supports only --n 2");
        if (variant == Variant::mipnet && n_slots < 1)
            throw CLI::ValidationError("--n", "mipnet needs --n >= 1");

        TrainConfig tc = train_flags.resolve(train, rc, train_workers);
        tc.resume = train_resume;
        rc.set("model.variant", variant_name(variant));
        rc.set("model.n_slots", n_slots);
        check_known(rc, {"seed", "model.variant", "model.n_slots", "train.epochs",
                         "train.batch_size", "train.learning_rate",
                         "train.residual_mode"});

        const LoadedDataset data = load_dataset(train_data);
        Model<float> model =
            Model<float>::build(ModelConfig::preset(variant, n_slots, tc.seed));
        write_run_config(rc, train_out);
        const TrainResult res = train_model(model, data, "train", "val", tc, train_out);
        const EpochLoss& last = res.curve.back();
        std::printf("final train loss %.6f val loss %.6f (%s)\n", last.train_loss,
                    last.val_loss, res.final_checkpoint.c_str());
    });

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    std::string ev_ckpt, ev_data, ev_out, ev_split = "test";
    double ev_nms = kNmsThresholdDefault;
    bool ev_difficulty = false;
    int ev_workers = 0;
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--split", ev_split, "dataset split to score");
    ev->add_option("--nms-threshold", ev_nms, "OKS suppression threshold");
    ev->add_flag("--per-difficulty", ev_difficulty, "break results out by scene type");
    ev->add_option("--out", ev_out, "directory for predictions/eval JSON (optional)");
    ev->add_option("--workers", ev_workers, "threads over images (0 = auto)");
    ev->callback([&] {
        auto [model, meta] = Model<float>::from_checkpoint(ev_ckpt);
        const LoadedDataset data = load_dataset(ev_data);
        const std::vector<double> kappas = uniform_kappas(data.manifest.keypoints);
        double ms = 0.0;
        const std::vector<Prediction> preds =
            predict_split(model, data, ev_split, ev_nms, kappas, ev_workers, &ms);
        EvalReport report = evaluate(preds, data.manifest, ev_split, kappas);
        report.ms_per_image = ms;
        std::fputs(report.format_table(ev_difficulty).c_str(), stdout);
        if (!ev_out.empty()) {
            fs::create_directories(ev_out);
            save_predictions(preds, (fs::path(ev_out) / "predictions.json").string());
            std::ofstream rj((fs::path(ev_out) / "eval.json").string());
            rj << report.to_json().dump(1) << '\n';
            RunConfig rc;
            rc.set("eval.checkpoint", ev_ckpt);
            rc.set("eval.split", ev_split);
            rc.set("eval.nms_threshold", ev_nms);
            write_run_config(rc, ev_out);
        }
    });

    // ---- infer ----
    auto* inf = app.add_subcommand("infer", "run inference on one image");
    std::string inf_ckpt, inf_image, inf_boxes, inf_out = ".";
    double inf_nms = kNmsThresholdDefault;
    bool inf_dump = false;
    int inf_sweep = 0;
    inf->add_option("--checkpoint", inf_ckpt, "model checkpoint")->required();
    inf->add_option("--image", inf_image, "input PNG")->required();
    inf->add_option("--boxes", inf_boxes, "JSON file: [[x,y,w,h], ...]")->required();
    inf->add_option("--out", inf_out, "output directory");
    inf->add_option("--nms-threshold", inf_nms, "OKS suppression threshold");
    inf->add_flag("--dump-heatmaps", inf_dump,
                  "write per-box, per-selector, per-keypoint PGM heatmaps");
    inf->add_option("--lambda-sweep", inf_sweep,
                    "trace poses for STEPS soft selectors from 0 to 1");
    inf->callback([&] {
        auto [model, meta] = Model<float>::from_checkpoint(inf_ckpt);
        const ModelConfig& mc = model.config();
        if (inf_sweep != 0 && (inf_sweep < 2 || mc.n_slots != 2))
            throw CLI::ValidationError(
                "--lambda-sweep", "needs STEPS >= 2 and a 2-slot checkpoint");
        const ImageU8 image = read_png(inf_image);
        const std::vector<BoundingBox> boxes = load_boxes(inf_boxes);
        const std::vector<double> kappas = uniform_kappas(mc.keypoints);
        fs::create_directories(inf_out);

        std::vector<Prediction> preds;
        for (auto& pose : infer_image(model, image, boxes, inf_nms, kappas))
            preds.push_back({0, std::move(pose)});
        save_predictions(preds, (fs::path(inf_out) / "predictions.json").string());
        std::printf("kept %zu poses across %zu boxes\n", preds.size(), boxes.size());

        const double sx = static_cast<double>(mc.input_w) / mc.heatmap_w();
        const double sy = static_cast<double>(mc.input_h) / mc.heatmap_h();
        auto crop_input = [&](const BoundingBox& box, CropTransform& crop) {
            crop = make_crop_transform(box, mc.input_h, mc.input_w, kCropMargin);
            nn::Tensor<float> x({mc.input_h, mc.input_w, 3});
            const std::vector<float> pixels = render_crop(image, crop);
            std::copy(pixels.begin(), pixels.end(), x.data.begin());
            return x;
        };

        if (inf_dump) {
            for (std::size_t b = 0; b < boxes.size(); ++b) {
                CropTransform crop;
                const auto x = crop_input(boxes[b], crop);
                const auto maps = model.sweep(x, mc.n_slots);
                for (int lam = 0; lam < static_cast<int>(maps.size()); ++lam)
                    for (int k = 0; k < mc.keypoints; ++k) {
                        char name[64];
                        std::snprintf(name, sizeof name, "hm_b%zu_l%d_k%d.pgm", b, lam,
                                      k);
                        const auto& hm = maps[static_cast<std::size_t>(lam)];
                        write_pgm((fs::path(inf_out) / name).string(), hm.width,
                                  hm.height, channel_to_gray(hm, k));
                    }
            }
        }

        if (inf_sweep >= 2) {
            nlohmann::json sweep = nlohmann::json::array();
            for (std::size_t b = 0; b < boxes.size(); ++b) {
                CropTransform crop;
                const auto x = crop_input(boxes[b], crop);
                const auto maps = model.continuous_sweep(x, inf_sweep);
                nlohmann::json steps = nlohmann::json::array();
                for (int s = 0; s < inf_sweep; ++s) {
                    const double t = static_cast<double>(s) / (inf_sweep - 1);
                    const ScoredPose sp =
                        decode_heatmaps(maps[static_cast<std::size_t>(s)]);
                    nlohmann::json kps = nlohmann::json::array();
                    for (const auto& kp : sp.keypoints) {
                        const Keypoint img_kp = crop.invert(
                            Keypoint{kp.x * sx, kp.y * sy, Visibility::labeled});
                        kps.push_back({img_kp.x, img_kp.y, kp.score});
                    }
                    steps.push_back({{"t", t}, {"keypoints", std::move(kps)}});
                }
                sweep.push_back({{"box_index", b}, {"steps", std::move(steps)}});
            }
            std::ofstream out((fs::path(inf_out) / "lambda_sweep.json").string());
            out << sweep.dump(1) << '\n';
        }
    });

    // ---- benchmark ----
    auto* bench = app.add_subcommand("benchmark",
                                     "train and compare all architecture variants");
    std::string bench_config, bench_data, bench_out;
    TrainFlags bench_flags;
    double bench_nms = kNmsThresholdDefault;
    int bench_workers = 0;
    bench->add_option("--config", bench_config, "flat JSON config file");
    bench->add_option("--data", bench_data, "dataset directory")->required();
    bench->add_option("--out", bench_out, "output directory")->required();
    bench_flags.add_to(bench);
    bench->add_option("--nms-threshold", bench_nms, "OKS suppression threshold");
    bench->add_option("--workers", bench_workers, "training threads (0 = auto)");
    bench->callback([&] {
        RunConfig rc = load_run_config(bench_config);
        TrainConfig tc = bench_flags.resolve(bench, rc, bench_workers);
        if (bench->count("--nms-threshold")) rc.set("eval.nms_threshold", bench_nms);
        const double nms = rc.get_double("eval.nms_threshold", bench_nms);
        rc.set("eval.nms_threshold", nms);
        check_known(rc, {"seed", "train.epochs", "train.batch_size",
                         "train.learning_rate", "train.residual_mode",
                         "eval.nms_threshold"});

        const LoadedDataset data = load_dataset(bench_data);
        write_run_config(rc, bench_out);
        const BenchmarkResult result =
            run_benchmark(data, tc, tc.seed, nms, bench_out);
        std::printf("%-12s %8s %7s %9s\n", "name", "params", "AP", "ms/image");
        for (const auto& row : result.rows)
            std::printf("%-12s %8zu %7.4f %9.2f\n", row.spec.name.c_str(),
                        row.param_count, row.report.overall.ap, row.ms_per_image);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return exit_code;
}
