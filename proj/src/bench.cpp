#include "mipose/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mipose/io/svg_plot.hpp"

namespace fs = std::filesystem;

namespace mipose {

std::vector<BenchSpec> default_bench_specs() {
    return {{"baseline_n1", Variant::baseline_n1, 1},
            {"mipnet_n2", Variant::mipnet, 2},
            {"mipnet_n3", Variant::mipnet, 3},
            {"two_heads", Variant::two_heads, 2}};
}

namespace {

bool split_present(const DatasetManifest& m, const std::string& split) {
    for (const auto& r : m.records)
        if (r.split == split) return true;
    return false;
}

double difficulty_ap(const EvalReport& r, const std::string& name) {
    for (const auto& [n, block] : r.per_difficulty)
        if (n == name) return block.ap;
    return -1.0;  // absent from the split
}

std::string csv_metric(double v) {
    if (v < 0.0) return "";  // absent difficulty -> empty cell
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

BenchmarkResult run_benchmark(const LoadedDataset& data, const TrainConfig& base_cfg,
                              std::uint64_t model_seed, double nms_threshold,
                              const std::string& out_dir,
                              const std::vector<BenchSpec>& specs) {
    if (specs.empty()) throw std::invalid_argument("run_benchmark: no configs");
    fs::create_directories(out_dir);

    const std::string eval_split = split_present(data.manifest, "test") ? "test" : "val";
    if (!split_present(data.manifest, eval_split))
        throw std::invalid_argument("run_benchmark: dataset has no test or val split");
    const std::string val_split = split_present(data.manifest, "val") ? "val" : "";
    const std::vector<double> kappas = uniform_kappas(data.manifest.keypoints);

    BenchmarkResult result;
    result.eval_split = eval_split;
    for (const BenchSpec& spec : specs) {
        const std::string cfg_dir = (fs::path(out_dir) / spec.name).string();
        ModelConfig mc = ModelConfig::preset(spec.variant, spec.n_slots, model_seed);
        Model<float> model = Model<float>::build(mc);

        TrainConfig tc = base_cfg;
        tc.resume = false;  // reruns must retrain from scratch, bit-for-bit

        BenchRow row;
        row.spec = spec;
        row.param_count = model.store().parameter_count();
        row.curve = train_model(model, data, "train", val_split, tc, cfg_dir).curve;

        // Single-threaded inference so the median latency is comparable
        // across configs.
        std::vector<Prediction> preds = predict_split(
            model, data, eval_split, nms_threshold, kappas, 1, &row.ms_per_image);
        save_predictions(preds, (fs::path(cfg_dir) / "predictions.json").string());
        row.report = evaluate(preds, data.manifest, eval_split, kappas);
        row.report.ms_per_image = row.ms_per_image;
        {
            std::ofstream out((fs::path(cfg_dir) / "eval.json").string());
            out << row.report.to_json().dump(1) << '\n';
        }
        result.rows.push_back(std::move(row));
    }

    // Comparison CSV: only run-to-run deterministic columns.
    {
        std::ofstream out((fs::path(out_dir) / "comparison.csv").string());
        if (!out)
            throw std::runtime_error("run_benchmark: cannot write comparison.csv");
        out << "name,variant,n,params,ap,ap50,ap75,ar,ap_single,ap_two_moderate,"
               "ap_two_heavy\n";
        for (const auto& row : result.rows) {
            const MetricBlock& o = row.report.overall;
            out << row.spec.name << ',' << variant_name(row.spec.variant) << ','
                << row.spec.n_slots << ',' << row.param_count << ','
                << csv_metric(o.ap) << ',' << csv_metric(o.ap50) << ','
                << csv_metric(o.ap75) << ',' << csv_metric(o.ar) << ','
                << csv_metric(difficulty_ap(row.report, "single")) << ','
                << csv_metric(difficulty_ap(row.report, "two_moderate")) << ','
                << csv_metric(difficulty_ap(row.report, "two_heavy")) << '\n';
        }
    }

    // Human-readable summary, latency included.
    {
        std::ofstream out((fs::path(out_dir) / "summary.txt").string());
        char line[256];
        std::snprintf(line, sizeof line, "evaluation split: %s\n\n", eval_split.c_str());
        out << line;
        std::snprintf(line, sizeof line, "%-12s %-12s %2s %8s %7s %7s %7s %7s %9s\n",
                      "name", "variant", "N", "params", "AP", "AP50", "AP75", "AR",
                      "ms/image");
        out << line;
        for (const auto& row : result.rows) {
            const MetricBlock& o = row.report.overall;
            std::snprintf(line, sizeof line,
                          "%-12s %-12s %2d %8zu %7.4f %7.4f %7.4f %7.4f %9.2f\n",
                          row.spec.name.c_str(), variant_name(row.spec.variant).c_str(),
                          row.spec.n_slots, row.param_count, o.ap, o.ap50, o.ap75, o.ar,
                          row.ms_per_image);
            out << line;
        }
        out << "\nms/image is wall clock (median over images, single-threaded) and "
               "varies across\nmachines and runs; every other column is "
               "deterministic for a given seed.\n";
        for (const auto& row : result.rows) {
            out << '\n' << row.spec.name << " per-difficulty:\n"
                << row.report.format_table(true);
        }
    }

    std::vector<PlotSeries> curves;
    for (const auto& row : result.rows) {
        PlotSeries s;
        s.label = row.spec.name;
        for (const auto& e : row.curve) {
            s.xs.push_back(e.epoch);
            s.ys.push_back(e.train_loss);
        }
        curves.push_back(std::move(s));
    }
    write_line_chart((fs::path(out_dir) / "loss_curves.svg").string(),
                     "training loss", "epoch", "loss", curves);

    std::vector<BarEntry> ap_bars, ms_bars;
    for (const auto& row : result.rows) {
        ap_bars.push_back({row.spec.name, row.report.overall.ap});
        ms_bars.push_back({row.spec.name, row.ms_per_image});
    }
    write_bar_chart((fs::path(out_dir) / "ap_bars.svg").string(),
                    "AP on " + eval_split, "AP", ap_bars);
    write_bar_chart((fs::path(out_dir) / "latency_bars.svg").string(),
                    "inference latency", "ms/image", ms_bars);
    return result;
}

}  // namespace mipose
