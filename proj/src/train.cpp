#include "mipose/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "mipose/common.hpp"
#include "mipose/nn/optim.hpp"
#include "mipose/parallel.hpp"

namespace fs = std::filesystem;

namespace mipose {

namespace {

std::string residual_mode_name(ResidualMode m) {
    return m == ResidualMode::duplicate ? "duplicate" : "dont-care";
}

ResidualMode residual_mode_from_name(const std::string& s) {
    if (s == "duplicate") return ResidualMode::duplicate;
    if (s == "dont-care") return ResidualMode::dont_care;
    throw std::invalid_argument("unknown residual mode '" + s + "'");
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1)
        throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("TrainConfig: learning_rate must be positive");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"seed", seed},
            {"residual_mode", residual_mode_name(residual_mode)}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.residual_mode = residual_mode_from_name(j.at("residual_mode").get<std::string>());
    return c;
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    const int m1 = static_cast<int>(std::floor(0.7 * cfg.epochs));
    const int m2 = static_cast<int>(std::floor(0.9 * cfg.epochs));
    double lr = cfg.learning_rate;
    if (epoch >= m1) lr *= 0.1;
    if (epoch >= m2) lr *= 0.1;
    return lr;
}

void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& curve,
                    bool has_val) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_loss_csv: cannot open " + path);
    out << "epoch,split,loss\n";
    char buf[64];
    for (const auto& e : curve) {
        std::snprintf(buf, sizeof buf, "%.9g", e.train_loss);
        out << e.epoch << ",train," << buf << '\n';
        if (has_val) {
            std::snprintf(buf, sizeof buf, "%.9g", e.val_loss);
            out << e.epoch << ",val," << buf << '\n';
        }
    }
    if (!out) throw std::runtime_error("write_loss_csv: write failed for " + path);
}

nlohmann::json curve_to_json(const std::vector<EpochLoss>& curve) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : curve)
        j.push_back({{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"val_loss", e.val_loss}});
    return j;
}

std::vector<EpochLoss> curve_from_json(const nlohmann::json& j) {
    std::vector<EpochLoss> curve;
    for (const auto& ej : j)
        curve.push_back({ej.at("epoch").get<int>(),
                         ej.at("train_loss").get<double>(),
                         ej.at("val_loss").get<double>()});
    return curve;
}

namespace {

SampleParams sample_params_for(const ModelConfig& mc, ResidualMode mode) {
    SampleParams sp;
    sp.input_h = mc.input_h;
    sp.input_w = mc.input_w;
    sp.heatmap_h = mc.heatmap_h();
    sp.heatmap_w = mc.heatmap_w();
    sp.n_slots = mc.n_slots;
    sp.residual_mode = mode;
    return sp;
}

double mean_sample_loss(const Model<float>& model, const SampleSource& src,
                        int workers) {
    std::vector<double> losses(src.size(), 0.0);
    parallel_for(src.size(), workers, [&](std::size_t i) {
        const TrainingSample sample = src.get(i);
        nn::Graph<float> g;
        const auto id = model.build_training_loss(g, sample);
        losses[i] = static_cast<double>(g.value(id).data[0]);
    });
    double sum = 0.0;
    for (double l : losses) sum += l;
    return losses.empty() ? 0.0 : sum / static_cast<double>(losses.size());
}

}  // namespace

TrainResult train_model(Model<float>& model, const LoadedDataset& data,
                        const std::string& train_split, const std::string& val_split,
                        const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    const std::string last_path = (fs::path(out_dir) / "last.ckpt").string();
    const std::string final_path = (fs::path(out_dir) / "final.ckpt").string();
    const std::string csv_path = (fs::path(out_dir) / "loss.csv").string();

    int start_epoch = 0;
    std::vector<EpochLoss> curve;
    if (cfg.resume && fs::exists(last_path)) {
        auto [resumed, meta] = Model<float>::from_checkpoint(last_path);
        if (meta.at("train_config") != cfg.to_json())
            throw std::runtime_error(
                "resume: checkpoint was written with a different training config");
        if (resumed.config().to_json() != model.config().to_json())
            throw std::runtime_error(
                "resume: checkpoint was written with a different model config");
        model = std::move(resumed);
        start_epoch = meta.at("epochs_completed").get<int>();
        curve = curve_from_json(meta.at("curve"));
    }

    const SampleParams sp = sample_params_for(model.config(), cfg.residual_mode);
    const SampleSource train_src(data, sp, train_split);
    const SampleSource val_src(data, sp, val_split);
    if (train_src.size() == 0)
        throw std::invalid_argument("train_model: split '" + train_split +
                                    "' has no samples");
    const bool has_val = val_src.size() > 0;

    std::vector<std::size_t> perm(train_src.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        Rng order(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        order.shuffle(perm.begin(), perm.end());
        const double lr = lr_at_epoch(cfg, epoch);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
            const std::size_t bn =
                std::min(perm.size() - start, static_cast<std::size_t>(cfg.batch_size));
            const std::size_t batch_index = start / cfg.batch_size;

            auto batch_ids = [&] {
                std::string ids;
                for (std::size_t bi = 0; bi < bn; ++bi) {
                    const auto [rec, pose] = train_src.location(perm[start + bi]);
                    ids += (bi ? "," : "") +
                           std::to_string(data.manifest.records[static_cast<std::size_t>(rec)]
                                              .image_id) +
                           ":" + std::to_string(pose);
                }
                return ids;
            };
            auto batch_context = [&] {
                char buf[96];
                std::snprintf(buf, sizeof buf, "epoch %d batch %zu lr %.3g images [",
                              epoch + 1, batch_index, lr);
                return std::string(buf) + batch_ids() + "]";
            };

            // Per-sample backward passes are independent; gradients reduce
            // in sample order, so the sum is worker-count invariant.
            std::vector<double> losses(bn, 0.0);
            std::vector<std::vector<std::string>> names(bn);
            std::vector<std::vector<nn::Tensor<float>>> grads(bn);
            try {
                parallel_for(bn, cfg.workers, [&](std::size_t bi) {
                    const TrainingSample sample = train_src.get(perm[start + bi]);
                    nn::Graph<float> g;
                    const auto loss_id = model.build_training_loss(g, sample);
                    g.backward(loss_id);
                    losses[bi] = static_cast<double>(g.value(loss_id).data[0]);
                    for (const auto& [name, grad] : g.param_grads()) {
                        names[bi].push_back(name);
                        grads[bi].push_back(*grad);
                    }
                });
            } catch (const std::exception& ex) {
                throw std::runtime_error("training aborted at " + batch_context() +
                                         ": " + ex.what());
            }

            double batch_loss = 0.0;
            for (double l : losses) batch_loss += l;
            batch_loss /= static_cast<double>(bn);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training aborted: non-finite loss at " +
                                         batch_context());

            for (std::size_t bi = 1; bi < bn; ++bi) {
                if (names[bi] != names[0])
                    throw std::logic_error(
                        "train_model: parameter sets differ across batch samples");
                for (std::size_t j = 0; j < grads[0].size(); ++j)
                    for (std::size_t k = 0; k < grads[0][j].data.size(); ++k)
                        grads[0][j].data[k] += grads[bi][j].data[k];
            }
            const float inv = 1.0f / static_cast<float>(bn);
            nn::GradList<float> grad_list;
            for (std::size_t j = 0; j < grads[0].size(); ++j) {
                for (auto& v : grads[0][j].data) v *= inv;
                grad_list.push_back({names[0][j], &grads[0][j]});
            }
            nn::adam_step(model.store(), grad_list, lr);

            loss_sum += batch_loss * static_cast<double>(bn);
            seen += bn;
        }

        EpochLoss entry;
        entry.epoch = epoch + 1;
        entry.train_loss = loss_sum / static_cast<double>(seen);
        if (has_val) entry.val_loss = mean_sample_loss(model, val_src, cfg.workers);
        curve.push_back(entry);

        write_loss_csv(csv_path, curve, has_val);
        model.save(last_path, {{"epochs_completed", epoch + 1},
                               {"curve", curve_to_json(curve)},
                               {"train_config", cfg.to_json()}});
    }

    write_loss_csv(csv_path, curve, has_val);
    model.save(final_path,
               {{"curve", curve_to_json(curve)}, {"train_config", cfg.to_json()}});
    return {std::move(curve), final_path};
}

}  // namespace mipose
