#pragma once

// Minibatch training of the multi-instance loss: per-epoch reshuffles, Adam
// with step decay, per-epoch resumable checkpoints, and a loss-curve CSV.
// Batches parallelize over samples with a fixed-order gradient reduction, so
// results are bit-identical for any worker count.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mipose/assign.hpp"
#include "mipose/model.hpp"
#include "mipose/synth.hpp"

namespace mipose {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 16;
    double learning_rate = 1e-3;  // Adam; steps down 10x at 70% and 90% of epochs
    std::uint64_t seed = 1;
    ResidualMode residual_mode = ResidualMode::duplicate;
    int workers = 0;      // <= 0: all hardware threads
    bool resume = false;  // continue from <out_dir>/last.ckpt when present

    void validate() const;
    /// Only fields that define the run mathematically (used for resume
    /// compatibility checks); workers and resume are runtime knobs.
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochLoss {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochLoss> curve;
    std::string final_checkpoint;
};

/// Learning rate for a 0-based epoch index under the step-decay schedule.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

/// Write the curve as CSV rows (epoch, split, loss), train and val per epoch.
void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& curve,
                    bool has_val);

std::vector<EpochLoss> curve_from_json(const nlohmann::json& j);
nlohmann::json curve_to_json(const std::vector<EpochLoss>& curve);

/// Train `model` on the split's samples. Writes last.ckpt each epoch (with
/// optimizer state and progress metadata), final.ckpt at the end, and
/// loss.csv throughout. With cfg.resume, continues from last.ckpt if present
/// (the checkpointed model/train configs must match). A non-finite loss
/// aborts with the offending batch in the message.
TrainResult train_model(Model<float>& model, const LoadedDataset& data,
                        const std::string& train_split, const std::string& val_split,
                        const TrainConfig& cfg, const std::string& out_dir);

}  // namespace mipose
