#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pendiag/model.hpp"
#include "pendiag/preprocess.hpp"
#include "pendiag/tensor.hpp"

namespace pendiag {

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::size_t step = 0;
    std::vector<Tensor> m, v; // aligned with param_views order
};

AdamState make_adam(const ModelParams& params, const AdamConfig& cfg);
// One update: moment decay, bias correction at the incremented step count,
// then the scaled move against the gradient.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state);

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double val_fraction = 0.2;
    AdamConfig adam;
    std::uint64_t seed = 1;
};

struct SplitPatches {
    std::vector<Patch> train;
    std::vector<Patch> val;
};
// Seeded shuffle, then the first ceil((1 - val_fraction) * n) go to train.
SplitPatches split_patches(std::vector<Patch> patches, double val_fraction, std::uint64_t seed);

struct EpochStats {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    ModelParams best;
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0; // 0 when no epoch ran
    double best_val_acc = 0.0;
    double best_val_loss = 0.0;
};

// Splits internally, shuffles each epoch, averages gradients per batch and
// applies one Adam update per batch. Keeps the parameters from the epoch
// with the best validation accuracy (loss, then earlier epoch, break ties).
// Throws NumericError as soon as a batch loss goes non-finite.
TrainResult train_model(const std::vector<Patch>& patches, const ModelConfig& mcfg,
                        const TrainConfig& tcfg);

struct EvalStats {
    double loss = 0.0;
    double acc = 0.0;
};
// Inference-mode mean cross entropy and argmax accuracy.
EvalStats eval_patches(const ModelParams& params, const std::vector<Patch>& patches);

std::string history_to_csv(const std::vector<EpochStats>& history);

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    double selection_score = 0.0;
    std::string selection_metric = "val_acc";
};

struct Checkpoint {
    ModelParams params;
    CheckpointMeta meta;
};

// JSON with a format_version field; weight arrays round-trip bitwise.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace pendiag
