#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdae/corruption.hpp"
#include "cdae/data.hpp"
#include "cdae/metrics.hpp"
#include "cdae/models.hpp"
#include "cdae/tensor.hpp"

namespace cdae {

// Raised when a training loss leaves the finite range; the CLI maps this
// to its own exit code.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Stage { stage1, cdae_pretrain, stage2_finetune, stage3 };

std::string stage_name(Stage s);

struct StageConfig {
    std::int64_t epochs = 1;
    double lr = 1e-4;
    std::int64_t batch_size = 32;
    std::uint64_t seed = 0;
    Stage stage = Stage::stage1;
    double weight_decay = 0.01;
    double eta_min = 0.0;
    bool shuffle = true;

    bool operator==(const StageConfig&) const = default;
};

struct EpochRecord {
    std::int64_t epoch = 0;  // 1-based
    double loss = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
};

void write_train_log(const TrainLog& log, const std::string& path);

// The corruption call is the single point of variation between the
// chaotic run and the mask/gaussian ablations: every pretraining run goes
// through the same loop with a different callback.
using Corruptor = std::function<TensorPtr(const TensorPtr& images, std::uint64_t batch_seed)>;

Corruptor chaotic_corruptor(const ChaosParams& params);
Corruptor mask_corruptor(const BaselineCorruptionParams& params);
Corruptor gaussian_corruptor(const BaselineCorruptionParams& params);

struct Stage1Result {
    ClassifierModel model;  // returned frozen
    TrainLog log;
};
Stage1Result train_stage1(const StageConfig& cfg, const EncoderConfig& encoder_cfg,
                          const Dataset& dataset);

struct PretrainResult {
    Autoencoder autoencoder;
    TrainLog log;
};
// Labels are ignored; per batch the loop minimizes
// mse(decode(encode(corrupt(x))), x) — the target is always the original.
PretrainResult pretrain_cdae(const StageConfig& cfg, const EncoderConfig& encoder_cfg,
                             const Dataset& unlabeled, const Corruptor& corrupt);

struct Stage2Result {
    ClassifierModel model;  // returned frozen
    TrainLog log;
};
// Clones the encoder, attaches a fresh head, trains the whole network
// with cross-entropy. The decoder is gone: it was never handed over.
Stage2Result finetune_stage2(const StageConfig& cfg, const Encoder& pretrained_encoder,
                             std::int64_t num_classes, const Dataset& dataset);

struct Stage3Result {
    FusionModel model;
    TrainLog log;
};
// Only the SE gate and fusion classifier receive updates; refuses
// backbones that are not frozen.
Stage3Result train_stage3(const StageConfig& cfg, const ClassifierModel& b1,
                          const ClassifierModel& b2, std::int64_t se_ratio,
                          const Dataset& dataset);

struct EvalResult {
    ConfusionMatrix matrix;
    MetricsReport metrics;
};
EvalResult evaluate(const ClassifierModel& model, const Dataset& dataset);
EvalResult evaluate(const FusionModel& model, const Dataset& dataset);

}  // namespace cdae
