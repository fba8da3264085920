#include "cdae/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "cdae/nn.hpp"
#include "cdae/optim.hpp"
#include "cdae/rng.hpp"

namespace cdae {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_finite_loss(double loss, Stage stage, std::int64_t epoch) {
    if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss " + std::to_string(loss) + " in " +
                           stage_name(stage) + " epoch " + std::to_string(epoch));
    }
}

std::optional<std::uint64_t> epoch_shuffle_seed(const StageConfig& cfg, std::int64_t epoch) {
    if (!cfg.shuffle) return std::nullopt;
    return derive_seed(cfg.seed, 0xe000 + static_cast<std::uint64_t>(epoch));
}

// Shared supervised loop for stages 1 and 2.
TrainLog train_classifier(ClassifierModel& model, const StageConfig& cfg, const Dataset& dataset) {
    validate_dataset(dataset);
    AdamW opt(model.parameters(), AdamWConfig{.weight_decay = cfg.weight_decay});
    const CosineSchedule sched{cfg.lr, cfg.eta_min, cfg.epochs};

    TrainLog log;
    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = Clock::now();
        const double lr = sched.lr_at(epoch);
        double loss_sum = 0.0;
        for (const auto& batch : batches(dataset, cfg.batch_size, epoch_shuffle_seed(cfg, epoch))) {
            opt.zero_grad();
            auto loss = cross_entropy(classifier_forward(model, batch.images), batch.labels);
            backward(loss);
            opt.step(lr);
            loss_sum += loss->item() * static_cast<double>(batch.labels.size());
        }
        const double epoch_loss = loss_sum / static_cast<double>(dataset.size());
        require_finite_loss(epoch_loss, cfg.stage, epoch + 1);
        log.epochs.push_back({epoch + 1, epoch_loss, lr, elapsed_seconds(start)});
    }
    return log;
}

}  // namespace

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::stage1: return "stage1";
        case Stage::cdae_pretrain: return "cdae_pretrain";
        case Stage::stage2_finetune: return "stage2_finetune";
        case Stage::stage3: return "stage3";
    }
    return "unknown";
}

void write_train_log(const TrainLog& log, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write train log '" + path + "'");
    char line[160];
    for (const auto& r : log.epochs) {
        std::snprintf(line, sizeof(line), "epoch %lld loss %.17g lr %.17g seconds %.3f\n",
                      static_cast<long long>(r.epoch), r.loss, r.lr, r.seconds);
        os << line;
    }
}

Corruptor chaotic_corruptor(const ChaosParams& params) {
    validate_chaos_params(params);
    return [params](const TensorPtr& images, std::uint64_t) {
        return logistic_map(images, params);
    };
}

Corruptor mask_corruptor(const BaselineCorruptionParams& params) {
    return [params](const TensorPtr& images, std::uint64_t batch_seed) {
        return mask_corrupt(images, params, batch_seed);
    };
}

Corruptor gaussian_corruptor(const BaselineCorruptionParams& params) {
    return [params](const TensorPtr& images, std::uint64_t batch_seed) {
        return gaussian_corrupt(images, params, batch_seed);
    };
}

Stage1Result train_stage1(const StageConfig& cfg, const EncoderConfig& encoder_cfg,
                          const Dataset& dataset) {
    ClassifierModel model(encoder_cfg, dataset.num_classes(), derive_seed(cfg.seed, 0x51));
    TrainLog log = train_classifier(model, cfg, dataset);
    freeze(model);
    return {std::move(model), std::move(log)};
}

PretrainResult pretrain_cdae(const StageConfig& cfg, const EncoderConfig& encoder_cfg,
                             const Dataset& unlabeled, const Corruptor& corrupt) {
    validate_dataset(unlabeled);  // enforces the [0,1] pixel domain of the map
    if (unlabeled.height() != unlabeled.width()) {
        throw std::invalid_argument("autoencoder pretraining expects square images, got " +
                                    shape_str(unlabeled.images->shape));
    }
    if (!corrupt) throw std::invalid_argument("pretrain_cdae needs a corruption callback");

    Autoencoder ae(encoder_cfg, unlabeled.height(), derive_seed(cfg.seed, 0xae));
    AdamW opt(ae.parameters(), AdamWConfig{.weight_decay = cfg.weight_decay});
    const CosineSchedule sched{cfg.lr, cfg.eta_min, cfg.epochs};

    TrainLog log;
    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = Clock::now();
        const double lr = sched.lr_at(epoch);
        double loss_sum = 0.0;
        std::int64_t batch_index = 0;
        for (const auto& batch : batches(unlabeled, cfg.batch_size, epoch_shuffle_seed(cfg, epoch))) {
            const std::uint64_t batch_seed = derive_seed(
                cfg.seed, 0xc0000000ULL + static_cast<std::uint64_t>(epoch) * 1000003ULL +
                              static_cast<std::uint64_t>(batch_index));
            opt.zero_grad();
            auto corrupted = corrupt(batch.images, batch_seed);
            auto loss = mse(autoencoder_forward(ae, corrupted), batch.images);
            backward(loss);
            opt.step(lr);
            loss_sum += loss->item() * static_cast<double>(batch.images->shape[0]);
            ++batch_index;
        }
        const double epoch_loss = loss_sum / static_cast<double>(unlabeled.size());
        require_finite_loss(epoch_loss, cfg.stage, epoch + 1);
        log.epochs.push_back({epoch + 1, epoch_loss, lr, elapsed_seconds(start)});
    }
    return {std::move(ae), std::move(log)};
}

Stage2Result finetune_stage2(const StageConfig& cfg, const Encoder& pretrained_encoder,
                             std::int64_t num_classes, const Dataset& dataset) {
    if (dataset.num_classes() != num_classes) {
        throw std::invalid_argument("stage2 class count " + std::to_string(num_classes) +
                                    " does not match dataset's " +
                                    std::to_string(dataset.num_classes()));
    }
    ClassifierModel model(pretrained_encoder.clone(), num_classes, derive_seed(cfg.seed, 0x52));
    TrainLog log = train_classifier(model, cfg, dataset);
    freeze(model);
    return {std::move(model), std::move(log)};
}

Stage3Result train_stage3(const StageConfig& cfg, const ClassifierModel& b1,
                          const ClassifierModel& b2, std::int64_t se_ratio,
                          const Dataset& dataset) {
    validate_dataset(dataset);
    if (!b1.frozen || !b2.frozen) {
        throw std::invalid_argument("stage3 requires frozen backbones");
    }
    FusionModel fusion(b1, b2, dataset.num_classes(), se_ratio, derive_seed(cfg.seed, 0x53));
    AdamW opt(fusion.trainable_parameters(), AdamWConfig{.weight_decay = cfg.weight_decay});
    const CosineSchedule sched{cfg.lr, cfg.eta_min, cfg.epochs};

    // Backbones are frozen, so their features are constants of the run;
    // extract once in dataset order and train the gate/classifier on
    // slices. fusion_forward recomputes the same values at eval time.
    std::vector<double> features;
    std::int64_t fused_dim = fusion.fused_dim();
    for (const auto& batch : batches(dataset, cfg.batch_size, std::nullopt)) {
        auto f = concat_cols(encoder_forward(fusion.b1, batch.images),
                             encoder_forward(fusion.b2, batch.images));
        features.insert(features.end(), f->data.begin(), f->data.end());
    }

    TrainLog log;
    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = Clock::now();
        const double lr = sched.lr_at(epoch);
        double loss_sum = 0.0;

        std::vector<std::int64_t> order(static_cast<std::size_t>(dataset.size()));
        std::iota(order.begin(), order.end(), 0);
        if (auto seed = epoch_shuffle_seed(cfg, epoch)) {
            std::mt19937_64 rng(*seed);
            std::shuffle(order.begin(), order.end(), rng);
        }

        for (std::int64_t starti = 0; starti < dataset.size(); starti += cfg.batch_size) {
            const std::int64_t n = std::min(cfg.batch_size, dataset.size() - starti);
            std::vector<double> rows(static_cast<std::size_t>(n * fused_dim));
            std::vector<int> labels(static_cast<std::size_t>(n));
            for (std::int64_t j = 0; j < n; ++j) {
                const std::int64_t src = order[static_cast<std::size_t>(starti + j)];
                std::copy_n(features.data() + src * fused_dim, fused_dim, rows.data() + j * fused_dim);
                labels[static_cast<std::size_t>(j)] = dataset.labels[static_cast<std::size_t>(src)];
            }
            auto f_concat = make_tensor({n, fused_dim}, std::move(rows), false);

            opt.zero_grad();
            auto se = se_forward(fusion.attention, f_concat);
            auto loss = cross_entropy(linear_forward(fusion.classifier, se.attended), labels);
            backward(loss);
            opt.step(lr);
            loss_sum += loss->item() * static_cast<double>(n);
        }
        const double epoch_loss = loss_sum / static_cast<double>(dataset.size());
        require_finite_loss(epoch_loss, cfg.stage, epoch + 1);
        log.epochs.push_back({epoch + 1, epoch_loss, lr, elapsed_seconds(start)});
    }
    return {std::move(fusion), std::move(log)};
}

namespace {

EvalResult evaluate_with(const std::function<TensorPtr(const TensorPtr&)>& forward,
                         std::int64_t model_classes, const Dataset& dataset) {
    validate_dataset(dataset);
    if (model_classes != dataset.num_classes()) {
        throw std::invalid_argument("model has " + std::to_string(model_classes) +
                                    " classes but dataset has " +
                                    std::to_string(dataset.num_classes()));
    }
    ConfusionMatrix cm(dataset.num_classes());
    for (const auto& batch : batches(dataset, 64, std::nullopt)) {
        auto logits = forward(batch.images);
        const std::int64_t n = logits->shape[0], k = logits->shape[1];
        std::vector<int> pred(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            const double* row = logits->data.data() + i * k;
            int best = 0;  // ties resolve to the lowest class index
            for (std::int64_t j = 1; j < k; ++j) {
                if (row[j] > row[best]) best = static_cast<int>(j);
            }
            pred[static_cast<std::size_t>(i)] = best;
        }
        confusion_update(cm, pred, batch.labels);
    }
    EvalResult r{cm, report(cm, dataset.class_names)};
    return r;
}

}  // namespace

EvalResult evaluate(const ClassifierModel& model, const Dataset& dataset) {
    return evaluate_with([&model](const TensorPtr& x) { return classifier_forward(model, x); },
                         model.num_classes(), dataset);
}

EvalResult evaluate(const FusionModel& model, const Dataset& dataset) {
    return evaluate_with([&model](const TensorPtr& x) { return fusion_forward(model, x); },
                         model.num_classes(), dataset);
}

}  // namespace cdae
