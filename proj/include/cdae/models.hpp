#pragma once

#include <cstdint>
#include <vector>

#include "cdae/nn.hpp"
#include "cdae/tensor.hpp"

namespace cdae {

// Small strided-conv encoder standing in for a large pretrained backbone.
// Every stage halves the spatial size; the feature width is the last
// stage's channel count.
struct EncoderConfig {
    std::vector<std::int64_t> stage_channels = {32, 64, 64};
    std::int64_t kernel_size = 3;
    std::int64_t input_channels = 3;

    std::int64_t feature_dim() const { return stage_channels.back(); }
    std::int64_t num_stages() const { return static_cast<std::int64_t>(stage_channels.size()); }

    bool operator==(const EncoderConfig&) const = default;
};

void validate_encoder_config(const EncoderConfig& cfg);

struct Encoder {
    EncoderConfig config;
    std::vector<Conv2dLayer> stages;

    Encoder() = default;
    Encoder(const EncoderConfig& cfg, std::uint64_t seed);

    // Final feature map [N, feature_dim, H/2^S, W/2^S], ReLU applied.
    TensorPtr forward_map(const TensorPtr& x) const;
    std::vector<TensorPtr> parameters() const;
    Encoder clone() const;
};

// Encoder plus a mirrored transposed-conv decoder; the decoder doubles
// the spatial size per stage and ends in a sigmoid, so reconstructions
// match the input shape and stay inside (0,1).
struct Autoencoder {
    Encoder encoder;
    std::vector<ConvTranspose2dLayer> decoder;
    std::int64_t image_size = 0;

    Autoencoder() = default;
    Autoencoder(const EncoderConfig& cfg, std::int64_t image_size, std::uint64_t seed);

    std::vector<TensorPtr> parameters() const;
    std::vector<TensorPtr> encoder_parameters() const { return encoder.parameters(); }
    std::vector<TensorPtr> decoder_parameters() const;
};

TensorPtr autoencoder_forward(const Autoencoder& ae, const TensorPtr& x_corrupted);

struct ClassifierModel {
    Encoder backbone;
    LinearLayer head;
    bool frozen = false;

    ClassifierModel() = default;
    ClassifierModel(const EncoderConfig& cfg, std::int64_t num_classes, std::uint64_t seed);
    ClassifierModel(Encoder backbone_, std::int64_t num_classes, std::uint64_t seed);

    std::int64_t num_classes() const { return head.out_dim(); }
    std::vector<TensorPtr> parameters() const;
};

// Globally pooled pre-head activations: the feature vector the fusion
// model taps.
TensorPtr encoder_forward(const ClassifierModel& model, const TensorPtr& x);

TensorPtr classifier_forward(const ClassifierModel& model, const TensorPtr& x);

// Flags every parameter non-trainable. One-way: rebuild the model to
// train again.
void freeze(ClassifierModel& model);

// Two frozen backbones feeding a trainable SE gate over the concatenated
// features [B1 then B2] and a trainable linear classifier.
struct FusionModel {
    ClassifierModel b1;
    ClassifierModel b2;
    SEBlock attention;
    LinearLayer classifier;

    FusionModel() = default;
    FusionModel(ClassifierModel b1_, ClassifierModel b2_, std::int64_t num_classes,
                std::int64_t se_ratio, std::uint64_t seed);

    std::int64_t num_classes() const { return classifier.out_dim(); }
    std::int64_t fused_dim() const { return attention.dim(); }
    std::vector<TensorPtr> trainable_parameters() const;  // attention + classifier only
};

TensorPtr fusion_forward(const FusionModel& model, const TensorPtr& x);

// Order-sensitive bit hash of the parameter values; unchanged checksum
// means unchanged weights.
std::uint64_t parameter_checksum(const std::vector<TensorPtr>& params);

}  // namespace cdae
