#include "cdae/models.hpp"

#include <stdexcept>
#include <string>

#include "cdae/hash.hpp"
#include "cdae/rng.hpp"

namespace cdae {

namespace {

constexpr std::int64_t kDecoderKernel = 6;  // with stride 2, pad 2: exact 2x upsampling

}  // namespace

void validate_encoder_config(const EncoderConfig& cfg) {
    if (cfg.stage_channels.empty()) {
        throw std::invalid_argument("encoder needs at least one stage");
    }
    for (auto c : cfg.stage_channels) {
        if (c <= 0) throw std::invalid_argument("encoder stage channels must be positive");
    }
    if (cfg.kernel_size <= 0 || cfg.input_channels <= 0) {
        throw std::invalid_argument("encoder kernel_size and input_channels must be positive");
    }
}

Encoder::Encoder(const EncoderConfig& cfg, std::uint64_t seed) : config(cfg) {
    validate_encoder_config(cfg);
    std::int64_t in_ch = cfg.input_channels;
    for (std::size_t i = 0; i < cfg.stage_channels.size(); ++i) {
        const std::int64_t out_ch = cfg.stage_channels[i];
        stages.emplace_back(in_ch, out_ch, cfg.kernel_size, /*stride=*/2,
                            /*padding=*/cfg.kernel_size / 2, derive_seed(seed, i));
        in_ch = out_ch;
    }
}

TensorPtr Encoder::forward_map(const TensorPtr& x) const {
    TensorPtr h = x;
    for (const auto& stage : stages) {
        h = relu(conv2d_forward(stage, h));
    }
    return h;
}

std::vector<TensorPtr> Encoder::parameters() const {
    std::vector<TensorPtr> out;
    for (const auto& s : stages) {
        out.push_back(s.weights);
        out.push_back(s.bias);
    }
    return out;
}

Encoder Encoder::clone() const {
    Encoder c;
    c.config = config;
    for (const auto& s : stages) c.stages.push_back(s.clone());
    return c;
}

Autoencoder::Autoencoder(const EncoderConfig& cfg, std::int64_t image_size_, std::uint64_t seed)
    : encoder(cfg, derive_seed(seed, 0x0e)), image_size(image_size_) {
    const std::int64_t stages = cfg.num_stages();
    const std::int64_t factor = std::int64_t{1} << stages;
    if (image_size <= 0 || image_size % factor != 0) {
        throw std::invalid_argument("image size " + std::to_string(image_size) +
                                    " is not divisible by the encoder's total downsampling " +
                                    std::to_string(factor) +
                                    "; decoder output would not match the input shape");
    }
    // Mirror the channel ladder back down to the input channels.
    std::int64_t in_ch = cfg.stage_channels.back();
    for (std::int64_t i = stages - 1; i >= 0; --i) {
        const std::int64_t out_ch = (i == 0) ? cfg.input_channels : cfg.stage_channels[static_cast<std::size_t>(i - 1)];
        decoder.emplace_back(in_ch, out_ch, kDecoderKernel, /*stride=*/2, /*padding=*/2,
                             derive_seed(seed, 0xd0 + static_cast<std::uint64_t>(i)));
        in_ch = out_ch;
    }
}

std::vector<TensorPtr> Autoencoder::parameters() const {
    auto out = encoder.parameters();
    for (const auto& d : decoder) {
        out.push_back(d.weights);
        out.push_back(d.bias);
    }
    return out;
}

std::vector<TensorPtr> Autoencoder::decoder_parameters() const {
    std::vector<TensorPtr> out;
    for (const auto& d : decoder) {
        out.push_back(d.weights);
        out.push_back(d.bias);
    }
    return out;
}

TensorPtr autoencoder_forward(const Autoencoder& ae, const TensorPtr& x_corrupted) {
    if (x_corrupted->shape.size() != 4 || x_corrupted->shape[2] != ae.image_size ||
        x_corrupted->shape[3] != ae.image_size) {
        throw std::invalid_argument("autoencoder configured for " + std::to_string(ae.image_size) +
                                    "x" + std::to_string(ae.image_size) + " input, got " +
                                    shape_str(x_corrupted->shape));
    }
    TensorPtr h = ae.encoder.forward_map(x_corrupted);
    for (std::size_t i = 0; i < ae.decoder.size(); ++i) {
        h = conv_transpose2d_forward(ae.decoder[i], h);
        if (i + 1 < ae.decoder.size()) h = relu(h);
    }
    return sigmoid(h);
}

ClassifierModel::ClassifierModel(const EncoderConfig& cfg, std::int64_t num_classes, std::uint64_t seed)
    : backbone(cfg, derive_seed(seed, 0xb0)),
      head(cfg.feature_dim(), num_classes, derive_seed(seed, 0x4ead)) {}

ClassifierModel::ClassifierModel(Encoder backbone_, std::int64_t num_classes, std::uint64_t seed)
    : backbone(std::move(backbone_)),
      head(backbone.config.feature_dim(), num_classes, derive_seed(seed, 0x4ead)) {}

std::vector<TensorPtr> ClassifierModel::parameters() const {
    auto out = backbone.parameters();
    out.push_back(head.weights);
    out.push_back(head.bias);
    return out;
}

TensorPtr encoder_forward(const ClassifierModel& model, const TensorPtr& x) {
    return global_avg_pool(model.backbone.forward_map(x));
}

TensorPtr classifier_forward(const ClassifierModel& model, const TensorPtr& x) {
    return linear_forward(model.head, encoder_forward(model, x));
}

void freeze(ClassifierModel& model) {
    for (auto& p : model.parameters()) {
        p->requires_grad = false;
        p->grad.clear();
        p->grad.shrink_to_fit();
    }
    model.frozen = true;
}

FusionModel::FusionModel(ClassifierModel b1_, ClassifierModel b2_, std::int64_t num_classes,
                         std::int64_t se_ratio, std::uint64_t seed)
    : b1(std::move(b1_)), b2(std::move(b2_)) {
    if (!b1.frozen || !b2.frozen) {
        throw std::invalid_argument("fusion requires frozen backbones; freeze() both models first");
    }
    const std::int64_t dim = b1.backbone.config.feature_dim() + b2.backbone.config.feature_dim();
    attention = SEBlock(dim, se_ratio, derive_seed(seed, 0xa7));
    classifier = LinearLayer(dim, num_classes, derive_seed(seed, 0xc1));
}

std::vector<TensorPtr> FusionModel::trainable_parameters() const {
    auto out = attention.parameters();
    out.push_back(classifier.weights);
    out.push_back(classifier.bias);
    return out;
}

TensorPtr fusion_forward(const FusionModel& model, const TensorPtr& x) {
    auto f1 = encoder_forward(model.b1, x);
    auto f2 = encoder_forward(model.b2, x);
    auto f_concat = concat_cols(f1, f2);
    auto se = se_forward(model.attention, f_concat);
    return linear_forward(model.classifier, se.attended);
}

std::uint64_t parameter_checksum(const std::vector<TensorPtr>& params) {
    std::uint64_t h = kFnvOffset;
    for (const auto& p : params) {
        h = fnv1a64(p->data.data(), p->data.size() * sizeof(double), h);
    }
    return h;
}

}  // namespace cdae
