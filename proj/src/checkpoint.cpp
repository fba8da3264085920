#include "cdae/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cdae/hash.hpp"

namespace cdae {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'D', 'A', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& buf, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    return v;
}

std::uint64_t read_u64(const std::string& buf, std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    return v;
}

json encoder_topology(const EncoderConfig& cfg) {
    return json{{"stage_channels", cfg.stage_channels},
                {"kernel_size", cfg.kernel_size},
                {"input_channels", cfg.input_channels}};
}

EncoderConfig encoder_from_topology(const json& j) {
    EncoderConfig cfg;
    cfg.stage_channels = j.at("stage_channels").get<std::vector<std::int64_t>>();
    cfg.kernel_size = j.at("kernel_size").get<std::int64_t>();
    cfg.input_channels = j.at("input_channels").get<std::int64_t>();
    return cfg;
}

void append_params(json& header, std::string& blob, const std::string& prefix,
                   const std::vector<TensorPtr>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        header["params"].push_back(json{{"name", prefix + std::to_string(i)}, {"shape", p->shape}});
        for (double v : p->data) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            append_u64(blob, bits);
        }
    }
}

void write_file(const std::string& path, const json& header, const std::string& blob) {
    std::string buf(kMagic, sizeof(kMagic));
    append_u32(buf, kVersion);
    const std::string header_text = header.dump();
    append_u64(buf, header_text.size());
    buf += header_text;
    buf += blob;
    append_u64(buf, fnv1a64(buf.data(), buf.size()));

    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot write checkpoint '" + path + "'");
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw CheckpointError("short write to checkpoint '" + path + "'");
}

struct LoadedFile {
    json header;
    std::string blob;
};

LoadedFile read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(kMagic) + 4 + 8 + 8 ||
        std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError("'" + path + "' is not a checkpoint file");
    }
    const std::uint64_t stored_hash = read_u64(buf, buf.size() - 8);
    const std::uint64_t actual_hash = fnv1a64(buf.data(), buf.size() - 8);
    if (stored_hash != actual_hash) {
        throw CheckpointError("checksum mismatch in '" + path + "'; file is truncated or corrupt");
    }
    const std::uint32_t version = read_u32(buf, sizeof(kMagic));
    if (version != kVersion) {
        throw CheckpointError("checkpoint version " + std::to_string(version) + " in '" + path +
                              "' is not supported (expected " + std::to_string(kVersion) + ")");
    }
    const std::uint64_t header_len = read_u64(buf, sizeof(kMagic) + 4);
    const std::size_t header_off = sizeof(kMagic) + 4 + 8;
    if (header_off + header_len + 8 > buf.size()) {
        throw CheckpointError("malformed checkpoint header in '" + path + "'");
    }

    LoadedFile lf;
    try {
        lf.header = json::parse(buf.substr(header_off, header_len));
    } catch (const json::parse_error& e) {
        throw CheckpointError("malformed checkpoint header in '" + path + "': " + e.what());
    }
    lf.blob = buf.substr(header_off + header_len, buf.size() - 8 - header_off - header_len);
    return lf;
}

void restore_params(const LoadedFile& lf, const std::vector<TensorPtr>& params,
                    const std::string& path) {
    const auto& index = lf.header.at("params");
    if (index.size() != params.size()) {
        throw CheckpointError("checkpoint '" + path + "' carries " + std::to_string(index.size()) +
                              " parameters, model expects " + std::to_string(params.size()));
    }
    std::size_t off = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto shape = index[i].at("shape").get<Shape>();
        if (shape != params[i]->shape) {
            throw CheckpointError("parameter shape mismatch at '" +
                                  index[i].at("name").get<std::string>() + "' in '" + path + "'");
        }
        if (off + params[i]->data.size() * 8 > lf.blob.size()) {
            throw CheckpointError("checkpoint '" + path + "' parameter blob is too short");
        }
        for (double& v : params[i]->data) {
            std::uint64_t bits = read_u64(lf.blob, off);
            std::memcpy(&v, &bits, sizeof(v));
            off += 8;
        }
    }
    if (off != lf.blob.size()) {
        throw CheckpointError("checkpoint '" + path + "' has trailing parameter data");
    }
}

json meta_to_json(const CheckpointMeta& meta) {
    return json{{"stage", meta.stage}, {"epoch", meta.epoch}, {"seed", meta.seed}};
}

CheckpointMeta meta_from_json(const json& j) {
    CheckpointMeta meta;
    meta.stage = j.at("stage").get<std::string>();
    meta.epoch = j.at("epoch").get<std::int64_t>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    return meta;
}

ModelKind kind_from_header(const json& header, const std::string& path) {
    const std::string kind = header.at("model").get<std::string>();
    if (kind == "classifier") return ModelKind::classifier;
    if (kind == "autoencoder") return ModelKind::autoencoder;
    if (kind == "fusion") return ModelKind::fusion;
    throw CheckpointError("unknown model kind '" + kind + "' in '" + path + "'");
}

}  // namespace

void save_checkpoint(const ClassifierModel& model, const CheckpointMeta& meta,
                     const std::string& path) {
    json header{{"model", "classifier"},
                {"encoder", encoder_topology(model.backbone.config)},
                {"num_classes", model.num_classes()},
                {"frozen", model.frozen},
                {"meta", meta_to_json(meta)},
                {"params", json::array()}};
    std::string blob;
    append_params(header, blob, "p", model.parameters());
    write_file(path, header, blob);
}

void save_checkpoint(const Autoencoder& model, const CheckpointMeta& meta,
                     const std::string& path) {
    json header{{"model", "autoencoder"},
                {"encoder", encoder_topology(model.encoder.config)},
                {"image_size", model.image_size},
                {"meta", meta_to_json(meta)},
                {"params", json::array()}};
    std::string blob;
    append_params(header, blob, "p", model.parameters());
    write_file(path, header, blob);
}

void save_checkpoint(const FusionModel& model, const CheckpointMeta& meta,
                     const std::string& path) {
    json header{{"model", "fusion"},
                {"b1", json{{"encoder", encoder_topology(model.b1.backbone.config)},
                            {"num_classes", model.b1.num_classes()}}},
                {"b2", json{{"encoder", encoder_topology(model.b2.backbone.config)},
                            {"num_classes", model.b2.num_classes()}}},
                {"num_classes", model.num_classes()},
                {"se_ratio", model.attention.ratio},
                {"meta", meta_to_json(meta)},
                {"params", json::array()}};
    std::string blob;
    auto params = model.b1.parameters();
    auto more = model.b2.parameters();
    params.insert(params.end(), more.begin(), more.end());
    auto trainable = model.trainable_parameters();
    params.insert(params.end(), trainable.begin(), trainable.end());
    append_params(header, blob, "p", params);
    write_file(path, header, blob);
}

ModelKind peek_checkpoint_kind(const std::string& path) {
    return kind_from_header(read_file(path).header, path);
}

ClassifierModel load_classifier_checkpoint(const std::string& path, CheckpointMeta* meta) {
    const LoadedFile lf = read_file(path);
    if (kind_from_header(lf.header, path) != ModelKind::classifier) {
        throw CheckpointError("'" + path + "' does not hold a classifier model");
    }
    ClassifierModel model(encoder_from_topology(lf.header.at("encoder")),
                          lf.header.at("num_classes").get<std::int64_t>(), /*seed=*/0);
    restore_params(lf, model.parameters(), path);
    if (lf.header.at("frozen").get<bool>()) freeze(model);
    if (meta) *meta = meta_from_json(lf.header.at("meta"));
    return model;
}

Autoencoder load_autoencoder_checkpoint(const std::string& path, CheckpointMeta* meta) {
    const LoadedFile lf = read_file(path);
    if (kind_from_header(lf.header, path) != ModelKind::autoencoder) {
        throw CheckpointError("'" + path + "' does not hold an autoencoder");
    }
    Autoencoder model(encoder_from_topology(lf.header.at("encoder")),
                      lf.header.at("image_size").get<std::int64_t>(), /*seed=*/0);
    restore_params(lf, model.parameters(), path);
    if (meta) *meta = meta_from_json(lf.header.at("meta"));
    return model;
}

FusionModel load_fusion_checkpoint(const std::string& path, CheckpointMeta* meta) {
    const LoadedFile lf = read_file(path);
    if (kind_from_header(lf.header, path) != ModelKind::fusion) {
        throw CheckpointError("'" + path + "' does not hold a fusion model");
    }
    ClassifierModel b1(encoder_from_topology(lf.header.at("b1").at("encoder")),
                       lf.header.at("b1").at("num_classes").get<std::int64_t>(), 0);
    ClassifierModel b2(encoder_from_topology(lf.header.at("b2").at("encoder")),
                       lf.header.at("b2").at("num_classes").get<std::int64_t>(), 0);
    freeze(b1);
    freeze(b2);
    FusionModel model(std::move(b1), std::move(b2),
                      lf.header.at("num_classes").get<std::int64_t>(),
                      lf.header.at("se_ratio").get<std::int64_t>(), 0);
    auto params = model.b1.parameters();
    auto more = model.b2.parameters();
    params.insert(params.end(), more.begin(), more.end());
    auto trainable = model.trainable_parameters();
    params.insert(params.end(), trainable.begin(), trainable.end());
    restore_params(lf, params, path);
    if (meta) *meta = meta_from_json(lf.header.at("meta"));
    return model;
}

}  // namespace cdae
