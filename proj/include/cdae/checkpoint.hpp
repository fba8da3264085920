#pragma once

#include <cstdint>
#include <string>

#include "cdae/models.hpp"

namespace cdae {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
    std::string stage;
    std::int64_t epoch = 0;
    std::uint64_t seed = 0;

    bool operator==(const CheckpointMeta&) const = default;
};

enum class ModelKind { classifier, autoencoder, fusion };

// Versioned binary container: magic, version, a JSON topology/metadata
// header, little-endian 64-bit float parameter blobs, and a trailing
// checksum. Round trips are bit-exact.
void save_checkpoint(const ClassifierModel& model, const CheckpointMeta& meta,
                     const std::string& path);
void save_checkpoint(const Autoencoder& model, const CheckpointMeta& meta, const std::string& path);
void save_checkpoint(const FusionModel& model, const CheckpointMeta& meta, const std::string& path);

ModelKind peek_checkpoint_kind(const std::string& path);

ClassifierModel load_classifier_checkpoint(const std::string& path,
                                           CheckpointMeta* meta = nullptr);
Autoencoder load_autoencoder_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);
FusionModel load_fusion_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace cdae
