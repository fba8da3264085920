#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdae/corruption.hpp"
#include "cdae/data.hpp"
#include "cdae/models.hpp"
#include "cdae/pipeline.hpp"
#include "cdae/tensor.hpp"

namespace cdae {

struct FolderDatasetConfig {
    std::string path;
    std::int64_t image_size = 32;
    std::vector<std::string> extensions = {"png", "ppm", "bmp"};
    bool strict = true;

    bool operator==(const FolderDatasetConfig&) const = default;
};

struct DatasetConfig {
    std::optional<SyntheticTextureConfig> synthetic;
    std::optional<FolderDatasetConfig> folder;

    bool operator==(const DatasetConfig&) const = default;
};

enum class CorruptionKind { chaotic, mask, gaussian };

std::string corruption_kind_name(CorruptionKind k);
CorruptionKind parse_corruption_kind(const std::string& name);

struct CorruptionConfig {
    CorruptionKind kind = CorruptionKind::chaotic;
    ChaosParams chaos;
    BaselineCorruptionParams baseline;  // mask/gaussian parameters

    bool operator==(const CorruptionConfig&) const = default;
};

// Everything one run needs, fully resolved: optional seeds are filled in
// deterministically from the master seed at parse time, so the emitted
// snapshot replays the run exactly.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "runs/default";
    Precision precision = Precision::f64;
    DatasetConfig dataset;
    SplitFractions split;
    std::uint64_t split_seed = 0;
    EncoderConfig b1{{32, 64, 64}, 3, 3};
    EncoderConfig b2{{16, 32, 32}, 3, 3};
    std::int64_t se_ratio = 4;
    CorruptionConfig corruption;
    StageConfig stage1;
    StageConfig stage2;
    StageConfig stage3;
    StageConfig pretrain;

    bool operator==(const RunConfig&) const = default;
};

// Defaults with every derived seed resolved against the given master.
RunConfig default_config(std::uint64_t master_seed);

// Parses, validates (unknown keys rejected with their path), applies
// defaults, resolves seeds. seed_override replaces the file's master seed
// before resolution.
RunConfig parse_config(const std::string& path,
                       std::optional<std::uint64_t> seed_override = std::nullopt);
RunConfig parse_config_text(const std::string& json_text,
                            std::optional<std::uint64_t> seed_override = std::nullopt);

std::string config_to_text(const RunConfig& cfg);

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Materializes the configured dataset (synthetic generation or folder
// ingestion).
Dataset build_dataset(const RunConfig& cfg);

// The configured corruption callback for pretraining/ablation.
Corruptor build_corruptor(const CorruptionConfig& cc);

}  // namespace cdae
