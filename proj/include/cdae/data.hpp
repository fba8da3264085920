#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cdae/tensor.hpp"

namespace cdae {

struct Dataset {
    TensorPtr images;                      // [N,C,H,W], values in [0,1]
    std::vector<int> labels;               // in [0,K)
    std::vector<std::string> class_names;  // size K

    std::int64_t size() const { return images ? images->shape[0] : 0; }
    std::int64_t num_classes() const { return static_cast<std::int64_t>(class_names.size()); }
    std::int64_t channels() const { return images->shape[1]; }
    std::int64_t height() const { return images->shape[2]; }
    std::int64_t width() const { return images->shape[3]; }
};

// Throws unless the [0,1] pixel range, label range, and shape agreement
// all hold.
void validate_dataset(const Dataset& d);

// Band-limited oscillatory textures: per class one deterministic carrier
// wave at the band centre plus seeded random waves inside the band, plus
// seeded noise, min-max normalized to [0,1]. Frequencies are cycles per
// image edge; bands must not overlap between classes.
struct SyntheticTextureConfig {
    std::int64_t num_classes = 7;
    std::vector<std::int64_t> samples_per_class = {300, 1800, 140, 90, 300, 40, 40};
    std::int64_t image_size = 32;
    std::int64_t channels = 3;
    std::vector<std::pair<double, double>> frequency_bands;  // empty = auto-spaced
    double noise_level = 0.05;
    std::uint64_t seed = 0;

    bool operator==(const SyntheticTextureConfig&) const = default;
};

Dataset generate_synthetic(const SyntheticTextureConfig& cfg);

struct FolderLoadOptions {
    std::set<std::string> extensions = {"png", "ppm", "bmp"};
    std::int64_t image_size = 32;
    bool strict = true;  // lenient mode reports undecodable files to stderr and skips them
};

// root/<class_name>/*.<ext>; class order = sorted subdirectory names,
// file order sorted within a class. Pixels scaled to [0,1], bilinear
// resize to image_size.
Dataset load_image_folder(const std::string& root, const FolderLoadOptions& opts);

// Inverse layout for inspection; images written as PPM (P6).
void export_image_folder(const Dataset& d, const std::string& root);

struct SplitFractions {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;

    bool operator==(const SplitFractions&) const = default;
};

struct Splits {
    Dataset train;
    Dataset val;
    Dataset test;
};

// Seeded, per-class proportional split; partitions are disjoint and
// exhaustive, proportions within one sample per class.
Splits stratified_split(const Dataset& d, const SplitFractions& fractions, std::uint64_t seed);

struct Batch {
    TensorPtr images;
    std::vector<int> labels;
};

// Every sample exactly once, final partial batch included; order is the
// dataset order or a seeded shuffle.
std::vector<Batch> batches(const Dataset& d, std::int64_t batch_size,
                           std::optional<std::uint64_t> shuffle_seed);

}  // namespace cdae
