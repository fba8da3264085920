#pragma once

#include <cstdint>
#include <vector>

#include "cdae/tensor.hpp"

namespace cdae {

// Logistic-map parameter; r <= 4 keeps the map inside [0,1] (max r/4).
struct ChaosParams {
    double r = 3.99;

    bool operator==(const ChaosParams&) const = default;
};

void validate_chaos_params(const ChaosParams& p);

struct BaselineCorruptionParams {
    enum class Kind { mask, gaussian };
    Kind kind = Kind::mask;
    double mask_ratio = 0.5;
    std::int64_t patch_size = 4;
    double sigma = 0.1;
    std::uint64_t seed = 0;

    bool operator==(const BaselineCorruptionParams&) const = default;
};

// Single application of x' = r*x*(1-x) to every channel value of every
// pixel. Pure and deterministic; the map is never iterated here.
// Rejects inputs outside [0,1] naming the offending flat index.
TensorPtr logistic_map(const TensorPtr& x, const ChaosParams& params);

// Zeroes a seeded selection of square patches; everything else is copied
// bit-identically. round(mask_ratio * patch_count) patches per image.
TensorPtr mask_corrupt(const TensorPtr& x, const BaselineCorruptionParams& params,
                       std::uint64_t rng_seed);

// Adds seeded N(0, sigma^2) noise and clamps to [0,1].
TensorPtr gaussian_corrupt(const TensorPtr& x, const BaselineCorruptionParams& params,
                           std::uint64_t rng_seed);

// The noise field used by gaussian_corrupt, exposed so its moments can be
// checked before clamping.
TensorPtr gaussian_noise(const Shape& shape, double sigma, std::uint64_t seed);

// Witnesses of non-bijectivity: pairs (v, 1-v) sharing one image under
// the map. v = 0.5 (the symmetric fixed point of the pairing) is skipped.
struct CollisionPair {
    double a = 0.0;
    double b = 0.0;
    double image = 0.0;
};
std::vector<CollisionPair> collision_pairs(const ChaosParams& params, std::int64_t samples);

// True iff every value lies in [0,1]; vacuously true for empty input.
bool range_check(const TensorPtr& x);

}  // namespace cdae
