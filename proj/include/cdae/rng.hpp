#pragma once

#include <cstdint>

namespace cdae {

// splitmix64 step; good avalanche, used only for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic child seed from a base seed and a role salt. Every
// sub-component (data gen, splits, per-layer init, per-epoch shuffles)
// gets its stream this way so one master seed fixes the whole run.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    return splitmix64(splitmix64(base) ^ splitmix64(salt * 0x9e3779b97f4a7c15ULL + 1));
}

}  // namespace cdae
