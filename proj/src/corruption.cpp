#include "cdae/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace cdae {

namespace {

void require_unit_range(const TensorPtr& x, const char* who) {
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        const double v = x->data[i];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument(std::string(who) + ": value " + std::to_string(v) +
                                        " outside [0,1] at flat index " + std::to_string(i));
        }
    }
}

void require_image_batch(const TensorPtr& x, const char* who) {
    if (x->shape.size() != 4) {
        throw std::invalid_argument(std::string(who) + " expects [N,C,H,W], got " + shape_str(x->shape));
    }
}

}  // namespace

void validate_chaos_params(const ChaosParams& p) {
    if (!(p.r > 0.0 && p.r <= 4.0)) {
        throw std::invalid_argument("chaos parameter r=" + std::to_string(p.r) +
                                    " outside (0,4]; the map would leave [0,1]");
    }
}

TensorPtr logistic_map(const TensorPtr& x, const ChaosParams& params) {
    validate_chaos_params(params);
    require_unit_range(x, "logistic_map");
    const double r = params.r;
    std::vector<double> out(x->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x->data[i];
        out[i] = r * v * (1.0 - v);
    }
    return make_tensor(x->shape, std::move(out), false);
}

TensorPtr mask_corrupt(const TensorPtr& x, const BaselineCorruptionParams& params,
                       std::uint64_t rng_seed) {
    require_image_batch(x, "mask_corrupt");
    if (!(params.mask_ratio >= 0.0 && params.mask_ratio <= 1.0)) {
        throw std::invalid_argument("mask_ratio " + std::to_string(params.mask_ratio) +
                                    " outside [0,1]");
    }
    const std::int64_t N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    const std::int64_t ps = params.patch_size;
    if (ps <= 0 || H % ps != 0 || W % ps != 0) {
        throw std::invalid_argument("patch_size " + std::to_string(ps) + " must divide H=" +
                                    std::to_string(H) + " and W=" + std::to_string(W));
    }
    const std::int64_t ph = H / ps, pw = W / ps;
    const std::int64_t patches = ph * pw;
    const std::int64_t drop = std::llround(params.mask_ratio * static_cast<double>(patches));

    std::vector<double> out = x->data;
    std::mt19937_64 rng(rng_seed);
    std::vector<std::int64_t> order(static_cast<std::size_t>(patches));
    for (std::int64_t n = 0; n < N; ++n) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::int64_t d = 0; d < drop; ++d) {
            const std::int64_t patch = order[static_cast<std::size_t>(d)];
            const std::int64_t py = (patch / pw) * ps;
            const std::int64_t px = (patch % pw) * ps;
            for (std::int64_t c = 0; c < C; ++c) {
                for (std::int64_t dy = 0; dy < ps; ++dy) {
                    double* row = out.data() + (((n * C + c) * H + py + dy) * W + px);
                    std::fill_n(row, ps, 0.0);
                }
            }
        }
    }
    return make_tensor(x->shape, std::move(out), false);
}

TensorPtr gaussian_noise(const Shape& shape, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("sigma must be >= 0, got " + std::to_string(sigma));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma);
    std::vector<double> d(static_cast<std::size_t>(numel(shape)));
    if (sigma > 0.0) {
        for (auto& v : d) v = dist(rng);
    }
    return make_tensor(shape, std::move(d), false);
}

TensorPtr gaussian_corrupt(const TensorPtr& x, const BaselineCorruptionParams& params,
                           std::uint64_t rng_seed) {
    require_image_batch(x, "gaussian_corrupt");
    auto noise = gaussian_noise(x->shape, params.sigma, rng_seed);
    std::vector<double> out(x->data.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::clamp(x->data[i] + noise->data[i], 0.0, 1.0);
    }
    return make_tensor(x->shape, std::move(out), false);
}

std::vector<CollisionPair> collision_pairs(const ChaosParams& params, std::int64_t samples) {
    validate_chaos_params(params);
    if (samples <= 0) throw std::invalid_argument("samples must be > 0");
    std::vector<CollisionPair> pairs;
    pairs.reserve(static_cast<std::size_t>(samples));
    // Evenly spaced v in (0,1); v and 1-v land on the same image because
    // the map is symmetric about 0.5. The degenerate v == 0.5 is skipped.
    for (std::int64_t i = 1; i <= samples; ++i) {
        const double v = static_cast<double>(i) / static_cast<double>(samples + 1);
        const double mirror = 1.0 - v;
        if (v == mirror) continue;
        pairs.push_back({v, mirror, params.r * v * (1.0 - v)});
    }
    return pairs;
}

bool range_check(const TensorPtr& x) {
    for (double v : x->data) {
        if (!(v >= 0.0 && v <= 1.0)) return false;
    }
    return true;
}

}  // namespace cdae
