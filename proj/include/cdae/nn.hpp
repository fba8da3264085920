#pragma once

#include <cstdint>
#include <vector>

#include "cdae/tensor.hpp"

namespace cdae {

// Layers own their parameter tensors; copies share parameters (use
// clone() for an independent set of weights).

struct Conv2dLayer {
    TensorPtr weights;  // [out_ch, in_ch, kh, kw]
    TensorPtr bias;     // [out_ch]
    std::int64_t stride = 1;
    std::int64_t padding = 0;

    Conv2dLayer() = default;
    Conv2dLayer(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel,
                std::int64_t stride, std::int64_t padding, std::uint64_t seed);

    std::int64_t in_channels() const { return weights->shape[1]; }
    std::int64_t out_channels() const { return weights->shape[0]; }
    std::vector<TensorPtr> parameters() const { return {weights, bias}; }
    Conv2dLayer clone() const;
};

struct ConvTranspose2dLayer {
    TensorPtr weights;  // [in_ch, out_ch, kh, kw]
    TensorPtr bias;     // [out_ch]
    std::int64_t stride = 1;
    std::int64_t padding = 0;

    ConvTranspose2dLayer() = default;
    ConvTranspose2dLayer(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel,
                         std::int64_t stride, std::int64_t padding, std::uint64_t seed);

    std::int64_t in_channels() const { return weights->shape[0]; }
    std::int64_t out_channels() const { return weights->shape[1]; }
    std::vector<TensorPtr> parameters() const { return {weights, bias}; }
    ConvTranspose2dLayer clone() const;
};

struct LinearLayer {
    TensorPtr weights;  // [out_dim, in_dim]
    TensorPtr bias;     // [out_dim]

    LinearLayer() = default;
    LinearLayer(std::int64_t in_dim, std::int64_t out_dim, std::uint64_t seed);

    std::int64_t in_dim() const { return weights->shape[1]; }
    std::int64_t out_dim() const { return weights->shape[0]; }
    std::vector<TensorPtr> parameters() const { return {weights, bias}; }
    LinearLayer clone() const;
};

// Squeeze-and-excite bottleneck: dim -> dim/ratio -> dim, sigmoid gate.
struct SEBlock {
    LinearLayer reduce;
    LinearLayer expand;
    std::int64_t ratio = 4;

    SEBlock() = default;
    SEBlock(std::int64_t dim, std::int64_t ratio, std::uint64_t seed);

    std::int64_t dim() const { return expand.out_dim(); }
    std::vector<TensorPtr> parameters() const;
    SEBlock clone() const;
};

struct SEOutput {
    TensorPtr gate;      // w in (0,1)^d
    TensorPtr attended;  // input ⊙ w
};

// out spatial = floor((in + 2*pad - k)/stride) + 1
TensorPtr conv2d_forward(const Conv2dLayer& layer, const TensorPtr& x);

// out spatial = (in - 1)*stride - 2*pad + k; with tied weights this is
// the adjoint of conv2d_forward as a linear map.
TensorPtr conv_transpose2d_forward(const ConvTranspose2dLayer& layer, const TensorPtr& x);

TensorPtr linear_forward(const LinearLayer& layer, const TensorPtr& x);  // [N,in] -> [N,out]

SEOutput se_forward(const SEBlock& block, const TensorPtr& f_concat);  // [N,d]

// Row-wise softmax with max subtraction; shift invariant and overflow safe.
TensorPtr softmax(const TensorPtr& logits);

// Mean over the batch of -log softmax(logits)[label].
TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& labels);

// Mean squared difference over all elements.
TensorPtr mse(const TensorPtr& recon, const TensorPtr& target);

TensorPtr global_avg_pool(const TensorPtr& x);  // [N,C,H,W] -> [N,C]

}  // namespace cdae
