#include "cdae/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cdae {

namespace {

TensorPtr he_uniform(Shape shape, std::int64_t fan_in, std::uint64_t seed) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    return uniform(std::move(shape), -bound, bound, seed, true);
}

void require_rank4(const TensorPtr& x, const char* who) {
    if (x->shape.size() != 4) {
        throw std::invalid_argument(std::string(who) + " expects rank-4 input [N,C,H,W], got " +
                                    shape_str(x->shape));
    }
}

void require_channels(const TensorPtr& x, std::int64_t expected, const char* who) {
    if (x->shape[1] != expected) {
        throw std::invalid_argument(std::string(who) + " channel mismatch: input has " +
                                    std::to_string(x->shape[1]) + ", layer expects " +
                                    std::to_string(expected));
    }
}

// Weight indexing shared by the conv kernels. io_swapped=false reads a
// [O,I,KH,KW] array, io_swapped=true reads [I,O,KH,KW].
inline std::int64_t widx(bool io_swapped, std::int64_t o, std::int64_t i,
                         std::int64_t O, std::int64_t I,
                         std::int64_t kh, std::int64_t kw,
                         std::int64_t KH, std::int64_t KW) {
    const std::int64_t major = io_swapped ? (i * O + o) : (o * I + i);
    return (major * KH + kh) * KW + kw;
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
    return a > 0 ? (a + b - 1) / b : a / b;  // b > 0
}

// y[n,o,ho,wo] += sum_{i,kh,kw} x[n,i,ho*s+kh-p, wo*s+kw-p] * W(o,i,kh,kw)
void gather_conv(const double* x, std::int64_t N, std::int64_t CI, std::int64_t H, std::int64_t W,
                 const double* w, bool io_swapped, std::int64_t CO,
                 std::int64_t KH, std::int64_t KW, std::int64_t s, std::int64_t p,
                 double* y, std::int64_t HO, std::int64_t WO) {
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t o = 0; o < CO; ++o) {
            for (std::int64_t i = 0; i < CI; ++i) {
                for (std::int64_t kh = 0; kh < KH; ++kh) {
                    for (std::int64_t kw = 0; kw < KW; ++kw) {
                        const double wv = w[widx(io_swapped, o, i, CO, CI, kh, kw, KH, KW)];
                        if (wv == 0.0) continue;
                        const std::int64_t wo_lo = std::max<std::int64_t>(0, ceil_div(p - kw, s));
                        const std::int64_t num = W - 1 + p - kw;
                        const std::int64_t wo_hi = std::min(WO - 1, num < 0 ? -1 : num / s);
                        for (std::int64_t ho = 0; ho < HO; ++ho) {
                            const std::int64_t hi = ho * s + kh - p;
                            if (hi < 0 || hi >= H) continue;
                            const double* xrow = x + ((n * CI + i) * H + hi) * W + (kw - p);
                            double* yrow = y + ((n * CO + o) * HO + ho) * WO;
                            for (std::int64_t wo = wo_lo; wo <= wo_hi; ++wo) {
                                yrow[wo] += wv * xrow[wo * s];
                            }
                        }
                    }
                }
            }
        }
    }
}

// y[n,o,hi*s+kh-p, wi*s+kw-p] += sum_i x[n,i,hi,wi] * W(o,i,kh,kw)
void scatter_conv(const double* x, std::int64_t N, std::int64_t CI, std::int64_t HI, std::int64_t WI,
                  const double* w, bool io_swapped, std::int64_t CO,
                  std::int64_t KH, std::int64_t KW, std::int64_t s, std::int64_t p,
                  double* y, std::int64_t HO, std::int64_t WO) {
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t o = 0; o < CO; ++o) {
            for (std::int64_t i = 0; i < CI; ++i) {
                for (std::int64_t kh = 0; kh < KH; ++kh) {
                    for (std::int64_t kw = 0; kw < KW; ++kw) {
                        const double wv = w[widx(io_swapped, o, i, CO, CI, kh, kw, KH, KW)];
                        if (wv == 0.0) continue;
                        const std::int64_t wi_lo = std::max<std::int64_t>(0, ceil_div(p - kw, s));
                        const std::int64_t num = WO - 1 + p - kw;
                        const std::int64_t wi_hi = std::min(WI - 1, num < 0 ? -1 : num / s);
                        for (std::int64_t hi = 0; hi < HI; ++hi) {
                            const std::int64_t oh = hi * s + kh - p;
                            if (oh < 0 || oh >= HO) continue;
                            const double* xrow = x + ((n * CI + i) * HI + hi) * WI;
                            double* yrow = y + ((n * CO + o) * HO + oh) * WO + (kw - p);
                            for (std::int64_t wi = wi_lo; wi <= wi_hi; ++wi) {
                                yrow[wi * s] += wv * xrow[wi];
                            }
                        }
                    }
                }
            }
        }
    }
}

// dw(o,i,kh,kw) += sum_{n,ho,wo} gy[n,o,ho,wo] * x[n,i,ho*s+kh-p, wo*s+kw-p]
void wgrad_conv(const double* x, std::int64_t N, std::int64_t CI, std::int64_t H, std::int64_t W,
                const double* gy, std::int64_t CO, std::int64_t HO, std::int64_t WO,
                bool io_swapped, std::int64_t KH, std::int64_t KW, std::int64_t s, std::int64_t p,
                double* dw) {
    for (std::int64_t o = 0; o < CO; ++o) {
        for (std::int64_t i = 0; i < CI; ++i) {
            for (std::int64_t kh = 0; kh < KH; ++kh) {
                for (std::int64_t kw = 0; kw < KW; ++kw) {
                    const std::int64_t wo_lo = std::max<std::int64_t>(0, ceil_div(p - kw, s));
                    const std::int64_t num = W - 1 + p - kw;
                    const std::int64_t wo_hi = std::min(WO - 1, num < 0 ? -1 : num / s);
                    double acc = 0.0;
                    for (std::int64_t n = 0; n < N; ++n) {
                        for (std::int64_t ho = 0; ho < HO; ++ho) {
                            const std::int64_t hi = ho * s + kh - p;
                            if (hi < 0 || hi >= H) continue;
                            const double* xrow = x + ((n * CI + i) * H + hi) * W + (kw - p);
                            const double* gyrow = gy + ((n * CO + o) * HO + ho) * WO;
                            for (std::int64_t wo = wo_lo; wo <= wo_hi; ++wo) {
                                acc += gyrow[wo] * xrow[wo * s];
                            }
                        }
                    }
                    dw[widx(io_swapped, o, i, CO, CI, kh, kw, KH, KW)] += acc;
                }
            }
        }
    }
}

void bias_grad(const double* gy, std::int64_t N, std::int64_t CO, std::int64_t HO, std::int64_t WO,
               double* db) {
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t o = 0; o < CO; ++o) {
            const double* row = gy + (n * CO + o) * HO * WO;
            double acc = 0.0;
            for (std::int64_t j = 0; j < HO * WO; ++j) acc += row[j];
            db[o] += acc;
        }
    }
}

}  // namespace

Conv2dLayer::Conv2dLayer(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel,
                         std::int64_t stride_, std::int64_t padding_, std::uint64_t seed) {
    if (in_ch <= 0 || out_ch <= 0 || kernel <= 0 || stride_ <= 0 || padding_ < 0) {
        throw std::invalid_argument("invalid Conv2dLayer geometry");
    }
    weights = he_uniform({out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel, seed);
    bias = zeros({out_ch}, true);
    stride = stride_;
    padding = padding_;
}

Conv2dLayer Conv2dLayer::clone() const {
    Conv2dLayer c;
    c.weights = weights->clone();
    c.bias = bias->clone();
    c.stride = stride;
    c.padding = padding;
    return c;
}

ConvTranspose2dLayer::ConvTranspose2dLayer(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel,
                                           std::int64_t stride_, std::int64_t padding_, std::uint64_t seed) {
    if (in_ch <= 0 || out_ch <= 0 || kernel <= 0 || stride_ <= 0 || padding_ < 0) {
        throw std::invalid_argument("invalid ConvTranspose2dLayer geometry");
    }
    weights = he_uniform({in_ch, out_ch, kernel, kernel}, in_ch * kernel * kernel, seed);
    bias = zeros({out_ch}, true);
    stride = stride_;
    padding = padding_;
}

ConvTranspose2dLayer ConvTranspose2dLayer::clone() const {
    ConvTranspose2dLayer c;
    c.weights = weights->clone();
    c.bias = bias->clone();
    c.stride = stride;
    c.padding = padding;
    return c;
}

LinearLayer::LinearLayer(std::int64_t in_dim_, std::int64_t out_dim_, std::uint64_t seed) {
    if (in_dim_ <= 0 || out_dim_ <= 0) throw std::invalid_argument("invalid LinearLayer dims");
    weights = he_uniform({out_dim_, in_dim_}, in_dim_, seed);
    bias = zeros({out_dim_}, true);
}

LinearLayer LinearLayer::clone() const {
    LinearLayer c;
    c.weights = weights->clone();
    c.bias = bias->clone();
    return c;
}

SEBlock::SEBlock(std::int64_t dim, std::int64_t ratio_, std::uint64_t seed) {
    if (dim <= 0 || ratio_ <= 0) throw std::invalid_argument("invalid SEBlock config");
    const std::int64_t hidden = std::max<std::int64_t>(1, dim / ratio_);
    reduce = LinearLayer(dim, hidden, seed);
    expand = LinearLayer(hidden, dim, seed + 1);
    ratio = ratio_;
}

std::vector<TensorPtr> SEBlock::parameters() const {
    return {reduce.weights, reduce.bias, expand.weights, expand.bias};
}

SEBlock SEBlock::clone() const {
    SEBlock c;
    c.reduce = reduce.clone();
    c.expand = expand.clone();
    c.ratio = ratio;
    return c;
}

TensorPtr conv2d_forward(const Conv2dLayer& layer, const TensorPtr& x) {
    require_rank4(x, "conv2d");
    require_channels(x, layer.in_channels(), "conv2d");
    const std::int64_t N = x->shape[0], CI = x->shape[1], H = x->shape[2], W = x->shape[3];
    const std::int64_t CO = layer.out_channels();
    const std::int64_t K = layer.weights->shape[2];
    const std::int64_t s = layer.stride, p = layer.padding;
    const std::int64_t HO = (H + 2 * p - K) / s + 1;
    const std::int64_t WO = (W + 2 * p - K) / s + 1;
    if (H + 2 * p < K || W + 2 * p < K || HO <= 0 || WO <= 0) {
        throw std::invalid_argument("conv2d output would be empty for input " + shape_str(x->shape));
    }

    std::vector<double> y(static_cast<std::size_t>(N * CO * HO * WO));
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t o = 0; o < CO; ++o)
            std::fill_n(y.begin() + (n * CO + o) * HO * WO, HO * WO, layer.bias->data[static_cast<std::size_t>(o)]);
    gather_conv(x->data.data(), N, CI, H, W, layer.weights->data.data(), false, CO, K, K, s, p,
                y.data(), HO, WO);

    auto wt = layer.weights;
    auto bt = layer.bias;
    return make_op({N, CO, HO, WO}, std::move(y), {x, wt, bt},
                            [x, wt, bt, N, CI, H, W, CO, K, s, p, HO, WO](Tensor& out) {
        if (x->requires_grad) {
            std::vector<double> dx(x->data.size(), 0.0);
            scatter_conv(out.grad.data(), N, CO, HO, WO, wt->data.data(), true, CI, K, K, s, p,
                         dx.data(), H, W);
            x->accumulate_grad(dx);
        }
        if (wt->requires_grad) {
            std::vector<double> dw(wt->data.size(), 0.0);
            wgrad_conv(x->data.data(), N, CI, H, W, out.grad.data(), CO, HO, WO, false, K, K, s, p,
                       dw.data());
            wt->accumulate_grad(dw);
        }
        if (bt->requires_grad) {
            std::vector<double> db(bt->data.size(), 0.0);
            bias_grad(out.grad.data(), N, CO, HO, WO, db.data());
            bt->accumulate_grad(db);
        }
    });
}

TensorPtr conv_transpose2d_forward(const ConvTranspose2dLayer& layer, const TensorPtr& x) {
    require_rank4(x, "conv_transpose2d");
    require_channels(x, layer.in_channels(), "conv_transpose2d");
    const std::int64_t N = x->shape[0], CI = x->shape[1], HI = x->shape[2], WI = x->shape[3];
    const std::int64_t CO = layer.out_channels();
    const std::int64_t K = layer.weights->shape[2];
    const std::int64_t s = layer.stride, p = layer.padding;
    const std::int64_t HO = (HI - 1) * s - 2 * p + K;
    const std::int64_t WO = (WI - 1) * s - 2 * p + K;
    if (HO <= 0 || WO <= 0) {
        throw std::invalid_argument("conv_transpose2d output would be empty for input " + shape_str(x->shape));
    }

    std::vector<double> y(static_cast<std::size_t>(N * CO * HO * WO));
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t o = 0; o < CO; ++o)
            std::fill_n(y.begin() + (n * CO + o) * HO * WO, HO * WO, layer.bias->data[static_cast<std::size_t>(o)]);
    scatter_conv(x->data.data(), N, CI, HI, WI, layer.weights->data.data(), true, CO, K, K, s, p,
                 y.data(), HO, WO);

    auto wt = layer.weights;
    auto bt = layer.bias;
    return make_op({N, CO, HO, WO}, std::move(y), {x, wt, bt},
                            [x, wt, bt, N, CI, HI, WI, CO, K, s, p, HO, WO](Tensor& out) {
        if (x->requires_grad) {
            std::vector<double> dx(x->data.size(), 0.0);
            gather_conv(out.grad.data(), N, CO, HO, WO, wt->data.data(), false, CI, K, K, s, p,
                        dx.data(), HI, WI);
            x->accumulate_grad(dx);
        }
        if (wt->requires_grad) {
            std::vector<double> dw(wt->data.size(), 0.0);
            wgrad_conv(out.grad.data(), N, CO, HO, WO, x->data.data(), CI, HI, WI, false, K, K, s, p,
                       dw.data());
            wt->accumulate_grad(dw);
        }
        if (bt->requires_grad) {
            std::vector<double> db(bt->data.size(), 0.0);
            bias_grad(out.grad.data(), N, CO, HO, WO, db.data());
            bt->accumulate_grad(db);
        }
    });
}

TensorPtr linear_forward(const LinearLayer& layer, const TensorPtr& x) {
    if (x->shape.size() != 2) {
        throw std::invalid_argument("linear expects [N,in], got " + shape_str(x->shape));
    }
    if (x->shape[1] != layer.in_dim()) {
        throw std::invalid_argument("linear dimension mismatch: input " + shape_str(x->shape) +
                                    ", weights " + shape_str(layer.weights->shape));
    }
    return add(matmul(x, transpose2d(layer.weights)), layer.bias);
}

SEOutput se_forward(const SEBlock& block, const TensorPtr& f_concat) {
    if (f_concat->shape.size() != 2 || f_concat->shape[1] != block.dim()) {
        throw std::invalid_argument("se_forward expects [N," + std::to_string(block.dim()) +
                                    "], got " + shape_str(f_concat->shape));
    }
    auto hidden = relu(linear_forward(block.reduce, f_concat));
    auto gate = sigmoid(linear_forward(block.expand, hidden));
    return SEOutput{gate, mul(f_concat, gate)};
}

TensorPtr softmax(const TensorPtr& logits) {
    if (logits->shape.size() != 2) {
        throw std::invalid_argument("softmax expects [N,K], got " + shape_str(logits->shape));
    }
    const std::int64_t N = logits->shape[0], K = logits->shape[1];
    std::vector<double> p(logits->data.size());
    for (std::int64_t n = 0; n < N; ++n) {
        const double* row = logits->data.data() + n * K;
        double mx = row[0];
        for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double denom = 0.0;
        for (std::int64_t k = 0; k < K; ++k) {
            const double e = std::exp(row[k] - mx);
            p[static_cast<std::size_t>(n * K + k)] = e;
            denom += e;
        }
        for (std::int64_t k = 0; k < K; ++k) p[static_cast<std::size_t>(n * K + k)] /= denom;
    }
    auto probs = p;  // value copy for the backward closure
    auto x = logits;
    return make_op({N, K}, std::move(p), {x}, [x, probs, N, K](Tensor& out) {
        if (!x->requires_grad) return;
        std::vector<double> g(x->data.size());
        for (std::int64_t n = 0; n < N; ++n) {
            double dot = 0.0;
            for (std::int64_t k = 0; k < K; ++k) {
                dot += out.grad[static_cast<std::size_t>(n * K + k)] * probs[static_cast<std::size_t>(n * K + k)];
            }
            for (std::int64_t k = 0; k < K; ++k) {
                const std::size_t i = static_cast<std::size_t>(n * K + k);
                g[i] = probs[i] * (out.grad[i] - dot);
            }
        }
        x->accumulate_grad(g);
    });
}

TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& labels) {
    if (logits->shape.size() != 2) {
        throw std::invalid_argument("cross_entropy expects [N,K] logits, got " + shape_str(logits->shape));
    }
    const std::int64_t N = logits->shape[0], K = logits->shape[1];
    if (static_cast<std::int64_t>(labels.size()) != N) {
        throw std::invalid_argument("cross_entropy label count " + std::to_string(labels.size()) +
                                    " does not match batch " + std::to_string(N));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= K) {
            throw std::invalid_argument("cross_entropy label " + std::to_string(labels[i]) +
                                        " out of range [0," + std::to_string(K) + ") at index " +
                                        std::to_string(i));
        }
    }

    std::vector<double> probs(logits->data.size());
    double loss = 0.0;
    for (std::int64_t n = 0; n < N; ++n) {
        const double* row = logits->data.data() + n * K;
        double mx = row[0];
        for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double denom = 0.0;
        for (std::int64_t k = 0; k < K; ++k) {
            const double e = std::exp(row[k] - mx);
            probs[static_cast<std::size_t>(n * K + k)] = e;
            denom += e;
        }
        for (std::int64_t k = 0; k < K; ++k) probs[static_cast<std::size_t>(n * K + k)] /= denom;
        // -log softmax(y) computed in shifted space for stability
        loss += std::log(denom) - (row[labels[static_cast<std::size_t>(n)]] - mx);
    }
    loss /= static_cast<double>(N);

    auto x = logits;
    return make_op({1}, {loss}, {x}, [x, probs, labels, N, K](Tensor& out) {
        if (!x->requires_grad) return;
        const double go = out.grad[0] / static_cast<double>(N);
        std::vector<double> g(x->data.size());
        for (std::int64_t n = 0; n < N; ++n) {
            for (std::int64_t k = 0; k < K; ++k) {
                const std::size_t i = static_cast<std::size_t>(n * K + k);
                const double onehot = (k == labels[static_cast<std::size_t>(n)]) ? 1.0 : 0.0;
                g[i] = go * (probs[i] - onehot);
            }
        }
        x->accumulate_grad(g);
    });
}

TensorPtr mse(const TensorPtr& recon, const TensorPtr& target) {
    if (recon->shape != target->shape) {
        throw std::invalid_argument("mse shape mismatch: " + shape_str(recon->shape) + " vs " +
                                    shape_str(target->shape));
    }
    const double inv = 1.0 / static_cast<double>(recon->size());
    double loss = 0.0;
    for (std::size_t i = 0; i < recon->data.size(); ++i) {
        const double d = recon->data[i] - target->data[i];
        loss += d * d;
    }
    loss *= inv;
    auto a = recon;
    auto b = target;
    return make_op({1}, {loss}, {a, b}, [a, b, inv](Tensor& out) {
        const double go = out.grad[0];
        if (a->requires_grad) {
            std::vector<double> g(a->data.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] = go * 2.0 * inv * (a->data[i] - b->data[i]);
            }
            a->accumulate_grad(g);
        }
        if (b->requires_grad) {
            std::vector<double> g(b->data.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] = go * 2.0 * inv * (b->data[i] - a->data[i]);
            }
            b->accumulate_grad(g);
        }
    });
}

TensorPtr global_avg_pool(const TensorPtr& x) {
    require_rank4(x, "global_avg_pool");
    const std::int64_t N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    const double inv = 1.0 / static_cast<double>(H * W);
    std::vector<double> y(static_cast<std::size_t>(N * C));
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t c = 0; c < C; ++c) {
            const double* plane = x->data.data() + (n * C + c) * H * W;
            double acc = 0.0;
            for (std::int64_t j = 0; j < H * W; ++j) acc += plane[j];
            y[static_cast<std::size_t>(n * C + c)] = acc * inv;
        }
    }
    return make_op({N, C}, std::move(y), {x}, [x, N, C, H, W, inv](Tensor& out) {
        if (!x->requires_grad) return;
        std::vector<double> g(x->data.size());
        for (std::int64_t n = 0; n < N; ++n) {
            for (std::int64_t c = 0; c < C; ++c) {
                const double gv = out.grad[static_cast<std::size_t>(n * C + c)] * inv;
                double* plane = g.data() + (n * C + c) * H * W;
                std::fill_n(plane, H * W, gv);
            }
        }
        x->accumulate_grad(g);
    });
}

}  // namespace cdae
