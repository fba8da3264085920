#include "cdae/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace cdae {

namespace {

std::atomic<Precision> g_precision{Precision::f64};

void round_to_precision(std::vector<double>& v) {
    if (g_precision.load(std::memory_order_relaxed) == Precision::f32) {
        for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
    }
}

[[noreturn]] void shape_error(const std::string& what, const Shape& a, const Shape& b) {
    throw std::invalid_argument(what + ": " + shape_str(a) + " vs " + shape_str(b));
}

// Broadcast classification for binary elementwise ops: identical shapes,
// a one-element operand, or the smaller shape equals the trailing axes of
// the larger (replicated over the leading axes).
struct BroadcastPlan {
    bool swap = false;        // true when `a` is the broadcast (smaller) side
    std::int64_t repeat = 1;  // leading-axis replication count
    std::int64_t inner = 1;   // elements of the smaller operand
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
    BroadcastPlan plan;
    if (a == b) {
        plan.inner = numel(a);
        return plan;
    }
    const Shape* big = &a;
    const Shape* small = &b;
    if (numel(a) < numel(b)) {
        std::swap(big, small);
        plan.swap = true;
    }
    const std::int64_t nb = numel(*big);
    const std::int64_t ns = numel(*small);
    if (ns == 0) shape_error("elementwise shape mismatch beyond broadcast rules", a, b);
    const bool scalar_small = (ns == 1);
    bool suffix = small->size() <= big->size() && !small->empty();
    if (suffix) {
        const std::size_t off = big->size() - small->size();
        for (std::size_t i = 0; i < small->size(); ++i) {
            if ((*big)[off + i] != (*small)[i]) { suffix = false; break; }
        }
    }
    if (!scalar_small && !suffix) {
        shape_error("elementwise shape mismatch beyond broadcast rules", a, b);
    }
    plan.inner = ns;
    plan.repeat = nb / ns;
    return plan;
}

}  // namespace

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw std::invalid_argument("negative extent in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

void set_precision(Precision p) { g_precision.store(p, std::memory_order_relaxed); }
Precision active_precision() { return g_precision.load(std::memory_order_relaxed); }

Tensor::Tensor(Shape s, std::vector<double> d, bool req)
    : shape(std::move(s)), data(std::move(d)), requires_grad(req) {
    if (numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    }
    if (requires_grad) grad.assign(data.size(), 0.0);
}

double Tensor::item() const {
    if (data.size() != 1) {
        throw std::invalid_argument("item() requires a one-element tensor, got shape " + shape_str(shape));
    }
    return data[0];
}

void Tensor::zero_grad() {
    if (requires_grad) std::fill(grad.begin(), grad.end(), 0.0);
}

void Tensor::accumulate_grad(const std::vector<double>& g) {
    if (!requires_grad) return;
    if (g.size() != data.size()) {
        throw std::invalid_argument("gradient length mismatch for shape " + shape_str(shape));
    }
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
}

TensorPtr Tensor::clone() const {
    return std::make_shared<Tensor>(shape, data, requires_grad);
}

TensorPtr make_tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(shape), std::move(data), requires_grad);
}

TensorPtr zeros(Shape shape, bool requires_grad) {
    const auto n = numel(shape);
    return make_tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0), requires_grad);
}

TensorPtr full(Shape shape, double value, bool requires_grad) {
    const auto n = numel(shape);
    return make_tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value), requires_grad);
}

TensorPtr scalar_tensor(double value, bool requires_grad) {
    return make_tensor({1}, {value}, requires_grad);
}

TensorPtr uniform(Shape shape, double lo, double hi, std::uint64_t seed, bool requires_grad) {
    const auto n = numel(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> d(static_cast<std::size_t>(n));
    for (auto& v : d) v = dist(rng);
    return make_tensor(std::move(shape), std::move(d), requires_grad);
}

TensorPtr make_op(Shape shape, std::vector<double> data,
                  std::vector<TensorPtr> inputs, std::function<void(Tensor&)> backward) {
    round_to_precision(data);
    bool req = false;
    for (const auto& t : inputs) req = req || t->requires_grad;
    auto out = make_tensor(std::move(shape), std::move(data), req);
    if (req) {
        out->parents = std::move(inputs);
        std::weak_ptr<Tensor> weak_out = out;
        out->backward_fn = [weak_out, backward = std::move(backward)]() {
            if (auto out_sp = weak_out.lock()) backward(*out_sp);
        };
    }
    return out;
}

namespace {

template <typename Fwd, typename Dfn>
TensorPtr unary_op(const TensorPtr& a, Fwd f, Dfn dfdx) {
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = f(a->data[i]);
    return make_op(a->shape, std::move(d), {a}, [a, dfdx](Tensor& out) {
        if (!a->requires_grad) return;
        std::vector<double> ga(a->data.size());
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] = dfdx(a->data[i], out.data[i]) * out.grad[i];
        }
        a->accumulate_grad(ga);
    });
}

// Signs +1/-1 pick add/sub; mul handled separately (needs both values).
TensorPtr add_like(const TensorPtr& a, const TensorPtr& b, double sign_b) {
    const BroadcastPlan plan = plan_broadcast(a->shape, b->shape);
    const TensorPtr& big = plan.swap ? b : a;
    const TensorPtr& small = plan.swap ? a : b;
    const double sign_big = plan.swap ? sign_b : 1.0;
    const double sign_small = plan.swap ? 1.0 : sign_b;

    std::vector<double> d(big->data.size());
    for (std::int64_t r = 0; r < plan.repeat; ++r) {
        const std::int64_t base = r * plan.inner;
        for (std::int64_t i = 0; i < plan.inner; ++i) {
            d[static_cast<std::size_t>(base + i)] =
                sign_big * big->data[static_cast<std::size_t>(base + i)] +
                sign_small * small->data[static_cast<std::size_t>(i)];
        }
    }
    return make_op(big->shape, std::move(d), {a, b},
                     [big, small, sign_big, sign_small, plan](Tensor& out) {
        if (big->requires_grad) {
            std::vector<double> g(out.grad.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = sign_big * out.grad[i];
            big->accumulate_grad(g);
        }
        if (small->requires_grad) {
            std::vector<double> g(small->data.size(), 0.0);
            for (std::int64_t r = 0; r < plan.repeat; ++r) {
                const std::int64_t base = r * plan.inner;
                for (std::int64_t i = 0; i < plan.inner; ++i) {
                    g[static_cast<std::size_t>(i)] += sign_small * out.grad[static_cast<std::size_t>(base + i)];
                }
            }
            small->accumulate_grad(g);
        }
    });
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) { return add_like(a, b, 1.0); }
TensorPtr sub(const TensorPtr& a, const TensorPtr& b) { return add_like(a, b, -1.0); }

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    const BroadcastPlan plan = plan_broadcast(a->shape, b->shape);
    const TensorPtr& big = plan.swap ? b : a;
    const TensorPtr& small = plan.swap ? a : b;

    std::vector<double> d(big->data.size());
    for (std::int64_t r = 0; r < plan.repeat; ++r) {
        const std::int64_t base = r * plan.inner;
        for (std::int64_t i = 0; i < plan.inner; ++i) {
            d[static_cast<std::size_t>(base + i)] =
                big->data[static_cast<std::size_t>(base + i)] * small->data[static_cast<std::size_t>(i)];
        }
    }
    return make_op(big->shape, std::move(d), {a, b}, [big, small, plan](Tensor& out) {
        if (big->requires_grad) {
            std::vector<double> g(out.grad.size());
            for (std::int64_t r = 0; r < plan.repeat; ++r) {
                const std::int64_t base = r * plan.inner;
                for (std::int64_t i = 0; i < plan.inner; ++i) {
                    g[static_cast<std::size_t>(base + i)] =
                        out.grad[static_cast<std::size_t>(base + i)] * small->data[static_cast<std::size_t>(i)];
                }
            }
            big->accumulate_grad(g);
        }
        if (small->requires_grad) {
            std::vector<double> g(small->data.size(), 0.0);
            for (std::int64_t r = 0; r < plan.repeat; ++r) {
                const std::int64_t base = r * plan.inner;
                for (std::int64_t i = 0; i < plan.inner; ++i) {
                    g[static_cast<std::size_t>(i)] +=
                        out.grad[static_cast<std::size_t>(base + i)] * big->data[static_cast<std::size_t>(base + i)];
                }
            }
            small->accumulate_grad(g);
        }
    });
}

TensorPtr scalar_mul(const TensorPtr& a, double c) {
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = c * a->data[i];
    return make_op(a->shape, std::move(d), {a}, [a, c](Tensor& out) {
        if (!a->requires_grad) return;
        std::vector<double> g(out.grad.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = c * out.grad[i];
        a->accumulate_grad(g);
    });
}

TensorPtr relu(const TensorPtr& a) {
    return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

TensorPtr sigmoid(const TensorPtr& a) {
    auto sig = [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    };
    return unary_op(a, sig, [](double, double y) { return y * (1.0 - y); });
}

TensorPtr exp(const TensorPtr& a) {
    return unary_op(a, [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

TensorPtr log(const TensorPtr& a) {
    return unary_op(a, [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2) {
        shape_error("matmul expects rank-2 operands", a->shape, b->shape);
    }
    const std::int64_t m = a->shape[0], k = a->shape[1];
    const std::int64_t k2 = b->shape[0], n = b->shape[1];
    if (k != k2) shape_error("matmul inner dimension mismatch", a->shape, b->shape);

    std::vector<double> d(static_cast<std::size_t>(m * n), 0.0);
    const double* pa = a->data.data();
    const double* pb = b->data.data();
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            const double* brow = pb + p * n;
            double* drow = d.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) drow[j] += av * brow[j];
        }
    }
    return make_op({m, n}, std::move(d), {a, b}, [a, b, m, k, n](Tensor& out) {
        if (a->requires_grad) {
            std::vector<double> ga(a->data.size(), 0.0);
            for (std::int64_t i = 0; i < m; ++i) {
                for (std::int64_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    const double* grow = out.grad.data() + i * n;
                    const double* brow = b->data.data() + p * n;
                    for (std::int64_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                    ga[static_cast<std::size_t>(i * k + p)] = s;
                }
            }
            a->accumulate_grad(ga);
        }
        if (b->requires_grad) {
            std::vector<double> gb(b->data.size(), 0.0);
            for (std::int64_t i = 0; i < m; ++i) {
                const double* arow = a->data.data() + i * k;
                const double* grow = out.grad.data() + i * n;
                for (std::int64_t p = 0; p < k; ++p) {
                    double* gbrow = gb.data() + p * n;
                    const double av = arow[p];
                    for (std::int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
            }
            b->accumulate_grad(gb);
        }
    });
}

TensorPtr transpose2d(const TensorPtr& a) {
    if (a->shape.size() != 2) {
        throw std::invalid_argument("transpose2d expects rank 2, got " + shape_str(a->shape));
    }
    const std::int64_t m = a->shape[0], n = a->shape[1];
    std::vector<double> d(a->data.size());
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            d[static_cast<std::size_t>(j * m + i)] = a->data[static_cast<std::size_t>(i * n + j)];
    return make_op({n, m}, std::move(d), {a}, [a, m, n](Tensor& out) {
        if (!a->requires_grad) return;
        std::vector<double> g(a->data.size());
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j)
                g[static_cast<std::size_t>(i * n + j)] = out.grad[static_cast<std::size_t>(j * m + i)];
        a->accumulate_grad(g);
    });
}

TensorPtr reshape(const TensorPtr& a, Shape new_shape) {
    if (numel(new_shape) != a->size()) {
        shape_error("reshape element count mismatch", a->shape, new_shape);
    }
    return make_op(std::move(new_shape), a->data, {a}, [a](Tensor& out) {
        if (a->requires_grad) a->accumulate_grad(out.grad);
    });
}

TensorPtr sum(const TensorPtr& a) {
    double s = 0.0;
    for (double v : a->data) s += v;
    return make_op({1}, {s}, {a}, [a](Tensor& out) {
        if (!a->requires_grad) return;
        a->accumulate_grad(std::vector<double>(a->data.size(), out.grad[0]));
    });
}

TensorPtr mean(const TensorPtr& a) {
    const double inv = 1.0 / static_cast<double>(a->size());
    double s = 0.0;
    for (double v : a->data) s += v;
    return make_op({1}, {s * inv}, {a}, [a, inv](Tensor& out) {
        if (!a->requires_grad) return;
        a->accumulate_grad(std::vector<double>(a->data.size(), out.grad[0] * inv));
    });
}

TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[0] != b->shape[0]) {
        shape_error("concat_cols expects [N,d1] and [N,d2]", a->shape, b->shape);
    }
    const std::int64_t rows = a->shape[0], da = a->shape[1], db = b->shape[1];
    std::vector<double> d(static_cast<std::size_t>(rows * (da + db)));
    for (std::int64_t r = 0; r < rows; ++r) {
        std::copy_n(a->data.begin() + r * da, da, d.begin() + r * (da + db));
        std::copy_n(b->data.begin() + r * db, db, d.begin() + r * (da + db) + da);
    }
    return make_op({rows, da + db}, std::move(d), {a, b}, [a, b, rows, da, db](Tensor& out) {
        if (a->requires_grad) {
            std::vector<double> g(a->data.size());
            for (std::int64_t r = 0; r < rows; ++r)
                std::copy_n(out.grad.begin() + r * (da + db), da, g.begin() + r * da);
            a->accumulate_grad(g);
        }
        if (b->requires_grad) {
            std::vector<double> g(b->data.size());
            for (std::int64_t r = 0; r < rows; ++r)
                std::copy_n(out.grad.begin() + r * (da + db) + da, db, g.begin() + r * db);
            b->accumulate_grad(g);
        }
    });
}

void backward(const TensorPtr& loss) {
    if (!loss) throw std::invalid_argument("backward on null tensor");
    if (loss->size() != 1) {
        throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_str(loss->shape));
    }
    if (!loss->requires_grad) return;  // constant: nothing on the tape

    // Reverse topological order via iterative DFS; parent order fixes the
    // visit order so repeated sweeps are bit-identical.
    std::vector<Tensor*> order;
    std::unordered_set<const Tensor*> visited;
    struct Frame { Tensor* node; std::size_t next_parent; };
    std::vector<Frame> stack;
    visited.insert(loss.get());
    stack.push_back({loss.get(), 0});
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Tensor* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && visited.insert(p).second) {
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    loss->accumulate_grad({1.0});
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn();
    }
}

double grad_check(const std::function<TensorPtr(const TensorPtr&)>& fn,
                  const TensorPtr& point, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check eps must be > 0");
    const double inf = std::numeric_limits<double>::infinity();

    auto x = make_tensor(point->shape, point->data, true);
    auto y = fn(x);
    if (y->size() != 1) {
        throw std::invalid_argument("grad_check function must return a scalar, got " + shape_str(y->shape));
    }
    if (!std::isfinite(y->data[0])) return inf;
    backward(y);
    const std::vector<double> analytic = x->grad;

    auto eval = [&fn](const TensorPtr& p) {
        auto out = fn(p);
        return out->data[0];
    };

    double max_err = 0.0;
    auto probe = make_tensor(point->shape, point->data, false);
    for (std::size_t i = 0; i < probe->data.size(); ++i) {
        const double saved = probe->data[i];
        probe->data[i] = saved + eps;
        const double fp = eval(probe);
        probe->data[i] = saved - eps;
        const double fm = eval(probe);
        probe->data[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm)) return inf;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double err = std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + 1e-12);
        max_err = std::max(max_err, err);
    }
    return max_err;
}

}  // namespace cdae
