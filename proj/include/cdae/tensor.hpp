#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cdae {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Numeric mode for the whole process. Data is always stored as double;
// f32 mode rounds the result of every primitive through float, which
// reproduces single-precision rounding behaviour on one code path.
enum class Precision { f64, f32 };
void set_precision(Precision p);
Precision active_precision();

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense tensor node. Ops that see a requires_grad input record their
// inputs in `parents` and a `backward_fn` that scatters this node's grad
// into the parents; the recorded graph is the gradient tape, replayed in
// reverse topological order by backward().
struct Tensor : std::enable_shared_from_this<Tensor> {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // same length as data when requires_grad

    std::vector<TensorPtr> parents;
    std::function<void()> backward_fn;

    Tensor(Shape s, std::vector<double> d, bool req);

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    double item() const;

    void zero_grad();
    void accumulate_grad(const std::vector<double>& g);

    // Deep copy of the value; no graph edges, fresh grad buffer.
    TensorPtr clone() const;
};

TensorPtr make_tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

// Constructs an op node with a custom backward, applying the active
// precision rounding and recording the tape entry only when an input
// requires grad. The backward receives the finished output node and
// scatters out.grad into the inputs. Fused primitives in other modules
// build on this.
TensorPtr make_op(Shape shape, std::vector<double> data,
                  std::vector<TensorPtr> inputs, std::function<void(Tensor&)> backward);
TensorPtr zeros(Shape shape, bool requires_grad = false);
TensorPtr full(Shape shape, double value, bool requires_grad = false);
TensorPtr scalar_tensor(double value, bool requires_grad = false);
TensorPtr uniform(Shape shape, double lo, double hi, std::uint64_t seed, bool requires_grad = false);

// Elementwise primitives. Binary ops accept equal shapes, a one-element
// operand, or an operand whose shape matches the trailing axes of the
// other (broadcast over the leading axes).
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scalar_mul(const TensorPtr& a, double c);
TensorPtr relu(const TensorPtr& a);
TensorPtr sigmoid(const TensorPtr& a);
TensorPtr exp(const TensorPtr& a);
TensorPtr log(const TensorPtr& a);

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose2d(const TensorPtr& a);
TensorPtr reshape(const TensorPtr& a, Shape new_shape);
TensorPtr sum(const TensorPtr& a);
TensorPtr mean(const TensorPtr& a);
TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);  // [N,d1],[N,d2] -> [N,d1+d2]

// Reverse-mode sweep from a scalar loss. Grads accumulate; call
// zero_grad on the leaves (or AdamW::zero_grad) at step start.
void backward(const TensorPtr& loss);

// Central-difference check of the analytic gradient of fn at `point`.
// Returns max over coordinates of
//   |analytic - numeric| / (|analytic| + 1e-12),
// or +inf when fn produces a non-finite value.
double grad_check(const std::function<TensorPtr(const TensorPtr&)>& fn,
                  const TensorPtr& point, double eps);

}  // namespace cdae
