#include <doctest.h>

#include <cmath>
#include <string>

#include "cdae/tensor.hpp"

using namespace cdae;

namespace {

TensorPtr vec(std::vector<double> v, bool grad = false) {
    const auto n = static_cast<std::int64_t>(v.size());
    return make_tensor({n}, std::move(v), grad);
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("elementwise add is componentwise") {
    auto out = add(vec({1, 2}), vec({3, 4}));
    CHECK(out->data == std::vector<double>{4, 6});
}

TEST_CASE("relu clamps negatives") {
    auto out = relu(vec({-1, 0, 2}));
    CHECK(out->data == std::vector<double>{0, 0, 2});
}

TEST_CASE("sigmoid at zero is one half") {
    auto out = sigmoid(vec({0}));
    CHECK(out->data[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("sub and mul") {
    CHECK(sub(vec({5, 7}), vec({1, 2}))->data == std::vector<double>{4, 5});
    CHECK(mul(vec({2, 3}), vec({4, 5}))->data == std::vector<double>{8, 15});
    CHECK(scalar_mul(vec({1, -2}), 3.0)->data == std::vector<double>{3, -6});
}

TEST_CASE("broadcast over leading axes and scalars") {
    auto m = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    auto row = vec({10, 20, 30});
    auto out = add(m, row);
    CHECK(out->shape == Shape{2, 3});
    CHECK(out->data == std::vector<double>{11, 22, 33, 14, 25, 36});

    auto s = scalar_tensor(100.0);
    CHECK(add(m, s)->data == std::vector<double>{101, 102, 103, 104, 105, 106});
}

TEST_CASE("broadcast gradient sums over the leading axes") {
    auto m = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    auto row = make_tensor({3}, {1, 1, 1}, true);
    backward(sum(mul(m, row)));
    CHECK(row->grad == std::vector<double>{1 + 4, 2 + 5, 3 + 6});
    CHECK(m->grad == std::vector<double>{1, 1, 1, 1, 1, 1});
}

TEST_CASE("shape mismatch reports both shapes") {
    bool threw = false;
    try {
        add(vec({1, 2}), vec({1, 2, 3}));
    } catch (const std::invalid_argument& e) {
        threw = true;
        const std::string what = e.what();
        CHECK(what.find("[2]") != std::string::npos);
        CHECK(what.find("[3]") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("matmul identity and dot product") {
    auto eye = make_tensor({2, 2}, {1, 0, 0, 1});
    auto m = make_tensor({2, 2}, {1, 2, 3, 4});
    CHECK(matmul(eye, m)->data == std::vector<double>{1, 2, 3, 4});

    auto rowvec = make_tensor({1, 2}, {1, 2});
    auto colvec = make_tensor({2, 1}, {3, 4});
    auto out = matmul(rowvec, colvec);
    CHECK(out->shape == Shape{1, 1});
    CHECK(out->data[0] == 11.0);
}

TEST_CASE("matmul rejects inner dimension mismatch") {
    CHECK_THROWS_AS(matmul(make_tensor({2, 3}, std::vector<double>(6, 0.0)),
                           make_tensor({2, 2}, std::vector<double>(4, 0.0))),
                    std::invalid_argument);
}

TEST_CASE("gradient of sum(A*B) w.r.t. A broadcasts B's column sums per row") {
    auto a = uniform({3, 4}, -1, 1, 7, true);
    auto b = uniform({4, 2}, -1, 1, 8, false);
    backward(sum(matmul(a, b)));
    // d/dA[i][k] sum(A*B) = sum_j B[k][j], independent of the row i.
    for (std::int64_t k = 0; k < 4; ++k) {
        double colsum = 0;
        for (std::int64_t j = 0; j < 2; ++j) colsum += b->data[static_cast<std::size_t>(k * 2 + j)];
        for (std::int64_t i = 0; i < 3; ++i) {
            CHECK(a->grad[static_cast<std::size_t>(i * 4 + k)] == doctest::Approx(colsum).epsilon(1e-12));
        }
    }
    // Same fact via the finite-difference oracle.
    auto fixed_b = b;
    const double err = grad_check(
        [&](const TensorPtr& x) { return sum(matmul(x, fixed_b)); },
        uniform({3, 4}, -1, 1, 9), 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("backward of sum(x*x) is 2x") {
    auto x = vec({1, 2, 3}, true);
    backward(sum(mul(x, x)));
    CHECK(x->grad == std::vector<double>{2, 4, 6});
}

TEST_CASE("constant loss writes no gradients") {
    auto x = vec({1, 2, 3}, false);
    auto loss = sum(mul(x, x));
    CHECK_FALSE(loss->requires_grad);
    backward(loss);  // nothing on the tape; must be a no-op
    CHECK(x->grad.empty());
}

TEST_CASE("backward rejects non-scalar outputs") {
    auto x = vec({1, 2}, true);
    CHECK_THROWS_AS(backward(mul(x, x)), std::invalid_argument);
}

TEST_CASE("repeated backward without reset accumulates") {
    auto x = vec({1, 2}, true);
    backward(sum(mul(x, x)));
    backward(sum(mul(x, x)));
    CHECK(x->grad == std::vector<double>{4, 8});
    x->zero_grad();
    CHECK(x->grad == std::vector<double>{0, 0});
}

TEST_CASE("backward is deterministic") {
    auto run = [] {
        auto x = uniform({6}, -1, 1, 42, true);
        auto y = sigmoid(mul(x, x));
        backward(sum(mul(y, x)));
        return x->grad;
    };
    const auto g1 = run();
    const auto g2 = run();
    CHECK(g1 == g2);  // bit-identical
}

TEST_CASE("grad_check on sum is exact at binary-friendly points") {
    auto point = vec({0.25, 0.5, 1.0, -0.75});
    const double err = grad_check([](const TensorPtr& x) { return sum(x); }, point, 0.25);
    CHECK(err == 0.0);
}

TEST_CASE("grad_check of sum(sigmoid) at zero matches the quarter slope") {
    auto x = vec({0.0}, true);
    backward(sum(sigmoid(x)));
    CHECK(x->grad[0] == doctest::Approx(0.25).epsilon(1e-15));
    const double err = grad_check([](const TensorPtr& p) { return sum(sigmoid(p)); }, vec({0.0}), 1e-5);
    CHECK(err < 1e-9);
}

TEST_CASE("grad_check reports infinity on non-finite values") {
    const double err = grad_check([](const TensorPtr& p) { return log(sum(p)); }, vec({-1.0, 0.5}), 1e-5);
    CHECK(std::isinf(err));
}

TEST_CASE("exp and log gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CHECK(grad_check([](const TensorPtr& p) { return sum(exp(p)); },
                         uniform({4}, -1, 1, seed), 1e-6) < 1e-6);
        CHECK(grad_check([](const TensorPtr& p) { return sum(log(p)); },
                         uniform({4}, 0.5, 2.0, seed + 100), 1e-6) < 1e-6);
    }
}

TEST_CASE("composed losses pass the finite-difference oracle on 20 random configs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::int64_t m = 2 + static_cast<std::int64_t>(seed % 3);
        const std::int64_t n = 2 + static_cast<std::int64_t>(seed % 4);
        auto w = uniform({n, n}, -1, 1, 1000 + seed);
        auto fn = [&](const TensorPtr& x) {
            auto h = sigmoid(matmul(x, w));
            auto r = mul(h, exp(scalar_mul(h, -0.5)));
            return mean(mul(r, r));
        };
        CHECK(grad_check(fn, uniform({m, n}, -2, 2, 2000 + seed), 1e-5) < 1e-6);
    }
}

TEST_CASE("relu gradient matches finite differences away from the kink") {
    auto positive = uniform({6}, 0.2, 1.0, 3);
    auto negative = uniform({6}, -1.0, -0.2, 4);
    auto fn = [](const TensorPtr& p) { return sum(mul(relu(p), p)); };
    CHECK(grad_check(fn, positive, 1e-6) < 1e-6);
    CHECK(grad_check(fn, negative, 1e-6) < 1e-6);
}

TEST_CASE("elementwise ops commute with reshape") {
    auto x = uniform({2, 6}, -2, 2, 11);
    auto a = reshape(sigmoid(x), {3, 4});
    auto b = sigmoid(reshape(x, {3, 4}));
    CHECK(a->shape == b->shape);
    CHECK(a->data == b->data);
}

TEST_CASE("reshape rejects element count changes and routes gradients through") {
    auto x = uniform({2, 3}, -1, 1, 12, true);
    CHECK_THROWS_AS(reshape(x, {4, 2}), std::invalid_argument);
    backward(sum(mul(reshape(x, {3, 2}), reshape(x, {3, 2}))));
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        CHECK(x->grad[i] == doctest::Approx(2 * x->data[i]).epsilon(1e-12));
    }
}

TEST_CASE("concat_cols splits gradients by column block") {
    auto a = uniform({2, 2}, -1, 1, 13, true);
    auto b = uniform({2, 3}, -1, 1, 14, true);
    auto out = concat_cols(a, b);
    CHECK(out->shape == Shape{2, 5});
    backward(sum(mul(out, out)));
    for (std::size_t i = 0; i < a->data.size(); ++i) {
        CHECK(a->grad[i] == doctest::Approx(2 * a->data[i]).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < b->data.size(); ++i) {
        CHECK(b->grad[i] == doctest::Approx(2 * b->data[i]).epsilon(1e-12));
    }
}

TEST_CASE("f32 precision mode rounds op results through float") {
    set_precision(Precision::f32);
    auto out = add(vec({0.1}), vec({0.2}));
    set_precision(Precision::f64);
    CHECK(out->data[0] == static_cast<double>(static_cast<float>(0.1 + 0.2)));
    CHECK(out->data[0] != 0.1 + 0.2);

    set_precision(Precision::f32);
    const double err = grad_check(
        [](const TensorPtr& p) { return mean(mul(sigmoid(p), p)); },
        uniform({8}, -1, 1, 15), 5e-3);
    set_precision(Precision::f64);
    CHECK(err < 1e-4);  // relaxed tolerance in 32-bit mode
}

TEST_CASE("finite data stays finite through the training primitives") {
    auto x = uniform({64}, 0.0, 1.0, 16);
    auto y = sigmoid(exp(scalar_mul(relu(sub(x, scalar_tensor(0.5))), -3.0)));
    for (double v : y->data) CHECK(std::isfinite(v));
}

}  // TEST_SUITE
