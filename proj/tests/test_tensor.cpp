#include <doctest.h>

#include <cmath>

#include "mmfuse/tensor.hpp"
#include "testutil.hpp"

using namespace mmfuse;
using testutil::grad_rel_err;
using testutil::random_tensor;

TEST_SUITE("tensor") {

TEST_CASE("elementwise arithmetic") {
    Tensor a({1, 2}, {2}), b({3, 4}, {2});
    auto sum = add(a, b);
    CHECK(sum.value_at(0) == 4.0);
    CHECK(sum.value_at(1) == 6.0);
    auto zero = mul(a, 0.0);
    CHECK(zero.value_at(0) == 0.0);
    CHECK(zero.value_at(1) == 0.0);
    CHECK_THROWS_AS(div(Tensor({1}, {1}), 0.0), DegenerateInputError);
    CHECK_THROWS_AS(div(a, Tensor({1, 0}, {2})), DegenerateInputError);
    CHECK_THROWS_AS(add(a, Tensor({1, 2, 3}, {3})), ShapeError);
}

TEST_CASE("tensor construction contracts") {
    CHECK_THROWS_AS(Tensor({}, {0}), ShapeError);
    CHECK_THROWS_AS(Tensor({1, 2}, {3}), ShapeError);
    CHECK_THROWS_AS(Tensor({std::numeric_limits<double>::infinity()}, {1}), NumericError);
    CHECK(Tensor::scalar(3.0).scalar_value() == 3.0);
}

TEST_CASE("reductions") {
    Tensor x({1, 0, 0, 0, 0}, {5});
    CHECK(reduce(ReduceOp::mean, x, {0}).scalar_value() == doctest::Approx(0.2).epsilon(1e-14));
    // population variance
    CHECK(reduce(ReduceOp::var, x, {0}).scalar_value() == doctest::Approx(0.16).epsilon(1e-14));
    CHECK(reduce(ReduceOp::sum, x, {0}).scalar_value() == 1.0);
    CHECK(reduce(ReduceOp::max, x, {0}).scalar_value() == 1.0);
    CHECK_THROWS_AS(reduce(ReduceOp::sum, x, {}), ShapeError);
    CHECK_THROWS_AS(reduce(ReduceOp::sum, x, {1}), ShapeError);
    CHECK_THROWS_AS(reduce(ReduceOp::sum, x, {0, 0}), ShapeError);

    Tensor m({1, 2, 3, 4, 5, 6}, {2, 3});
    auto rows = reduce(ReduceOp::sum, m, {1});
    CHECK(rows.shape() == Shape{2});
    CHECK(rows.value_at(0) == 6.0);
    CHECK(rows.value_at(1) == 15.0);
    auto all = reduce_all(ReduceOp::mean, m);
    CHECK(all.rank() == 0);
    CHECK(all.scalar_value() == doctest::Approx(3.5));
}

TEST_CASE("max reduce is not differentiable") {
    Graph g;
    Tensor x = g.leaf({1, 5, 2}, {3});
    Tensor mx = reduce(ReduceOp::max, x, {0});
    CHECK_FALSE(mx.requires_grad());
}

TEST_CASE("activations") {
    Tensor z({0.0}, {1});
    CHECK(sigmoid(z).value_at(0) == 0.5);
    CHECK(mmfuse::tanh(Tensor({1.0}, {1})).value_at(0) == std::tanh(1.0));
    auto sm = softmax(Tensor({0.0, 0.0}, {2}), 0);
    CHECK(sm.value_at(0) == 0.5);
    CHECK(sm.value_at(1) == 0.5);
    // softmax over a middle axis normalizes each slice
    auto sm2 = softmax(Tensor({1, 2, 3, 4, 5, 6}, {2, 3}), 1);
    CHECK(sm2.value_at(0) + sm2.value_at(1) + sm2.value_at(2) == doctest::Approx(1.0));
}

TEST_CASE("matmul") {
    Tensor eye({1, 0, 0, 1}, {2, 2});
    Tensor col({1, 2}, {2, 1});
    auto prod = matmul(eye, col);
    CHECK(prod.value_at(0) == 1.0);
    CHECK(prod.value_at(1) == 2.0);
    auto s = matmul(Tensor({1, 2}, {1, 2}), Tensor({3, 4}, {2, 1}));
    CHECK(s.value_at(0) == 11.0);
    CHECK_THROWS_AS(matmul(Tensor({1, 2, 3, 4, 5, 6}, {2, 3}), Tensor({1, 2, 3, 4}, {2, 2})),
                    ShapeError);
}

TEST_CASE("backward basics") {
    Graph g;
    Tensor x = g.leaf({1, 2}, {2});
    Tensor loss = reduce_all(ReduceOp::sum, mul(x, x));
    g.backward(loss);
    auto gx = g.grad(x);
    CHECK(gx[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(gx[1] == doctest::Approx(4.0).epsilon(1e-14));

    Graph g2;
    Tensor w = g2.leaf({0.0}, {1});
    Tensor out = sigmoid(mul(w, 1.0));
    g2.backward(reduce_all(ReduceOp::sum, out));
    CHECK(g2.grad(w)[0] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("backward contracts") {
    Graph g;
    Tensor x = g.leaf({1, 2}, {2});
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(g.backward(y), ShapeError);  // non-scalar loss
    Tensor c({3.0}, {1});
    CHECK_THROWS_AS(g.backward(c), ShapeError);  // not on this graph
    CHECK_THROWS_AS(ew(EwOp::pow, Tensor({2.0}, {1}), g.leaf({2.0}, {1})), ShapeError);
}

TEST_CASE("two backward calls produce identical gradients") {
    Graph g;
    CounterRng rng(3);
    Tensor x = g.leaf(rng.uniform_vec(12, -2, 2), {3, 4});
    Tensor loss = reduce_all(ReduceOp::sum, sigmoid(mul(x, x)));
    g.backward(loss);
    std::vector<double> first(g.grad(x).begin(), g.grad(x).end());
    g.backward(loss);
    std::vector<double> second(g.grad(x).begin(), g.grad(x).end());
    CHECK(first == second);
}

TEST_CASE("forward results are bit-identical across runs") {
    CounterRng rng(5);
    std::vector<double> vals = rng.uniform_vec(60, -2, 2);
    auto run = [&] {
        Tensor x(vals, {4, 15});
        Tensor y = softmax(relu(mul(x, Tensor(vals, {4, 15}))), 1);
        Tensor z = matmul(y, transpose(y));
        return std::vector<double>(z.values().begin(), z.values().end());
    };
    CHECK(run() == run());
}

TEST_CASE("non-finite forward results raise") {
    Tensor big({1e308}, {1});
    CHECK_THROWS_AS(mul(big, big), NumericError);
    // pow of a negative base with fractional exponent is NaN
    CHECK_THROWS_AS(pow(Tensor({-1.0}, {1}), 0.5), NumericError);
}

TEST_CASE("gradients match finite differences on every differentiable op") {
    CounterRng rng(11);
    auto readout = [](const Tensor& t) { return reduce_all(ReduceOp::sum, sigmoid(t)); };

    for (uint64_t trial = 0; trial < 3; ++trial) {
        CounterRng r(100 + trial);
        std::vector<double> a = r.uniform_vec(12, -2, 2);
        std::vector<double> b = r.uniform_vec(12, 0.5, 2.5);  // positive: safe divisor/base
        std::vector<double> w = r.uniform_vec(20, -1, 1);

        CHECK(grad_rel_err({a, b}, {{3, 4}, {3, 4}}, [&](std::vector<Tensor>& t) {
                  return reduce_all(ReduceOp::sum, sigmoid(add(t[0], t[1])));
              }) < 1e-4);
        CHECK(grad_rel_err({a, b}, {{3, 4}, {3, 4}}, [&](std::vector<Tensor>& t) {
                  return reduce_all(ReduceOp::sum, sigmoid(sub(t[0], t[1])));
              }) < 1e-4);
        CHECK(grad_rel_err({a, b}, {{3, 4}, {3, 4}}, [&](std::vector<Tensor>& t) {
                  return reduce_all(ReduceOp::sum, sigmoid(mul(t[0], t[1])));
              }) < 1e-4);
        CHECK(grad_rel_err({a, b}, {{3, 4}, {3, 4}}, [&](std::vector<Tensor>& t) {
                  return reduce_all(ReduceOp::sum, sigmoid(div(t[0], t[1])));
              }) < 1e-4);
        CHECK(grad_rel_err({b}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return reduce_all(ReduceOp::sum, pow(t[0], 1.7));
              }) < 1e-4);
        CHECK(grad_rel_err({b}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return reduce_all(ReduceOp::sum, ew(EwOp::pow, 1.3, t[0]));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return reduce_all(ReduceOp::sum, sigmoid(ew(EwOp::div, 2.0, add(t[0], 3.0))));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{2, 3, 2}}, [&](std::vector<Tensor>& t) {
                  return readout(reduce(ReduceOp::mean, t[0], {1}));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{2, 3, 2}}, [&](std::vector<Tensor>& t) {
                  return readout(reduce(ReduceOp::sum, t[0], {0, 2}));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{2, 6}}, [&](std::vector<Tensor>& t) {
                  return readout(reduce(ReduceOp::var, t[0], {1}));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return reduce_all(ReduceOp::sum, mul(sigmoid(t[0]), 2.0));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return reduce_all(ReduceOp::sum, mmfuse::tanh(t[0]));
              }) < 1e-4);
        CHECK(grad_rel_err({b}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  // inputs kept away from the relu kink
                  return reduce_all(ReduceOp::sum, relu(sub(t[0], 0.1)));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return reduce_all(ReduceOp::sum, mul(softmax(t[0], 1), Tensor(b, {3, 4})));
              }) < 1e-4);
        CHECK(grad_rel_err({a, w}, {{3, 4}, {4, 5}}, [&](std::vector<Tensor>& t) {
                  return readout(matmul(t[0], t[1]));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return readout(transpose(t[0]));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return readout(expand(t[0], 1, 2));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return readout(pad_last(t[0], 1, 2));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return readout(reshape(t[0], {4, 3}));
              }) < 1e-4);
        CHECK(grad_rel_err({a}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return reduce_all(ReduceOp::sum, abs_val(add(t[0], 0.05)));
              }) < 1e-4);
        std::vector<int> labels{1, 0, 3};
        CHECK(grad_rel_err({a}, {{3, 4}}, [&](std::vector<Tensor>& t) {
                  return cross_entropy_mean(t[0], labels);
              }) < 1e-4);
        std::vector<double> bias = r.uniform_vec(5, -1, 1);
        CHECK(grad_rel_err({a, w, bias}, {{3, 4}, {4, 5}, {5}}, [&](std::vector<Tensor>& t) {
                  return readout(affine(t[0], t[1], t[2]));
              }) < 1e-4);
        CHECK(grad_rel_err({a, b}, {{3, 4}, {3, 4}}, [&](std::vector<Tensor>& t) {
                  return readout(concat_cols(t[0], t[1]));
              }) < 1e-4);
    }
}

TEST_CASE("cross-entropy value and contracts") {
    Tensor logits({0, 0, 0, 0}, {2, 2});
    std::vector<int> labels{0, 1};
    CHECK(cross_entropy_mean(logits, labels).scalar_value() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    std::vector<int> bad{0, 2};
    CHECK_THROWS_AS(cross_entropy_mean(logits, bad), ShapeError);
}

}  // TEST_SUITE
