// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <functional>

#include "mergelab/autodiff/graph.hpp"
#include "mergelab/autodiff/optimizer.hpp"
#include "mergelab/core/error.hpp"
#include "mergelab/core/kernels.hpp"
#include "mergelab/core/prng.hpp"
#include "oracles.hpp"

using namespace mergelab;
using namespace mergelab::autodiff;

namespace {

// Relative error of the analytic gradient of `loss` w.r.t. every trainable
// input, against central differences.
double worst_gradient_error(Graph& g, NodeId loss, const NamedTensors& inputs) {
    g.forward(inputs);
    const NamedTensors analytic = g.backward(loss);
    double worst = 0.0;
    for (const auto& [name, grad] : analytic) {
        auto f = [&](const Tensor& probe) {
            NamedTensors bound = inputs;
            bound[name] = probe;
            g.forward(bound);
            return g.value(loss).item();
        };
        worst = std::max(worst, oracle::relative_error(grad, oracle::finite_difference(f, inputs.at(name))));
    }
    return worst;
}

} // namespace

TEST_CASE("forward: tanh of an identity affine map") {
    Graph g;
    const NodeId x = g.input("x"), w = g.input("w"), b = g.input("b");
    g.output("y", g.tanh(g.affine(x, w, b)));
    const NamedTensors out =
        g.forward({{"x", Tensor::matrix({{0.5}})}, {"w", Tensor::identity(1)}, {"b", Tensor::vector({0.0})}});
    CHECK(out.at("y").item() == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
    CHECK(out.at("y").item() == doctest::Approx(0.4621).epsilon(1e-4));
}

TEST_CASE("forward: passthrough graph and unbound inputs") {
    Graph g;
    const NodeId x = g.input("x");
    g.output("x", x);
    const Tensor v = Tensor::matrix({{1, -2}, {3, 4}});
    CHECK(g.forward({{"x", v}}).at("x") == v);
    CHECK_THROWS_AS(g.forward({}), GraphError);
}

TEST_CASE("forward: composed affine maps equal one affine map with product weights") {
    Prng rng(2);
    const Tensor x = prng_gaussian(rng, {4, 3});
    const Tensor w1 = prng_gaussian(rng, {3, 5}), b1 = prng_gaussian(rng, {5});
    const Tensor w2 = prng_gaussian(rng, {5, 2}), b2 = prng_gaussian(rng, {2});
    Graph g;
    const NodeId xi = g.input("x");
    const NodeId h = g.affine(xi, g.input("w1"), g.input("b1"));
    g.output("y", g.affine(h, g.input("w2"), g.input("b2")));
    const Tensor y = g.forward({{"x", x}, {"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2}}).at("y");
    // x W1 W2 + (b1 W2 + b2)
    const Tensor w = oracle::naive_matmul(w1, w2);
    const Tensor b = oracle::naive_matmul(b1.reshaped({1, 5}), w2).reshaped({2}) + b2;
    const Tensor expect = add_row_bias(oracle::naive_matmul(x, w), b);
    CHECK(max_abs_diff(y, expect) <= 1e-12);
}

TEST_CASE("backward: quadratic and softmax-KL closed forms") {
    Graph g;
    const NodeId w = g.input("w", true);
    const NodeId loss = g.half_sum_squares(w);
    const Tensor wv = Tensor::vector({1.5, -2.0, 0.25});
    g.forward({{"w", wv}});
    CHECK(g.backward(loss).at("w") == wv);

    Graph k;
    const NodeId teacher = k.input("teacher");
    const NodeId z = k.input("z", true);
    const NodeId kl = k.kl_loss(teacher, z);
    k.forward({{"teacher", Tensor::vector({std::log(0.25), std::log(0.75)})}, {"z", Tensor::vector({0, 0})}});
    const Tensor gz = k.backward(kl).at("z");
    CHECK(gz[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(gz[1] == doctest::Approx(-0.25).epsilon(1e-14));
    // Teachers are constants: no gradient entry is produced for them.
    CHECK_FALSE(k.backward(kl).contains("teacher"));
}

TEST_CASE("backward: contract errors") {
    Graph g;
    const NodeId w = g.input("w", true);
    const NodeId t = g.tanh(w);
    CHECK_THROWS_AS(g.backward(t), GraphError);
    g.forward({{"w", Tensor::vector({1, 2})}});
    CHECK_THROWS_AS(g.backward(t), GraphError);
}

TEST_CASE("gradient check per layer kind over 20 seeds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Prng rng(1000 + seed);
        const Tensor x = prng_gaussian(rng, {4, 3});
        const Tensor w = prng_gaussian(rng, {3, 5});
        const Tensor b = prng_gaussian(rng, {5});
        const Tensor r = prng_gaussian(rng, {4, 5});
        const Tensor teacher = 2.0 * prng_gaussian(rng, {4, 5});
        const Tensor student = 2.0 * prng_gaussian(rng, {4, 5});

        {
            Graph g;
            const NodeId out = g.affine(g.input("x", true), g.input("w", true), g.input("b", true));
            const NodeId loss = g.weighted_sum(out, r);
            CHECK(worst_gradient_error(g, loss, {{"x", x}, {"w", w}, {"b", b}}) <= 1e-5);
        }
        {
            Graph g;
            const NodeId loss = g.weighted_sum(g.matmul(g.input("x", true), g.input("w", true)), r);
            CHECK(worst_gradient_error(g, loss, {{"x", x}, {"w", w}}) <= 1e-5);
        }
        {
            Graph g;
            const NodeId loss = g.weighted_sum(g.tanh(g.input("a", true)), r);
            CHECK(worst_gradient_error(g, loss, {{"a", student}}) <= 1e-5);
        }
        {
            Graph g;
            const NodeId loss = g.weighted_sum(g.softmax(g.input("a", true)), r);
            CHECK(worst_gradient_error(g, loss, {{"a", student}}) <= 1e-5);
        }
        {
            Graph g;
            const NodeId a = g.input("a", true), c = g.input("c", true);
            const NodeId loss = g.weighted_sum(g.add(g.scale(a, -1.7), c), r);
            CHECK(worst_gradient_error(g, loss, {{"a", student}, {"c", teacher}}) <= 1e-5);
        }
        for (int kind = 0; kind < 3; ++kind) {
            Graph g;
            const NodeId t = g.input("t"), s = g.input("s", true);
            const NodeId loss = kind == 0 ? g.kl_loss(t, s) : kind == 1 ? g.cross_entropy_loss(t, s) : g.mse_loss(t, s);
            CHECK(worst_gradient_error(g, loss, {{"t", teacher}, {"s", student}}) <= 1e-5);
        }
    }
}

TEST_CASE("gradient check on a random two-layer tanh MLP") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Prng rng(50 + seed);
        Graph g;
        const NodeId x = g.input("x");
        const NodeId h = g.tanh(g.affine(x, g.input("w1", true), g.input("b1", true)));
        const NodeId e = g.tanh(g.affine(h, g.input("w2", true), g.input("b2", true)));
        const NodeId logits = g.affine(e, g.input("hw"), g.input("hb"));
        const NodeId loss = g.kl_loss(g.input("teacher"), logits);
        const NamedTensors in = {
            {"x", prng_gaussian(rng, {6, 4})},       {"w1", 0.7 * prng_gaussian(rng, {4, 8})},
            {"b1", 0.1 * prng_gaussian(rng, {8})},   {"w2", 0.5 * prng_gaussian(rng, {8, 5})},
            {"b2", 0.1 * prng_gaussian(rng, {5})},   {"hw", prng_gaussian(rng, {5, 3})},
            {"hb", prng_gaussian(rng, {3})},         {"teacher", prng_gaussian(rng, {6, 3})}};
        CHECK(worst_gradient_error(g, loss, in) <= 1e-5);
    }
}

TEST_CASE("backward is linear in the loss") {
    Prng rng(31);
    Graph g;
    const NodeId t1 = g.input("t1"), t2 = g.input("t2");
    const NodeId s = g.tanh(g.input("s", true));
    const NodeId l1 = g.kl_loss(t1, s);
    const NodeId l2 = g.mse_loss(t2, s);
    const double a = 0.37, b = -2.5;
    const NodeId combo = g.add(g.scale(l1, a), g.scale(l2, b));
    const NamedTensors in = {{"t1", prng_gaussian(rng, {5, 4})}, {"t2", prng_gaussian(rng, {5, 4})},
                             {"s", prng_gaussian(rng, {5, 4})}};
    g.forward(in);
    const Tensor g1 = g.backward(l1).at("s");
    const Tensor g2 = g.backward(l2).at("s");
    const Tensor gc = g.backward(combo).at("s");
    CHECK(max_abs_diff(gc, a * g1 + b * g2) <= 1e-10);

    // Determinism: same inputs, bit-identical gradients.
    g.forward(in);
    CHECK(g.backward(combo).at("s") == gc);
}

TEST_CASE("sgd_step arithmetic") {
    NamedTensors p = {{"p", Tensor::vector({1.0})}};
    const NamedTensors grad = {{"p", Tensor::vector({1.0})}};

    OptimState zero({.learning_rate = 0.0});
    NamedTensors q = p;
    sgd_step(q, grad, zero);
    CHECK(q.at("p")[0] == 1.0);

    OptimState plain({.learning_rate = 0.1, .weight_decay = 0.0});
    q = p;
    sgd_step(q, grad, plain);
    CHECK(q.at("p")[0] == doctest::Approx(0.9).epsilon(1e-15));

    OptimState decay({.learning_rate = 0.1, .weight_decay = 1.0});
    q = p;
    sgd_step(q, {{"p", Tensor::vector({0.0})}}, decay);
    CHECK(q.at("p")[0] == doctest::Approx(0.9).epsilon(1e-15));

    OptimState adaptive({.learning_rate = 0.01, .mode = OptimizerMode::Adaptive});
    q = p;
    sgd_step(q, grad, adaptive);
    // First bias-corrected step moves by lr * g / (|g| + eps).
    CHECK(q.at("p")[0] == doctest::Approx(1.0 - 0.01 / (1.0 + 1e-8)).epsilon(1e-14));

    CHECK_THROWS_AS(sgd_step(q, {{"p", Tensor::vector({1.0, 2.0})}}, plain), DimensionError);
    CHECK_THROWS_AS(OptimState({.learning_rate = -1.0}), ConfigError);
}
