// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mergelab/core/error.hpp"
#include "mergelab/core/kernels.hpp"
#include "mergelab/model/checkpoint.hpp"
#include "mergelab/model/network.hpp"
#include "oracles.hpp"

using namespace mergelab;

namespace {

ExpertBundle small_bundle(std::uint64_t seed, std::size_t tasks = 2) {
    Prng rng(seed);
    const BackboneArch arch{};
    ExpertBundle b;
    b.theta0 = init_backbone(arch, rng);
    b.suite_id = "unit-suite";
    b.suite_descriptor = "{\"d\":16}";
    for (std::size_t i = 0; i < tasks; ++i) {
        ParamSet expert = b.theta0;
        for (auto& [_, t] : expert.tensors()) axpy(0.1, prng_gaussian(rng, t.shape()), t);
        b.vectors.push_back(extract_task_vector(expert, b.theta0));
        b.heads.push_back(init_head(i, arch.embed, 3 + i, rng));
    }
    return b;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("mergelab_test_" + name);
}

std::vector<double> read_values(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<double> v;
    std::string tok;
    while (in >> tok) v.push_back(parse_exact_decimal(tok));
    return v;
}

} // namespace

TEST_CASE("backbone: zero parameters give a zero embedding") {
    const BackboneArch arch{};
    Prng rng(1);
    const ParamSet zero = init_backbone(arch, rng).zeros_like();
    const Tensor emb = backbone_forward(zero, prng_gaussian(rng, {5, 16}));
    CHECK(emb.shape() == Shape{5, 32});
    CHECK(max_abs(emb) == 0.0);
}

TEST_CASE("backbone: frozen golden embedding") {
    Prng rng(20260101);
    const ParamSet theta = init_backbone(BackboneArch{}, rng);
    const Tensor x = prng_gaussian(rng, {3, 16});
    const Tensor emb = backbone_forward(theta, x);
    const auto golden = read_values(std::filesystem::path(MERGELAB_TEST_DATA_DIR) / "backbone_golden.txt");
    REQUIRE(golden.size() == emb.size());
    for (std::size_t i = 0; i < emb.size(); ++i) CHECK(std::abs(emb[i] - golden[i]) <= 1e-12);
}

TEST_CASE("backbone: batch equals stacked single rows, and rejects bad shapes") {
    Prng rng(3);
    const ParamSet theta = init_backbone(BackboneArch{}, rng);
    const Tensor x = prng_gaussian(rng, {6, 16});
    const Tensor batch = backbone_forward(theta, x);
    for (std::size_t r = 0; r < 6; ++r) {
        const std::size_t idx[] = {r};
        const Tensor row = backbone_forward(theta, x.gather_rows(idx));
        for (std::size_t c = 0; c < 32; ++c) CHECK(row.at(0, c) == batch.at(r, c));
    }
    // Batch-order equivariance.
    const std::size_t perm[] = {5, 0, 3, 1, 4, 2};
    CHECK(backbone_forward(theta, x.gather_rows(perm)) == batch.gather_rows(perm));

    CHECK_THROWS_AS(backbone_forward(theta, prng_gaussian(rng, {2, 15})), DimensionError);
    ParamSet broken = theta;
    broken.set(param_names::kB2, Tensor::zeros({31}));
    CHECK_THROWS_AS(backbone_forward(broken, x), DimensionError);
}

TEST_CASE("backbone: graph construction matches the direct forward pass") {
    Prng rng(12);
    const ParamSet theta = init_backbone(BackboneArch{}, rng);
    const Tensor x = prng_gaussian(rng, {4, 16});
    autodiff::Graph g;
    const auto xi = g.input("x");
    g.output("emb", build_backbone(g, xi, backbone_inputs(g, "", false)));
    autodiff::NamedTensors in{{"x", x}};
    bind_backbone(in, "", theta);
    CHECK(max_abs_diff(g.forward(in).at("emb"), backbone_forward(theta, x)) <= 1e-15);
}

TEST_CASE("head_forward cases") {
    Prng rng(4);
    const Tensor emb = prng_gaussian(rng, {3, 32});
    CHECK(max_abs(head_forward(TaskHead{0, Tensor::zeros({32, 4}), Tensor::zeros({4})}, emb)) == 0.0);
    CHECK(head_forward(TaskHead{0, Tensor::identity(32), Tensor::zeros({32})}, emb) == emb);
    const TaskHead h = init_head(1, 32, 5, rng);
    TaskHead hb = h;
    hb.bias = prng_gaussian(rng, {5});
    Tensor expect = oracle::naive_matmul(emb, h.weight);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 5; ++c) expect.at(r, c) += hb.bias[c];
    CHECK(max_abs_diff(head_forward(hb, emb), expect) <= 1e-12);
    CHECK_THROWS_AS(head_forward(h, prng_gaussian(rng, {3, 31})), DimensionError);
    CHECK_THROWS_AS((TaskHead{0, Tensor::zeros({32, 1}), Tensor::zeros({1})}.validate()), DimensionError);
}

TEST_CASE("task vector extraction and application") {
    Prng rng(5);
    const ParamSet theta0 = init_backbone(BackboneArch{}, rng);
    CHECK(max_abs(extract_task_vector(theta0, theta0).delta.at(param_names::kW1)) == 0.0);

    const ParamSet plus_one = theta0.zip(theta0, [](double a, double) { return a + 1.0; });
    const TaskVector ones = extract_task_vector(plus_one, theta0);
    for (const auto& [_, t] : ones.delta.tensors())
        for (double v : t.values()) CHECK(std::abs(v - 1.0) <= 1e-15);

    CHECK(apply(theta0, ones, 0.0) == theta0);

    ParamSet expert = theta0;
    for (auto& [_, t] : expert.tensors()) axpy(0.3, prng_gaussian(rng, t.shape()), t);
    const TaskVector tau = extract_task_vector(expert, theta0);
    const ParamSet back = apply(theta0, tau);
    for (const auto& [name, t] : expert.tensors())
        for (std::size_t i = 0; i < t.size(); ++i)
            CHECK(std::abs(back.at(name)[i] - t[i]) <= std::abs(std::nextafter(t[i], 1e300) - t[i]));
    const TaskVector again = extract_task_vector(apply(theta0, tau), theta0);
    CHECK(max_abs_diff(again.delta.at(param_names::kW2), tau.delta.at(param_names::kW2)) <= 1e-15);

    const ParamSet zero0 = theta0.zeros_like();
    const TaskVector ones_on_zero = extract_task_vector(zero0.zip(zero0, [](double, double) { return 1.0; }), zero0);
    const ParamSet scaled = apply(zero0, ones_on_zero, 0.3);
    for (const auto& [_, t] : scaled.tensors())
        for (double v : t.values()) CHECK(v == 0.3);
}

TEST_CASE("task vector algebra is a vector space") {
    Prng rng(6);
    const ParamSet theta0 = init_backbone(BackboneArch{}, rng);
    ParamSet e1 = theta0, e2 = theta0;
    for (auto& [_, t] : e1.tensors()) axpy(1.0, prng_gaussian(rng, t.shape()), t);
    for (auto& [_, t] : e2.tensors()) axpy(1.0, prng_gaussian(rng, t.shape()), t);
    const TaskVector t1 = extract_task_vector(e1, theta0), t2 = extract_task_vector(e2, theta0);
    const double a = 0.7, b = -1.3;
    const TaskVector combo{t1.delta.scaled(a) + t2.delta.scaled(b), theta0.fingerprint()};
    const ParamSet lhs = apply(theta0, combo);
    for (const auto& [name, t] : lhs.tensors())
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double expect = theta0.at(name)[i] + a * t1.delta.at(name)[i] + b * t2.delta.at(name)[i];
            CHECK(std::abs(t[i] - expect) <= 1e-12);
        }
}

TEST_CASE("fingerprints block cross-initialization mixing") {
    Prng rng(7);
    const ParamSet a = init_backbone(BackboneArch{}, rng);
    const ParamSet b = init_backbone(BackboneArch{}, rng);
    CHECK(a.fingerprint() != b.fingerprint());
    const TaskVector tau = extract_task_vector(a, a);
    CHECK_THROWS_AS(apply(b, tau), ProvenanceError);
    ExpertBundle bundle = small_bundle(9);
    bundle.vectors[1].origin ^= 1;
    CHECK_THROWS_AS(bundle.validate(), ProvenanceError);
}

TEST_CASE("checkpoint round trip is byte-exact") {
    const ExpertBundle bundle = small_bundle(11, 3);
    const auto path = temp_path("bundle.mfckpt");
    save_checkpoint(path, bundle);
    const ExpertBundle loaded = load_bundle(path);
    CHECK(loaded == bundle);
    CHECK(checkpoint_text(loaded) == checkpoint_text(bundle));

    const ParamSet theta = bundle.expert(1);
    const auto ppath = temp_path("params.mfckpt");
    save_checkpoint(ppath, theta, "unit-suite");
    CHECK(load_params(ppath) == theta);
    CHECK_THROWS_AS(load_bundle(ppath), FormatError);
    CHECK_THROWS_AS(load_params(path), FormatError);

    for (double v : {0.1, -1e-300, 5e-324, 1.0 / 3.0, 123456789.125}) CHECK(parse_exact_decimal(exact_decimal(v)) == v);
}

TEST_CASE("checkpoint loader rejects damaged files") {
    const std::string text = checkpoint_text(small_bundle(12));
    CHECK_THROWS_AS(parse_checkpoint(text.substr(0, text.size() / 2)), FormatError);
    CHECK_THROWS_AS(parse_checkpoint(text.substr(0, text.size() - 1)), FormatError);
    CHECK_THROWS_AS(parse_checkpoint(""), FormatError);

    std::string wrong_version = text;
    wrong_version.replace(wrong_version.find("\"version\":1"), 11, "\"version\":2");
    CHECK_THROWS_WITH_AS(parse_checkpoint(wrong_version), doctest::Contains("version 2"), FormatError);

    // Drop one value from a tensor record: shape and data disagree.
    std::string bad_shape = text;
    const auto rec = bad_shape.find("{\"name\":\"head/0/bias\"");
    const auto vals = bad_shape.find("\"values\":[", rec) + 10;
    const auto comma = bad_shape.find(',', vals);
    bad_shape.erase(vals, comma - vals + 1);
    CHECK_THROWS_AS(parse_checkpoint(bad_shape), ValidationError);
}
