// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "mergelab/core/prng.hpp"
#include "mergelab/model/network.hpp"

namespace fixture {

using mergelab::ExpertBundle;
using mergelab::ParamSet;
using mergelab::Prng;
using mergelab::TaskHead;
using mergelab::Tensor;

/// theta_0 plus `tasks` experts displaced by `scale`-sized Gaussian task
/// vectors, each with its own head over `classes` classes.
inline ExpertBundle random_bundle(std::uint64_t seed, std::size_t tasks, double scale = 0.3, std::size_t classes = 4,
                                  const mergelab::BackboneArch& arch = {}) {
    Prng rng(seed);
    ExpertBundle b;
    b.theta0 = mergelab::init_backbone(arch, rng);
    b.suite_id = "fixture";
    b.suite_descriptor = "{}";
    for (std::size_t i = 0; i < tasks; ++i) {
        ParamSet expert = b.theta0;
        for (auto& [_, t] : expert.tensors()) mergelab::axpy(scale, mergelab::prng_gaussian(rng, t.shape()), t);
        b.vectors.push_back(mergelab::extract_task_vector(expert, b.theta0));
        TaskHead h = mergelab::init_head(i, arch.embed, classes, rng);
        h.weight = 3.0 * h.weight;
        h.bias = 0.1 * mergelab::prng_gaussian(rng, {classes});
        b.heads.push_back(std::move(h));
    }
    return b;
}

/// Loop-only forward pass: tanh(tanh(x W1 + b1) W2 + b2) W + b.
inline std::vector<std::vector<double>> loop_logits(const ParamSet& theta, const TaskHead& head, const Tensor& x) {
    const Tensor& w1 = theta.at("backbone.l1.w");
    const Tensor& b1 = theta.at("backbone.l1.b");
    const Tensor& w2 = theta.at("backbone.l2.w");
    const Tensor& b2 = theta.at("backbone.l2.b");
    const std::size_t d = w1.dim(0), h = w1.dim(1), e = w2.dim(1), c = head.bias.size();
    std::vector<std::vector<double>> out;
    for (std::size_t r = 0; r < x.dim(0); ++r) {
        std::vector<double> hid(h), emb(e), logits(c);
        for (std::size_t j = 0; j < h; ++j) {
            double s = b1[j];
            for (std::size_t k = 0; k < d; ++k) s += x.at(r, k) * w1.at(k, j);
            hid[j] = std::tanh(s);
        }
        for (std::size_t j = 0; j < e; ++j) {
            double s = b2[j];
            for (std::size_t k = 0; k < h; ++k) s += hid[k] * w2.at(k, j);
            emb[j] = std::tanh(s);
        }
        for (std::size_t j = 0; j < c; ++j) {
            double s = head.bias[j];
            for (std::size_t k = 0; k < e; ++k) s += emb[k] * head.weight.at(k, j);
            logits[j] = s;
        }
        out.push_back(std::move(logits));
    }
    return out;
}

/// KL(softmax(p) || softmax(q)) from explicit probabilities.
inline double loop_kl(const std::vector<double>& p_logits, const std::vector<double>& q_logits) {
    auto probs = [](const std::vector<double>& z) {
        double m = z[0];
        for (double v : z) m = std::max(m, v);
        std::vector<double> p(z.size());
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
        for (double& v : p) v /= s;
        return p;
    };
    const auto p = probs(p_logits), q = probs(q_logits);
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
    return kl;
}

} // namespace fixture
