// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/autodiff/optimizer.hpp"

#include <cmath>

#include "mergelab/core/error.hpp"

namespace mergelab::autodiff {

const char* mode_name(OptimizerMode mode) { return mode == OptimizerMode::Plain ? "plain" : "adaptive"; }

OptimizerMode parse_optimizer_mode(const std::string& name) {
    if (name == "plain") return OptimizerMode::Plain;
    if (name == "adaptive") return OptimizerMode::Adaptive;
    throw ConfigError("unknown optimizer mode '" + name + "' (expected plain or adaptive)");
}

OptimState::OptimState(OptimizerOptions options) : options_(options) {
    if (!(options_.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(options_.weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
}

void OptimState::step(NamedTensors& params, const NamedTensors& grads) {
    ++step_;
    const double lr = options_.learning_rate;
    const double wd = options_.weight_decay;
    for (auto& [name, p] : params) {
        auto it = grads.find(name);
        if (it == grads.end()) continue;
        const Tensor& g = it->second;
        if (!p.same_shape(g)) {
            throw DimensionError("optimizer: gradient for '" + name + "' has shape " + shape_str(g.shape()) +
                                 ", parameter has " + shape_str(p.shape()));
        }
        if (options_.mode == OptimizerMode::Plain) {
            for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * (g[i] + wd * p[i]);
        } else {
            auto m_it = first_moment_.try_emplace(name, Tensor::zeros(p.shape())).first;
            auto v_it = second_moment_.try_emplace(name, Tensor::zeros(p.shape())).first;
            Tensor& m = m_it->second;
            Tensor& v = v_it->second;
            const double b1 = options_.beta1, b2 = options_.beta2;
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.epsilon);
                p[i] -= lr * (update + wd * p[i]);
            }
        }
        p.check_finite("optimizer step");
    }
}

void sgd_step(NamedTensors& params, const NamedTensors& grads, OptimState& state) { state.step(params, grads); }

} // namespace mergelab::autodiff
