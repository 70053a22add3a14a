// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "mergelab/autodiff/graph.hpp"

namespace mergelab::autodiff {

enum class OptimizerMode { Plain, Adaptive };

const char* mode_name(OptimizerMode mode);
OptimizerMode parse_optimizer_mode(const std::string& name);

struct OptimizerOptions {
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    OptimizerMode mode = OptimizerMode::Plain;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Gradient descent with decoupled weight decay.
///
///   plain:     p <- p - lr * (g + wd * p)
///   adaptive:  p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
///
/// with bias-corrected first/second moments m_hat, v_hat.
class OptimState {
public:
    explicit OptimState(OptimizerOptions options);

    const OptimizerOptions& options() const noexcept { return options_; }
    std::uint64_t steps() const noexcept { return step_; }

    /// Updates every entry of `params` that has a gradient of matching shape.
    void step(NamedTensors& params, const NamedTensors& grads);

private:
    OptimizerOptions options_;
    std::uint64_t step_ = 0;
    NamedTensors first_moment_;
    NamedTensors second_moment_;
};

/// One optimizer step; free-function form of OptimState::step.
void sgd_step(NamedTensors& params, const NamedTensors& grads, OptimState& state);

} // namespace mergelab::autodiff
