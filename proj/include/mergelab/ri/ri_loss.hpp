// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "mergelab/autodiff/optimizer.hpp"
#include "mergelab/interference/distance.hpp"
#include "mergelab/model/network.hpp"

namespace mergelab {

struct RiConfig {
    double alpha = 1.0;
    DistanceMetric metric = DistanceMetric::Kl;
    std::size_t steps = 500;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    autodiff::OptimizerMode optimizer = autodiff::OptimizerMode::Adaptive;
    /// Stop once the 100-step moving average of the loss improves by less
    /// than 0.1% relative to the previous 100 steps.
    bool early_stop = false;
    /// Keep a copy of each adapted vector every this many steps (0 = never).
    std::size_t snapshot_every = 0;
    std::string aux_source = "near_distribution";
    std::uint64_t seed = 0;

    /// lr 1e-6 and 2500 steps, as used for the full-size vision models.
    static RiConfig paper_scale();
    void validate() const;
};

struct RiLoss {
    double total = 0.0;
    /// L1: adapted vs original expert under the expert's own head.
    double preserve = 0.0;
    /// L2: sum over the other heads of adapted vs pretrained backbone.
    double interference = 0.0;
};

/// L_RI = L1 + alpha / (N - 1) * L2 for expert i on batch x, with the
/// adapted vector `tau_star` (N = 1 gives L2 = 0).
RiLoss ri_loss(const Tensor& x, const ExpertBundle& bundle, std::size_t expert, const ParamSet& tau_star,
               double alpha, DistanceMetric metric = DistanceMetric::Kl);

} // namespace mergelab
