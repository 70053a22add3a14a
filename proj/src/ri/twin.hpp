// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "mergelab/autodiff/graph.hpp"
#include "mergelab/ri/resolve.hpp"

namespace mergelab::detail {

// Student theta_0 + delta scored against frozen teachers under chosen heads:
//   total = sum_{preserve terms} d + interference_weight * sum_{other terms} d.
class TwinObjective {
public:
    struct Term {
        std::size_t head;
        std::size_t teacher;
        bool preserve;
    };

    TwinObjective(const ParamSet& theta0, std::vector<TaskHead> heads, std::vector<ParamSet> teachers,
                  std::vector<Term> terms, double interference_weight, DistanceMetric metric);

    /// Loss components on batch x; fills `grad` (same names as delta) when given.
    RiLoss evaluate(const Tensor& x, const ParamSet& delta, ParamSet* grad);

private:
    autodiff::Graph graph_;
    autodiff::NamedTensors fixed_;
    std::vector<TaskHead> heads_;
    std::vector<ParamSet> teachers_;
    std::vector<Term> terms_;
    autodiff::NodeId total_{}, preserve_{}, interference_{};
    bool has_interference_ = false;
};

struct LoopOptions {
    std::size_t steps = 0;
    std::size_t batch_size = 128;
    autodiff::OptimizerOptions optimizer;
    bool early_stop = false;
    std::size_t snapshot_every = 0;
};

struct LoopResult {
    ParamSet delta;
    std::vector<RiLoss> history;
    std::vector<std::pair<std::size_t, ParamSet>> snapshots;
    bool diverged = false;
    std::string diagnostic;
    double wall_seconds = 0.0;
};

LoopResult run_descent(TwinObjective& objective, ParamSet delta, const LoopOptions& options, const AuxSampler& aux,
                       Prng rng);

autodiff::OptimizerOptions optimizer_options(const RiConfig& cfg);
LoopOptions loop_options(const RiConfig& cfg);

} // namespace mergelab::detail
