// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mergelab/ri/resolve.hpp"

namespace mergelab {

struct DistillResult {
    TaskVector tau;
    /// Sum over tasks of dist(expert_i, student) under head i, per step.
    std::vector<double> loss;
    std::size_t steps_run = 0;
    bool diverged = false;
    std::string diagnostic;
    double wall_seconds = 0.0;
};

/// Distills all experts into theta_0 + tau_m on auxiliary data, updating tau_m
/// only. Uses cfg's optimizer, step, batch and metric settings; alpha is unused.
DistillResult merge_distill_aux(const ExpertBundle& bundle, const TaskVector& tau_m, const RiConfig& cfg,
                                const AuxSampler& aux);

/// merge_distill_aux started from tau_m = 0; the adapted model is
/// apply(theta_0, result.tau).
DistillResult zero_shot_distill(const ExpertBundle& bundle, const RiConfig& cfg, const AuxSampler& aux);

} // namespace mergelab
