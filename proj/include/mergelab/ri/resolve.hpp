// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mergelab/core/prng.hpp"
#include "mergelab/ri/ri_loss.hpp"

namespace mergelab {

/// Draws a B x d batch of auxiliary inputs from the given stream. Must be safe
/// to call concurrently with distinct generators.
using AuxSampler = std::function<Tensor(Prng& rng, std::size_t batch)>;

struct RiTrace {
    std::size_t expert = 0;
    std::vector<double> preserve;
    /// L2 / (N - 1).
    std::vector<double> interference;
    std::vector<double> total;
    std::size_t steps_run = 0;
    bool diverged = false;
    std::string diagnostic;
    double wall_seconds = 0.0;
    /// (completed steps, adapted vector) pairs when snapshots are enabled.
    std::vector<std::pair<std::size_t, TaskVector>> snapshots;
};

struct RiResult {
    ExpertBundle adapted;
    std::vector<RiTrace> traces;

    bool any_diverged() const;
};

/// Adapts every task vector independently on auxiliary data. Expert i draws
/// from Prng(cfg.seed).split("ri-expert", i), so results do not depend on the
/// order or concurrency of the per-expert runs.
RiResult resolve_interference(const ExpertBundle& bundle, const RiConfig& cfg, const AuxSampler& aux);

} // namespace mergelab
