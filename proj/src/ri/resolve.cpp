// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/ri/resolve.hpp"

#include <algorithm>

#include "mergelab/core/kernels.hpp"
#include "twin.hpp"

namespace mergelab {

bool RiResult::any_diverged() const {
    return std::any_of(traces.begin(), traces.end(), [](const RiTrace& t) { return t.diverged; });
}

RiResult resolve_interference(const ExpertBundle& bundle, const RiConfig& cfg, const AuxSampler& aux) {
    bundle.validate();
    cfg.validate();
    const std::size_t n = bundle.tasks();
    const Prng root(cfg.seed);
    RiResult result;
    result.adapted = bundle;
    result.traces.resize(n);
    kernels::parallel_for(n, [&](std::size_t i) {
        using Term = detail::TwinObjective::Term;
        // Teacher 0 is the expert itself, teacher 1 the pretrained backbone.
        std::vector<Term> terms{{i, 0, true}};
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) terms.push_back({j, 1, false});
        const double weight = n > 1 ? cfg.alpha / static_cast<double>(n - 1) : 0.0;
        detail::TwinObjective objective(bundle.theta0, bundle.heads, {bundle.expert(i), bundle.theta0}, terms, weight,
                                        cfg.metric);
        detail::LoopResult run = detail::run_descent(objective, bundle.vectors[i].delta, detail::loop_options(cfg), aux,
                                                     root.split("ri-expert", i));
        RiTrace& trace = result.traces[i];
        trace.expert = i;
        for (const RiLoss& l : run.history) {
            trace.preserve.push_back(l.preserve);
            trace.interference.push_back(n > 1 ? l.interference / static_cast<double>(n - 1) : 0.0);
            trace.total.push_back(l.total);
        }
        trace.steps_run = run.history.size();
        trace.diverged = run.diverged;
        trace.diagnostic = run.diagnostic;
        trace.wall_seconds = run.wall_seconds;
        const std::uint64_t origin = bundle.vectors[i].origin;
        for (auto& [step, delta] : run.snapshots) trace.snapshots.emplace_back(step, TaskVector{std::move(delta), origin});
        result.adapted.vectors[i] = TaskVector{std::move(run.delta), origin};
    });
    return result;
}

} // namespace mergelab
