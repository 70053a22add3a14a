// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/ri/distill.hpp"

#include "twin.hpp"

namespace mergelab {

DistillResult merge_distill_aux(const ExpertBundle& bundle, const TaskVector& tau_m, const RiConfig& cfg,
                                const AuxSampler& aux) {
    bundle.validate();
    cfg.validate();
    require_origin(tau_m, bundle.theta0.fingerprint());
    tau_m.delta.require_compatible(bundle.theta0, "distillation start");
    using Term = detail::TwinObjective::Term;
    std::vector<Term> terms;
    std::vector<ParamSet> teachers;
    for (std::size_t i = 0; i < bundle.tasks(); ++i) {
        terms.push_back({i, i, true});
        teachers.push_back(bundle.expert(i));
    }
    detail::TwinObjective objective(bundle.theta0, bundle.heads, std::move(teachers), terms, 0.0, cfg.metric);
    detail::LoopOptions options = detail::loop_options(cfg);
    options.snapshot_every = 0;
    detail::LoopResult run = detail::run_descent(objective, tau_m.delta, options, aux, Prng(cfg.seed).split("distill"));
    DistillResult out;
    out.tau = TaskVector{std::move(run.delta), tau_m.origin};
    for (const RiLoss& l : run.history) out.loss.push_back(l.total);
    out.steps_run = run.history.size();
    out.diverged = run.diverged;
    out.diagnostic = run.diagnostic;
    out.wall_seconds = run.wall_seconds;
    return out;
}

DistillResult zero_shot_distill(const ExpertBundle& bundle, const RiConfig& cfg, const AuxSampler& aux) {
    const TaskVector zero{bundle.theta0.zeros_like(), bundle.theta0.fingerprint()};
    return merge_distill_aux(bundle, zero, cfg, aux);
}

} // namespace mergelab
