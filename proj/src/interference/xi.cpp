// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/interference/xi.hpp"

#include "mergelab/core/error.hpp"
#include "mergelab/core/kernels.hpp"

namespace mergelab {

InterferenceReport xi(const ExpertBundle& bundle, const ParamSet& theta_m, std::span<const Tensor> eval_sets,
                      DistanceMetric metric, const std::string& eval_set_id) {
    bundle.validate();
    const std::size_t n = bundle.tasks();
    if (eval_sets.size() != n) {
        throw DimensionError("xi: " + std::to_string(n) + " tasks but " + std::to_string(eval_sets.size()) +
                             " evaluation sets");
    }
    theta_m.require_compatible(bundle.theta0, "xi merged model");
    InterferenceReport report;
    report.metric = metric;
    report.eval_set = eval_set_id;
    report.per_task.assign(n, 0.0);
    kernels::parallel_for(n, [&](std::size_t i) {
        const TaskHead& head = bundle.heads[i];
        const Tensor teacher = model_logits(bundle.expert(i), head, eval_sets[i]);
        const Tensor student = model_logits(theta_m, head, eval_sets[i]);
        report.per_task[i] = dist(metric, teacher, student);
    });
    for (std::size_t i = 0; i < n; ++i) {
        report.total += report.per_task[i];
        report.samples += eval_sets[i].dim(0);
    }
    return report;
}

} // namespace mergelab
