// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/ri/ri_loss.hpp"

#include <cmath>

#include "mergelab/core/error.hpp"

namespace mergelab {

RiConfig RiConfig::paper_scale() {
    RiConfig c;
    c.learning_rate = 1e-6;
    c.steps = 2500;
    return c;
}

void RiConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be a finite value >= 0");
    if (batch_size == 0) throw ConfigError("batch size must be at least 1");
    if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0)) {
        throw ConfigError("learning rate and weight decay must be >= 0");
    }
}

RiLoss ri_loss(const Tensor& x, const ExpertBundle& bundle, std::size_t expert, const ParamSet& tau_star,
               double alpha, DistanceMetric metric) {
    bundle.validate();
    const std::size_t n = bundle.tasks();
    if (expert >= n) throw DimensionError("ri_loss: expert " + std::to_string(expert) + " of " + std::to_string(n));
    tau_star.require_compatible(bundle.theta0, "ri_loss adapted vector");
    const ParamSet adapted = bundle.theta0 + tau_star;
    const Tensor emb_adapted = backbone_forward(adapted, x);
    const Tensor emb_zero = backbone_forward(bundle.theta0, x);
    RiLoss out;
    const TaskHead& own = bundle.heads[expert];
    out.preserve = dist(metric, model_logits(bundle.expert(expert), own, x), head_forward(own, emb_adapted));
    for (std::size_t j = 0; j < n; ++j) {
        if (j == expert) continue;
        out.interference += dist(metric, head_forward(bundle.heads[j], emb_zero), head_forward(bundle.heads[j], emb_adapted));
    }
    out.total = n > 1 ? out.preserve + (alpha / static_cast<double>(n - 1)) * out.interference : out.preserve;
    return out;
}

} // namespace mergelab
