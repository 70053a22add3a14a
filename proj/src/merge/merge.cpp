// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/merge/merge.hpp"

#include "mergelab/core/error.hpp"

namespace mergelab {

MergeOutput merge(TaskVectors taus, const MergeConfig& requested) {
    MergeConfig cfg = requested;
    if (cfg.tasks == 0) cfg.tasks = taus.size();
    if (cfg.tasks != taus.size()) {
        throw ConfigError("merge configured for " + std::to_string(cfg.tasks) + " tasks but given " +
                          std::to_string(taus.size()));
    }
    cfg = resolve(cfg);
    const double lambda = *cfg.lambda;
    MergeOutput out;
    switch (cfg.method) {
    case MergeMethod::Averaging: out = merge_averaging(taus, lambda); break;
    case MergeMethod::TaskArithmetic: out = merge_ta(taus, lambda); break;
    case MergeMethod::Ties: out = merge_ties(taus, *cfg.topk, lambda); break;
    case MergeMethod::Knots: out = merge_knots(taus, *cfg.topk, lambda); break;
    case MergeMethod::Tsvm: out = merge_tsvm(taus, lambda, cfg.literal); break;
    case MergeMethod::IsoC: out = merge_iso_c(taus, lambda, cfg.literal); break;
    case MergeMethod::IsoCts: out = merge_iso_cts(taus, lambda, *cfg.common_fraction); break;
    }
    if (!method_defaults(cfg.method, cfg.tasks).lambda_published && !requested.lambda) {
        out.diagnostics.warnings.push_back("scaling coefficient " + std::to_string(lambda) +
                                           " interpolated in log(N) for N = " + std::to_string(cfg.tasks));
    }
    return out;
}

MergeOutput merge(const ExpertBundle& bundle, const MergeConfig& cfg) {
    bundle.validate();
    return merge(TaskVectors(bundle.vectors), cfg);
}

ParamSet merged_model(const ExpertBundle& bundle, const MergeOutput& out) { return apply(bundle.theta0, out.tau); }

} // namespace mergelab
