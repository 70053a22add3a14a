// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "mergelab/harness/config.hpp"
#include "mergelab/harness/report.hpp"

namespace mergelab {

/// merge_grid, distance_metrics, distill_baselines, aux_sources,
/// hp_sensitivity, aux_size, avg_scale_sweep, trajectory.
const std::vector<std::string>& experiment_names();

/// Runs one experiment over cfg.seed_list(). Sub-run failures are recorded in
/// the report's failures list; an unknown name throws ConfigError listing the
/// valid ones.
ExperimentReport run_experiment(const std::string& name, const RunConfig& cfg);

/// Coefficients applied to the sum of task vectors: k / (2N) for k = 0..12,
/// i.e. zero up to six times the plain-averaging weight.
std::vector<double> avg_scale_grid(std::size_t tasks);

struct SweepGrid {
    std::vector<double> lambdas;
    /// "topk", "common_fraction" or empty.
    std::string secondary_name;
    std::vector<double> secondary;
    double secondary_default = 0.0;
};

/// Tuning grid of a method: 30 scaling coefficients plus the method's second
/// hyperparameter where it has one. Throws ConfigError for methods without a
/// tuning grid (averaging, tsvm).
SweepGrid hp_grid(MergeMethod method, std::size_t tasks);
const std::vector<MergeMethod>& hp_methods();

/// Auxiliary-data budget fractions swept by aux_size.
const std::vector<double>& aux_size_fractions();

} // namespace mergelab
