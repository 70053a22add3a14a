// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "mergelab/interference/distance.hpp"
#include "mergelab/model/network.hpp"

namespace mergelab {

struct InterferenceReport {
    std::vector<double> per_task;
    /// per_task summed in task order.
    double total = 0.0;
    DistanceMetric metric = DistanceMetric::Kl;
    std::string eval_set;
    std::size_t samples = 0;
};

/// Cross-task interference of a merged model: for each task i, the mean
/// distance between expert i's head-i logits and the merged model's head-i
/// logits on eval_sets[i].
InterferenceReport xi(const ExpertBundle& bundle, const ParamSet& theta_m, std::span<const Tensor> eval_sets,
                      DistanceMetric metric = DistanceMetric::Kl, const std::string& eval_set_id = "");

} // namespace mergelab
