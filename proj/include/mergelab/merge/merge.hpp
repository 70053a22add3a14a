// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mergelab/merge/config.hpp"
#include "mergelab/merge/methods.hpp"
#include "mergelab/model/network.hpp"

namespace mergelab {

/// Runs the configured method on the bundle's task vectors. cfg.tasks may be
/// left 0; otherwise it must equal the bundle's task count.
MergeOutput merge(const ExpertBundle& bundle, const MergeConfig& cfg);
MergeOutput merge(TaskVectors taus, const MergeConfig& cfg);

/// theta_0 + tau_m.
ParamSet merged_model(const ExpertBundle& bundle, const MergeOutput& out);

} // namespace mergelab
