// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mergelab/model/params.hpp"

namespace mergelab {

/// What a method did to one parameter tensor.
struct LayerRecord {
    std::string tensor;
    std::string rule;
    /// Fraction of total |value| mass that survived top-k trimming.
    std::optional<double> kept_mass;
    /// Fraction of nonzero (trimmed) task entries whose sign matches the elected sign.
    std::optional<double> sign_agreement;
    std::vector<double> spectrum;
    std::optional<std::size_t> rank;
    std::vector<double> coefficients;
    std::vector<std::string> warnings;
};

struct MergeDiagnostics {
    std::string method;
    double lambda = 1.0;
    std::vector<LayerRecord> layers;
    std::vector<std::string> warnings;
};

struct MergeOutput {
    TaskVector tau;
    MergeDiagnostics diagnostics;
};

using TaskVectors = std::span<const TaskVector>;

MergeOutput merge_averaging(TaskVectors taus, double lambda = 1.0);
MergeOutput merge_ta(TaskVectors taus, double lambda);
MergeOutput merge_ties(TaskVectors taus, double topk, double lambda);
MergeOutput merge_knots(TaskVectors taus, double topk, double lambda);
MergeOutput merge_tsvm(TaskVectors taus, double lambda, bool literal = false);
MergeOutput merge_iso_c(TaskVectors taus, double lambda, bool literal = false);
MergeOutput merge_iso_cts(TaskVectors taus, double lambda, double common_fraction);

namespace merge_ops {

/// Sum over tasks with each coordinate's addends sorted first, so the result
/// does not depend on task order.
Tensor ordered_sum(std::span<const Tensor> xs);
Tensor ordered_mean(std::span<const Tensor> xs);

/// Keeps the ceil(topk * size) largest-magnitude entries; ties at the
/// boundary keep the lower flat index.
Tensor trim_topk(const Tensor& x, double topk);

/// Trim, elect sign(sum), mean over sign-matching nonzero entries. Unscaled.
Tensor ties(std::span<const Tensor> xs, double topk, LayerRecord* record = nullptr);

/// ties() without trimming.
Tensor sign_elected_mean(std::span<const Tensor> xs, LayerRecord* record = nullptr);

/// Per-task s_i = max(floor, mean_{j != i} cos(x_i, x_j)).
std::vector<double> similarity_coefficients(std::span<const Tensor> xs, double floor = 1e-3);

/// Replaces the top ceil(fraction * rank) singular values of x by their mean.
Tensor flatten_spectrum(const Tensor& x, double fraction, LayerRecord* record = nullptr);

} // namespace merge_ops

} // namespace mergelab
