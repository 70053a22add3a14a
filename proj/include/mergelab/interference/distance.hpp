// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

#include "mergelab/core/tensor.hpp"

namespace mergelab {

/// kl and cross_entropy compare softmax(logits); mse compares raw logits.
enum class DistanceMetric { Kl, CrossEntropy, Mse };

std::string_view metric_id(DistanceMetric m);
DistanceMetric parse_metric(std::string_view id);

/// Batch mean of the per-row distance, in nats for kl / cross_entropy.
/// kl = sum_c p (ln p - ln q), p = softmax(teacher), q = softmax(student).
double dist(DistanceMetric metric, const Tensor& teacher_logits, const Tensor& student_logits);

} // namespace mergelab
