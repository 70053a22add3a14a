// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/interference/distance.hpp"

#include <cmath>
#include <string>

#include "mergelab/core/error.hpp"
#include "mergelab/core/kernels.hpp"

namespace mergelab {

std::string_view metric_id(DistanceMetric m) {
    switch (m) {
    case DistanceMetric::Kl: return "kl";
    case DistanceMetric::CrossEntropy: return "cross_entropy";
    case DistanceMetric::Mse: return "mse";
    }
    throw ConfigError("invalid distance metric value");
}

DistanceMetric parse_metric(std::string_view id) {
    for (auto m : {DistanceMetric::Kl, DistanceMetric::CrossEntropy, DistanceMetric::Mse})
        if (metric_id(m) == id) return m;
    throw ConfigError("unknown distance metric '" + std::string(id) + "' (known: kl, cross_entropy, mse)");
}

double dist(DistanceMetric metric, const Tensor& teacher, const Tensor& student) {
    if (teacher.rank() != 2 || !teacher.same_shape(student)) {
        throw DimensionError("dist: teacher " + shape_str(teacher.shape()) + " and student " +
                             shape_str(student.shape()) + " logits must be equal-shape matrices");
    }
    const std::size_t rows = teacher.dim(0), cols = teacher.dim(1);
    double total = 0.0;
    if (metric == DistanceMetric::Mse) {
        for (std::size_t i = 0; i < teacher.size(); ++i) {
            const double d = student[i] - teacher[i];
            total += d * d;
        }
        return total / static_cast<double>(teacher.size());
    }
    const Tensor log_p = log_softmax(teacher);
    const Tensor log_q = log_softmax(student);
    for (std::size_t r = 0; r < rows; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double lp = log_p.at(r, c);
            const double p = std::exp(lp);
            row += metric == DistanceMetric::Kl ? p * (lp - log_q.at(r, c)) : -p * log_q.at(r, c);
        }
        total += row;
    }
    return total / static_cast<double>(rows);
}

} // namespace mergelab
