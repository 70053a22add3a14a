// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mergelab/core/tensor.hpp"

namespace mergelab {

struct SuiteSpec {
    std::size_t input_dim = 16;
    std::size_t classes = 20;
    std::size_t tasks = 4;
    /// Within-class standard deviation.
    double sigma = 0.5;
    /// Standard deviation of the class means around the origin.
    double mean_scale = 0.5;
    std::size_t train_per_class = 500;
    std::size_t eval_per_class = 200;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static SuiteSpec from_json(const nlohmann::json& j);
    /// Short deterministic identifier derived from every field.
    std::string id() const;
};

struct TaskData {
    Tensor x;
    /// Task-local class index per row.
    std::vector<std::size_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

struct TaskSuite {
    SuiteSpec spec;
    /// classes x input_dim.
    Tensor means;
    /// Global class ids of each task, disjoint and covering.
    std::vector<std::vector<std::size_t>> partition;
    std::vector<TaskData> train;
    std::vector<TaskData> eval;

    std::size_t tasks() const noexcept { return partition.size(); }
    std::size_t task_classes(std::size_t task) const { return partition.at(task).size(); }
    std::vector<Tensor> eval_inputs() const;
};

/// Throws ConfigError when the classes cannot be split into tasks of at least
/// two classes each.
TaskSuite gen_suite(const SuiteSpec& spec);

/// Regenerates the suite described by a checkpoint's suite descriptor.
TaskSuite suite_from_descriptor(const std::string& descriptor);

} // namespace mergelab
