// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "mergelab/autodiff/optimizer.hpp"
#include "mergelab/harness/suite.hpp"
#include "mergelab/model/network.hpp"

namespace mergelab {

struct TrainConfig {
    /// Coarse pretraining of theta_0 on a random two-way grouping of all classes.
    std::size_t pretrain_epochs = 1;
    /// Head-only fitting on theta_0 features before fine-tuning.
    std::size_t probe_epochs = 3;
    /// Joint backbone + head fine-tuning per expert.
    std::size_t epochs = 5;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    autodiff::OptimizerMode optimizer = autodiff::OptimizerMode::Adaptive;
    /// Experts below this own-task eval accuracy fail training (0 disables).
    double accuracy_gate = 0.9;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainReport {
    std::vector<double> zero_shot;
    std::vector<double> finetuned;
    double pretrain_accuracy = 0.0;
};

/// Pretrains theta_0, fits one head per task and fine-tunes one expert per
/// task. Throws TrainingError if an expert misses the accuracy gate.
ExpertBundle train_experts(const TaskSuite& suite, const TrainConfig& cfg, TrainReport* report = nullptr);

/// Eval-split accuracy of each task under `theta` and its head.
std::vector<double> evaluate(const ParamSet& theta, const std::vector<TaskHead>& heads, const TaskSuite& suite);
double accuracy(const Tensor& logits, const std::vector<std::size_t>& labels);

double mean_of(const std::vector<double>& v);

} // namespace mergelab
