// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mergelab/harness/aux_source.hpp"
#include "mergelab/harness/suite.hpp"
#include "mergelab/harness/training.hpp"
#include "mergelab/merge/config.hpp"
#include "mergelab/ri/ri_loss.hpp"

namespace mergelab {

nlohmann::json ri_config_to_json(const RiConfig& c);
RiConfig ri_config_from_json(const nlohmann::json& j);

/// Unset optional hyperparameters are omitted.
nlohmann::json merge_config_to_json(const MergeConfig& c);
MergeConfig merge_config_from_json(const nlohmann::json& j);

/// Everything a command or experiment needs. Each sub-run for seed s uses s
/// for the suite, training, auxiliary source and RI streams.
struct RunConfig {
    std::uint64_t seed = 1;
    /// Seeds an experiment iterates over; empty means {seed}.
    std::vector<std::uint64_t> seeds;
    /// Merge methods an experiment covers; empty means all seven.
    std::vector<MergeMethod> methods;
    std::string out_dir = "runs";
    int jobs = 0;
    bool save_checkpoints = true;

    SuiteSpec suite;
    TrainConfig train;
    RiConfig ri;
    AuxSpec aux;
    MergeConfig merge;

    std::vector<std::uint64_t> seed_list() const;
    std::vector<MergeMethod> method_list() const;

    SuiteSpec suite_for(std::uint64_t s) const;
    TrainConfig train_for(std::uint64_t s) const;
    RiConfig ri_for(std::uint64_t s) const;
    AuxSpec aux_for(std::uint64_t s) const;

    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown top-level keys are rejected.
    static RunConfig from_json(const nlohmann::json& j);
};

/// Parses a JSON config file into a document (not yet a RunConfig, so that
/// command-line overrides can be layered on first).
nlohmann::json read_config_document(const std::filesystem::path& path);

/// Applies "a.b.c=value" to the document. The value is parsed as JSON when
/// possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

} // namespace mergelab
