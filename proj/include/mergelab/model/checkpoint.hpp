// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "mergelab/model/network.hpp"

namespace mergelab {

// .mfckpt: newline-delimited JSON. Line 1 is a header record
//   {"arch", "format":"mfckpt", "kind":"bundle"|"params", "suite", "tensors", "version":1, ...}
// followed by one record per tensor {"name", "shape", "values"} where values
// are shortest round-trip decimal strings. Keys are sorted, so identical
// content always serializes to identical bytes.

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    std::string kind;
    std::string suite_id;
    std::optional<ExpertBundle> bundle;
    std::optional<ParamSet> params;
};

std::string checkpoint_text(const ExpertBundle& bundle);
std::string checkpoint_text(const ParamSet& params, const std::string& suite_id = "");
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const ExpertBundle& bundle);
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params, const std::string& suite_id = "");
Checkpoint load_checkpoint(const std::filesystem::path& path);
ExpertBundle load_bundle(const std::filesystem::path& path);
ParamSet load_params(const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `v`.
std::string exact_decimal(double v);
double parse_exact_decimal(const std::string& s);

} // namespace mergelab
