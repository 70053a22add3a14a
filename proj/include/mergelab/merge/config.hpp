// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mergelab {

enum class MergeMethod { Averaging, TaskArithmetic, Ties, Knots, Tsvm, IsoC, IsoCts };

std::string_view method_id(MergeMethod m);
/// Throws ConfigError for anything outside the seven supported ids.
MergeMethod parse_method(std::string_view id);
const std::vector<MergeMethod>& all_methods();

/// Task counts with a published default scaling coefficient.
inline constexpr std::size_t kTableTaskCounts[] = {2, 8, 14, 20};

struct MethodDefaults {
    double lambda = 1.0;
    double topk = 0.2;
    double common_fraction = 0.8;
    /// False when lambda was interpolated in log(N) between published task counts.
    bool lambda_published = true;
};

/// Default hyperparameters for `tasks` tasks. Published task counts return the
/// table entries unchanged; other counts interpolate (or extrapolate at the
/// ends) linearly in ln N.
MethodDefaults method_defaults(MergeMethod m, std::size_t tasks);

struct MergeConfig {
    MergeMethod method = MergeMethod::TaskArithmetic;
    std::optional<double> lambda;
    std::optional<double> topk;
    std::optional<double> common_fraction;
    std::size_t tasks = 0;
    /// Iso-C and TSV-M only: use the literal appendix formulas, which collapse
    /// to a (projected) plain mean.
    bool literal = false;
};

/// Fills unset fields from method_defaults and checks lambda > 0,
/// topk and common_fraction in (0, 1].
MergeConfig resolve(MergeConfig cfg);

} // namespace mergelab
