// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/merge/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mergelab/core/error.hpp"

namespace mergelab {

namespace {

struct MethodName {
    MergeMethod method;
    std::string_view id;
};

constexpr std::array<MethodName, 7> kNames{{
    {MergeMethod::Averaging, "averaging"},
    {MergeMethod::TaskArithmetic, "ta"},
    {MergeMethod::Ties, "ties"},
    {MergeMethod::Knots, "knots"},
    {MergeMethod::Tsvm, "tsvm"},
    {MergeMethod::IsoC, "iso_c"},
    {MergeMethod::IsoCts, "iso_cts"},
}};

using Row = std::array<double, 4>;

constexpr Row kTaLambda{0.42, 0.30, 0.22, 0.15};
constexpr Row kIsoCLambda{1.9, 1.3, 1.0, 0.9};
constexpr Row kIsoCtsLambda{2.1, 1.5, 1.2, 1.1};

double table_lookup(const Row& row, std::size_t tasks, bool& published) {
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (kTableTaskCounts[k] == tasks) {
            published = true;
            return row[k];
        }
    }
    published = false;
    // Piecewise linear in ln N through the published points, extended at both ends.
    std::size_t k = 0;
    while (k + 2 < row.size() && tasks > kTableTaskCounts[k + 1]) ++k;
    const double x0 = std::log(static_cast<double>(kTableTaskCounts[k]));
    const double x1 = std::log(static_cast<double>(kTableTaskCounts[k + 1]));
    const double x = std::log(static_cast<double>(tasks));
    const double v = row[k] + (row[k + 1] - row[k]) * (x - x0) / (x1 - x0);
    return std::max(v, 0.01);
}

} // namespace

std::string_view method_id(MergeMethod m) {
    for (const auto& n : kNames)
        if (n.method == m) return n.id;
    throw ConfigError("invalid merge method value");
}

MergeMethod parse_method(std::string_view id) {
    for (const auto& n : kNames)
        if (n.id == id) return n.method;
    std::string known;
    for (const auto& n : kNames) known += (known.empty() ? "" : ", ") + std::string(n.id);
    throw ConfigError("unknown merge method '" + std::string(id) + "' (known: " + known + ")");
}

const std::vector<MergeMethod>& all_methods() {
    static const std::vector<MergeMethod> methods = [] {
        std::vector<MergeMethod> v;
        for (const auto& n : kNames) v.push_back(n.method);
        return v;
    }();
    return methods;
}

MethodDefaults method_defaults(MergeMethod m, std::size_t tasks) {
    if (tasks == 0) throw ConfigError("merge defaults need a task count of at least 1");
    MethodDefaults d;
    switch (m) {
    case MergeMethod::Averaging:
    case MergeMethod::Ties:
    case MergeMethod::Knots:
    case MergeMethod::Tsvm:
        d.lambda = 1.0;
        break;
    case MergeMethod::TaskArithmetic:
        d.lambda = table_lookup(kTaLambda, tasks, d.lambda_published);
        break;
    case MergeMethod::IsoC:
        d.lambda = table_lookup(kIsoCLambda, tasks, d.lambda_published);
        break;
    case MergeMethod::IsoCts:
        d.lambda = table_lookup(kIsoCtsLambda, tasks, d.lambda_published);
        break;
    }
    return d;
}

MergeConfig resolve(MergeConfig cfg) {
    const MethodDefaults d = method_defaults(cfg.method, cfg.tasks);
    if (!cfg.lambda) cfg.lambda = d.lambda;
    if (!cfg.topk) cfg.topk = d.topk;
    if (!cfg.common_fraction) cfg.common_fraction = d.common_fraction;
    if (!(*cfg.lambda > 0.0) || !std::isfinite(*cfg.lambda)) {
        throw ConfigError("scaling coefficient must be positive, got " + std::to_string(*cfg.lambda));
    }
    if (!(*cfg.topk > 0.0 && *cfg.topk <= 1.0)) {
        throw ConfigError("top-k fraction must lie in (0, 1], got " + std::to_string(*cfg.topk));
    }
    if (!(*cfg.common_fraction > 0.0 && *cfg.common_fraction <= 1.0)) {
        throw ConfigError("common-space fraction must lie in (0, 1], got " + std::to_string(*cfg.common_fraction));
    }
    if (cfg.literal && cfg.method != MergeMethod::IsoC && cfg.method != MergeMethod::Tsvm) {
        throw ConfigError("the literal variant exists only for iso_c and tsvm");
    }
    return cfg;
}

} // namespace mergelab
