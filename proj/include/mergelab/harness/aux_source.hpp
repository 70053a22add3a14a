// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mergelab/harness/suite.hpp"
#include "mergelab/ri/resolve.hpp"

namespace mergelab {

enum class AuxKind { GaussianNoise, StructuredSynthetic, NearDistribution, OracleTaskData };

std::string_view aux_kind_id(AuxKind k);
AuxKind parse_aux_kind(std::string_view id);

struct AuxSpec {
    AuxKind kind = AuxKind::NearDistribution;
    /// near_distribution: std of the offset added to every class mean.
    double perturbation = 0.5;
    /// structured_synthetic: rank bound of each sample viewed as a matrix.
    std::size_t rank = 2;
    /// structured_synthetic: number of constant pieces per step factor.
    std::size_t pieces = 3;
    /// 0 = fresh samples on every draw; otherwise draws come from a fixed pool
    /// of this many samples.
    std::size_t pool_size = 0;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static AuxSpec from_json(const nlohmann::json& j);
    bool privileged() const noexcept { return kind == AuxKind::OracleTaskData; }
};

/// Immutable batch source; sample() is safe to call from several threads.
class AuxSource {
public:
    /// `suite` is required by near_distribution and oracle_task_data.
    AuxSource(const AuxSpec& spec, const TaskSuite* suite);

    const AuxSpec& spec() const noexcept { return spec_; }
    std::size_t input_dim() const noexcept { return dim_; }
    Tensor sample(Prng& rng, std::size_t batch) const;
    AuxSampler sampler() const;

    /// Rows x cols grid a structured sample is drawn on.
    std::pair<std::size_t, std::size_t> grid() const noexcept { return {grid_rows_, grid_cols_}; }

private:
    Tensor fresh(Prng& rng, std::size_t batch) const;

    AuxSpec spec_;
    std::size_t dim_ = 0;
    std::size_t grid_rows_ = 0, grid_cols_ = 0;
    Tensor means_;
    double sigma_ = 0.0;
    Tensor oracle_;
    Tensor pool_;
};

} // namespace mergelab
