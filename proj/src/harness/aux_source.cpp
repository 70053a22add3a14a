// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/harness/aux_source.hpp"

#include <cmath>

#include "mergelab/core/error.hpp"
#include "mergelab/model/network.hpp"

namespace mergelab {

using json = nlohmann::json;

std::string_view aux_kind_id(AuxKind k) {
    switch (k) {
    case AuxKind::GaussianNoise: return "gaussian_noise";
    case AuxKind::StructuredSynthetic: return "structured_synthetic";
    case AuxKind::NearDistribution: return "near_distribution";
    case AuxKind::OracleTaskData: return "oracle_task_data";
    }
    throw ConfigError("invalid auxiliary source kind");
}

AuxKind parse_aux_kind(std::string_view id) {
    for (auto k : {AuxKind::GaussianNoise, AuxKind::StructuredSynthetic, AuxKind::NearDistribution,
                   AuxKind::OracleTaskData})
        if (aux_kind_id(k) == id) return k;
    throw ConfigError("unknown auxiliary source '" + std::string(id) +
                      "' (known: gaussian_noise, structured_synthetic, near_distribution, oracle_task_data)");
}

json AuxSpec::to_json() const {
    return json{{"kind", aux_kind_id(kind)}, {"perturbation", perturbation}, {"rank", rank},
                {"pieces", pieces},          {"pool_size", pool_size},       {"seed", seed},
                {"privileged", privileged()}};
}

AuxSpec AuxSpec::from_json(const json& j) {
    AuxSpec s;
    try {
        if (j.contains("kind")) s.kind = parse_aux_kind(j.at("kind").get<std::string>());
        s.perturbation = j.value("perturbation", s.perturbation);
        s.rank = j.value("rank", s.rank);
        s.pieces = j.value("pieces", s.pieces);
        s.pool_size = j.value("pool_size", s.pool_size);
        s.seed = j.value("seed", s.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid auxiliary source description: ") + e.what());
    }
    return s;
}

AuxSource::AuxSource(const AuxSpec& spec, const TaskSuite* suite) : spec_(spec) {
    const bool needs_suite = spec.kind == AuxKind::NearDistribution || spec.kind == AuxKind::OracleTaskData;
    if (needs_suite && !suite) {
        throw ConfigError(std::string(aux_kind_id(spec.kind)) + " auxiliary data needs access to the task suite");
    }
    if (!(spec.perturbation >= 0.0)) throw ConfigError("near_distribution perturbation must be >= 0");
    dim_ = suite ? suite->spec.input_dim : BackboneArch{}.input_dim;
    const Prng root(spec.seed);
    switch (spec.kind) {
    case AuxKind::GaussianNoise: break;
    case AuxKind::StructuredSynthetic: {
        if (spec.rank == 0 || spec.pieces == 0) throw ConfigError("structured_synthetic needs rank and pieces >= 1");
        // Most square grid that tiles the input.
        grid_rows_ = 1;
        for (std::size_t r = 1; r * r <= dim_; ++r)
            if (dim_ % r == 0) grid_rows_ = r;
        grid_cols_ = dim_ / grid_rows_;
        break;
    }
    case AuxKind::NearDistribution: {
        sigma_ = suite->spec.sigma;
        Prng rng = root.split("aux-perturbation");
        means_ = suite->means;
        if (spec.perturbation > 0.0) axpy(spec.perturbation, prng_gaussian(rng, means_.shape()), means_);
        break;
    }
    case AuxKind::OracleTaskData: {
        std::vector<double> rows;
        std::size_t count = 0;
        for (const auto& t : suite->train) {
            rows.insert(rows.end(), t.x.values().begin(), t.x.values().end());
            count += t.size();
        }
        oracle_ = Tensor({count, dim_}, std::move(rows));
        break;
    }
    }
    if (spec.pool_size > 0) {
        Prng rng = root.split("aux-pool");
        pool_ = fresh(rng, spec.pool_size);
    }
}

Tensor AuxSource::fresh(Prng& rng, std::size_t batch) const {
    if (batch == 0) throw ConfigError("auxiliary batch size must be at least 1");
    switch (spec_.kind) {
    case AuxKind::GaussianNoise: return prng_gaussian(rng, {batch, dim_});
    case AuxKind::StructuredSynthetic: {
        // Sum of `rank` outer products; each factor is either Gaussian or a
        // piecewise-constant step pattern, giving smooth and blocky samples.
        Tensor out = Tensor::zeros({batch, dim_});
        std::vector<double> u(grid_rows_), v(grid_cols_);
        auto fill = [&](std::vector<double>& f) {
            if (rng.uniform() < 0.5) {
                for (double& e : f) e = rng.gaussian();
                return;
            }
            double level = rng.gaussian();
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (i > 0 && rng.below(f.size()) < spec_.pieces - 1) level = rng.gaussian();
                f[i] = level;
            }
        };
        const double norm = 1.0 / std::sqrt(static_cast<double>(spec_.rank));
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t k = 0; k < spec_.rank; ++k) {
                fill(u);
                fill(v);
                for (std::size_t i = 0; i < grid_rows_; ++i)
                    for (std::size_t j = 0; j < grid_cols_; ++j) out.at(b, i * grid_cols_ + j) += norm * u[i] * v[j];
            }
        }
        return out;
    }
    case AuxKind::NearDistribution: {
        Tensor out = Tensor::zeros({batch, dim_});
        const std::size_t classes = means_.dim(0);
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t c = rng.below(classes);
            for (std::size_t k = 0; k < dim_; ++k) out.at(b, k) = means_.at(c, k) + sigma_ * rng.gaussian();
        }
        return out;
    }
    case AuxKind::OracleTaskData: {
        std::vector<std::size_t> rows(batch);
        for (auto& r : rows) r = rng.below(oracle_.dim(0));
        return oracle_.gather_rows(rows);
    }
    }
    throw ConfigError("invalid auxiliary source kind");
}

Tensor AuxSource::sample(Prng& rng, std::size_t batch) const {
    if (pool_.empty()) return fresh(rng, batch);
    std::vector<std::size_t> rows(batch);
    for (auto& r : rows) r = rng.below(pool_.dim(0));
    return pool_.gather_rows(rows);
}

AuxSampler AuxSource::sampler() const {
    return [self = std::make_shared<const AuxSource>(*this)](Prng& rng, std::size_t batch) {
        return self->sample(rng, batch);
    };
}

} // namespace mergelab
