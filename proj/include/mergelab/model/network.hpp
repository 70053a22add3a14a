// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "mergelab/autodiff/graph.hpp"
#include "mergelab/core/prng.hpp"
#include "mergelab/model/params.hpp"

namespace mergelab {

/// Two-layer tanh MLP backbone: d -> hidden -> embed, tanh after each affine.
struct BackboneArch {
    std::size_t input_dim = 16;
    std::size_t hidden = 64;
    std::size_t embed = 32;

    std::string id() const;
    static BackboneArch parse(const std::string& id);
    friend bool operator==(const BackboneArch&, const BackboneArch&) = default;
};

namespace param_names {
inline const std::string kW1 = "backbone.l1.w";
inline const std::string kB1 = "backbone.l1.b";
inline const std::string kW2 = "backbone.l2.w";
inline const std::string kB2 = "backbone.l2.b";
} // namespace param_names

/// Throws DimensionError unless theta has exactly the architecture's tensors.
void require_arch(const ParamSet& theta, const BackboneArch& arch);
BackboneArch infer_arch(const ParamSet& theta);

/// Xavier-normal weights, zero biases.
ParamSet init_backbone(const BackboneArch& arch, Prng& rng);

/// f(x | theta): B x input_dim -> B x embed.
Tensor backbone_forward(const ParamSet& theta, const Tensor& x);

struct TaskHead {
    std::size_t task = 0;
    Tensor weight; // embed x classes
    Tensor bias;   // classes

    std::size_t classes() const { return bias.size(); }
    void validate() const;
    friend bool operator==(const TaskHead&, const TaskHead&) = default;
};

TaskHead init_head(std::size_t task, std::size_t embed, std::size_t classes, Prng& rng);

/// h(emb): B x embed -> B x classes.
Tensor head_forward(const TaskHead& head, const Tensor& embedding);

/// h(f(x | theta)).
Tensor model_logits(const ParamSet& theta, const TaskHead& head, const Tensor& x);

/// Shared initialization, one task vector and one head per task.
struct ExpertBundle {
    ParamSet theta0;
    std::vector<TaskVector> vectors;
    std::vector<TaskHead> heads;
    std::string suite_id;
    /// Opaque suite descriptor carried through checkpoints so that tools can
    /// regenerate evaluation data.
    std::string suite_descriptor;

    std::size_t tasks() const noexcept { return vectors.size(); }
    ParamSet expert(std::size_t i) const { return apply(theta0, vectors.at(i)); }
    void validate() const;
    friend bool operator==(const ExpertBundle&, const ExpertBundle&) = default;
};

/// Graph nodes for the four backbone tensors.
struct BackboneNodes {
    autodiff::NodeId w1, b1, w2, b2;
};

/// Backbone inputs named `<prefix>backbone.l?.?`.
BackboneNodes backbone_inputs(autodiff::Graph& g, const std::string& prefix, bool trainable);
/// Backbone whose weights are base + delta, both given as nodes.
BackboneNodes backbone_sum(autodiff::Graph& g, const BackboneNodes& base, const BackboneNodes& delta);
autodiff::NodeId build_backbone(autodiff::Graph& g, autodiff::NodeId x, const BackboneNodes& p);

/// Binds the four backbone tensors of `theta` under `prefix`.
void bind_backbone(autodiff::NamedTensors& inputs, const std::string& prefix, const ParamSet& theta);

} // namespace mergelab
