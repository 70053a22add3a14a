// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/model/network.hpp"

#include <cmath>
#include <cstdio>

#include "mergelab/core/error.hpp"
#include "mergelab/core/kernels.hpp"

namespace mergelab {

using namespace param_names;

std::string BackboneArch::id() const {
    return "mlp-tanh:" + std::to_string(input_dim) + "-" + std::to_string(hidden) + "-" + std::to_string(embed);
}

BackboneArch BackboneArch::parse(const std::string& id) {
    BackboneArch a;
    unsigned long d = 0, h = 0, e = 0;
    char tail = 0;
    if (std::sscanf(id.c_str(), "mlp-tanh:%lu-%lu-%lu%c", &d, &h, &e, &tail) != 3 || !d || !h || !e) {
        throw FormatError("unrecognized architecture id '" + id + "'");
    }
    a.input_dim = d;
    a.hidden = h;
    a.embed = e;
    return a;
}

void require_arch(const ParamSet& theta, const BackboneArch& arch) {
    const std::pair<const std::string*, Shape> expected[] = {
        {&kW1, {arch.input_dim, arch.hidden}},
        {&kB1, {arch.hidden}},
        {&kW2, {arch.hidden, arch.embed}},
        {&kB2, {arch.embed}},
    };
    if (theta.size() != 4) {
        throw DimensionError("backbone expects 4 tensors, got " + std::to_string(theta.size()));
    }
    for (const auto& [name, shape] : expected) {
        if (!theta.contains(*name)) throw DimensionError("backbone tensor '" + *name + "' missing");
        if (theta.at(*name).shape() != shape) {
            throw DimensionError("backbone tensor '" + *name + "' has shape " + shape_str(theta.at(*name).shape()) +
                                 ", architecture " + arch.id() + " needs " + shape_str(shape));
        }
    }
}

BackboneArch infer_arch(const ParamSet& theta) {
    if (!theta.contains(kW1) || !theta.contains(kW2) || theta.at(kW1).rank() != 2 || theta.at(kW2).rank() != 2) {
        throw DimensionError("parameter set is not a backbone");
    }
    BackboneArch a{theta.at(kW1).dim(0), theta.at(kW1).dim(1), theta.at(kW2).dim(1)};
    require_arch(theta, a);
    return a;
}

ParamSet init_backbone(const BackboneArch& arch, Prng& rng) {
    auto xavier = [&](std::size_t fan_in, std::size_t fan_out) {
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
        return std * prng_gaussian(rng, {fan_in, fan_out});
    };
    ParamSet p;
    p.set(kW1, xavier(arch.input_dim, arch.hidden));
    p.set(kB1, Tensor::zeros({arch.hidden}));
    p.set(kW2, xavier(arch.hidden, arch.embed));
    p.set(kB2, Tensor::zeros({arch.embed}));
    return p;
}

Tensor backbone_forward(const ParamSet& theta, const Tensor& x) {
    const BackboneArch arch = infer_arch(theta);
    if (x.rank() != 2 || x.dim(1) != arch.input_dim) {
        throw DimensionError("backbone input " + shape_str(x.shape()) + " does not match architecture " + arch.id());
    }
    const Tensor h = tanh(add_row_bias(matmul(x, theta.at(kW1)), theta.at(kB1)));
    return tanh(add_row_bias(matmul(h, theta.at(kW2)), theta.at(kB2)));
}

void TaskHead::validate() const {
    if (weight.rank() != 2 || bias.rank() != 1 || weight.dim(1) != bias.dim(0)) {
        throw DimensionError("task head " + std::to_string(task) + ": weight " + shape_str(weight.shape()) +
                             " and bias " + shape_str(bias.shape()) + " do not fit");
    }
    if (bias.size() < 2) throw DimensionError("task head " + std::to_string(task) + " needs at least 2 classes");
    weight.check_finite("task head weight");
}

TaskHead init_head(std::size_t task, std::size_t embed, std::size_t classes, Prng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(embed + classes));
    return TaskHead{task, std * prng_gaussian(rng, {embed, classes}), Tensor::zeros({classes})};
}

Tensor head_forward(const TaskHead& head, const Tensor& embedding) {
    if (embedding.rank() != 2 || embedding.dim(1) != head.weight.dim(0)) {
        throw DimensionError("head " + std::to_string(head.task) + " expects embeddings of width " +
                             std::to_string(head.weight.dim(0)) + ", got " + shape_str(embedding.shape()));
    }
    return add_row_bias(matmul(embedding, head.weight), head.bias);
}

Tensor model_logits(const ParamSet& theta, const TaskHead& head, const Tensor& x) {
    return head_forward(head, backbone_forward(theta, x));
}

void ExpertBundle::validate() const {
    if (vectors.empty()) throw DimensionError("expert bundle has no tasks");
    if (vectors.size() != heads.size()) {
        throw DimensionError("expert bundle has " + std::to_string(vectors.size()) + " task vectors but " +
                             std::to_string(heads.size()) + " heads");
    }
    const BackboneArch arch = infer_arch(theta0);
    const std::uint64_t fp = theta0.fingerprint();
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        require_origin(vectors[i], fp);
        vectors[i].delta.require_compatible(theta0, "expert bundle");
        heads[i].validate();
        if (heads[i].weight.dim(0) != arch.embed) {
            throw DimensionError("head " + std::to_string(i) + " does not match embedding width " +
                                 std::to_string(arch.embed));
        }
    }
}

BackboneNodes backbone_inputs(autodiff::Graph& g, const std::string& prefix, bool trainable) {
    return {g.input(prefix + kW1, trainable), g.input(prefix + kB1, trainable), g.input(prefix + kW2, trainable),
            g.input(prefix + kB2, trainable)};
}

BackboneNodes backbone_sum(autodiff::Graph& g, const BackboneNodes& base, const BackboneNodes& delta) {
    return {g.add(base.w1, delta.w1), g.add(base.b1, delta.b1), g.add(base.w2, delta.w2), g.add(base.b2, delta.b2)};
}

autodiff::NodeId build_backbone(autodiff::Graph& g, autodiff::NodeId x, const BackboneNodes& p) {
    const autodiff::NodeId h = g.tanh(g.affine(x, p.w1, p.b1));
    return g.tanh(g.affine(h, p.w2, p.b2));
}

void bind_backbone(autodiff::NamedTensors& inputs, const std::string& prefix, const ParamSet& theta) {
    for (const auto* name : {&kW1, &kB1, &kW2, &kB2}) inputs[prefix + *name] = theta.at(*name);
}

} // namespace mergelab
