// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/autodiff/graph.hpp"

#include <cmath>

#include "mergelab/core/error.hpp"
#include "mergelab/core/kernels.hpp"

namespace mergelab::autodiff {

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Input: return "input";
        case OpKind::Add: return "add";
        case OpKind::Scale: return "scale";
        case OpKind::MatMul: return "matmul";
        case OpKind::Affine: return "affine";
        case OpKind::Tanh: return "tanh";
        case OpKind::Softmax: return "softmax";
        case OpKind::KlLoss: return "kl_loss";
        case OpKind::CrossEntropyLoss: return "cross_entropy_loss";
        case OpKind::MseLoss: return "mse_loss";
        case OpKind::HalfSumSquares: return "half_sum_squares";
        case OpKind::WeightedSum: return "weighted_sum";
    }
    return "?";
}

namespace {

std::size_t batch_rows(const Tensor& logits) { return logits.size() / logits.shape().back(); }

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

void accumulate(std::optional<Tensor>& slot, Tensor g) {
    if (slot) {
        axpy(1.0, g, *slot);
    } else {
        slot = std::move(g);
    }
}

} // namespace

NodeId Graph::push(Node node) {
    for (NodeId in : node.inputs) {
        if (in.index >= nodes_.size()) throw GraphError("node input refers to a node that does not exist yet");
        node.requires_grad = node.requires_grad || nodes_[in.index].requires_grad;
    }
    nodes_.push_back(std::move(node));
    evaluated_ = false;
    return NodeId{nodes_.size() - 1};
}

Graph::Node Graph::make_node(OpKind kind, std::vector<NodeId> inputs) {
    Node n;
    n.kind = kind;
    n.inputs = std::move(inputs);
    return n;
}

const Graph::Node& Graph::at(NodeId id) const {
    if (id.index >= nodes_.size()) throw GraphError("unknown node id " + std::to_string(id.index));
    return nodes_[id.index];
}

NodeId Graph::input(const std::string& name, bool trainable) {
    if (input_index_.contains(name)) throw GraphError("duplicate graph input '" + name + "'");
    Node n = make_node(OpKind::Input, {});
    n.name = name;
    n.trainable = trainable;
    n.requires_grad = trainable;
    const NodeId id = push(std::move(n));
    input_index_[name] = id;
    return id;
}

NodeId Graph::add(NodeId a, NodeId b) { return push(make_node(OpKind::Add, {a, b})); }

NodeId Graph::scale(NodeId a, double factor) {
    Node n = make_node(OpKind::Scale, {a});
    n.factor = factor;
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) { return push(make_node(OpKind::MatMul, {a, b})); }

NodeId Graph::affine(NodeId x, NodeId w, NodeId b) {
    return push(make_node(OpKind::Affine, {x, w, b}));
}

NodeId Graph::tanh(NodeId a) { return push(make_node(OpKind::Tanh, {a})); }

NodeId Graph::softmax(NodeId a) { return push(make_node(OpKind::Softmax, {a})); }

NodeId Graph::kl_loss(NodeId teacher, NodeId student) {
    return push(make_node(OpKind::KlLoss, {teacher, student}));
}

NodeId Graph::cross_entropy_loss(NodeId teacher, NodeId student) {
    return push(make_node(OpKind::CrossEntropyLoss, {teacher, student}));
}

NodeId Graph::mse_loss(NodeId teacher, NodeId student) {
    return push(make_node(OpKind::MseLoss, {teacher, student}));
}

NodeId Graph::half_sum_squares(NodeId a) { return push(make_node(OpKind::HalfSumSquares, {a})); }

NodeId Graph::weighted_sum(NodeId a, Tensor weights) {
    Node n = make_node(OpKind::WeightedSum, {a});
    n.constant = std::move(weights);
    return push(std::move(n));
}

void Graph::output(const std::string& name, NodeId node) {
    (void)at(node);
    outputs_.emplace_back(name, node);
}

void Graph::evaluate(Node& node) {
    auto in = [&](std::size_t k) -> const Tensor& { return nodes_[node.inputs[k].index].value; };
    switch (node.kind) {
        case OpKind::Input:
            break;
        case OpKind::Add:
            node.value = in(0) + in(1);
            break;
        case OpKind::Scale:
            node.value = node.factor * in(0);
            break;
        case OpKind::MatMul:
            node.value = mergelab::matmul(in(0), in(1));
            break;
        case OpKind::Affine:
            node.value = add_row_bias(mergelab::matmul(in(0), in(1)), in(2));
            break;
        case OpKind::Tanh:
            node.value = mergelab::tanh(in(0));
            break;
        case OpKind::Softmax:
            node.value = mergelab::softmax(in(0));
            break;
        case OpKind::KlLoss:
        case OpKind::CrossEntropyLoss: {
            require_same(in(0), in(1), op_name(node.kind));
            const Tensor log_p = log_softmax(in(0));
            const Tensor log_q = log_softmax(in(1));
            double acc = 0.0;
            for (std::size_t i = 0; i < log_p.size(); ++i) {
                const double p = std::exp(log_p[i]);
                acc += node.kind == OpKind::KlLoss ? p * (log_p[i] - log_q[i]) : -p * log_q[i];
            }
            node.value = Tensor::scalar(acc / static_cast<double>(batch_rows(in(1))));
            node.cache = mergelab::softmax(in(0));
            node.cache2 = mergelab::softmax(in(1));
            break;
        }
        case OpKind::MseLoss: {
            require_same(in(0), in(1), "mse_loss");
            double acc = 0.0;
            for (std::size_t i = 0; i < in(0).size(); ++i) {
                const double d = in(1)[i] - in(0)[i];
                acc += d * d;
            }
            node.value = Tensor::scalar(acc / static_cast<double>(in(0).size()));
            break;
        }
        case OpKind::HalfSumSquares:
            node.value = Tensor::scalar(0.5 * dot(in(0), in(0)));
            break;
        case OpKind::WeightedSum:
            node.value = Tensor::scalar(dot(node.constant, in(0)));
            break;
    }
}

NamedTensors Graph::forward(const NamedTensors& inputs) {
    for (auto& node : nodes_) {
        if (node.kind != OpKind::Input) continue;
        auto it = inputs.find(node.name);
        if (it == inputs.end()) throw GraphError("unbound graph input '" + node.name + "'");
        node.value = it->second;
    }
    for (auto& node : nodes_) evaluate(node);
    evaluated_ = true;
    NamedTensors out;
    for (const auto& [name, id] : outputs_) out[name] = nodes_[id.index].value;
    return out;
}

const Tensor& Graph::value(NodeId node) const {
    if (!evaluated_) throw GraphError("value() before forward()");
    return at(node).value;
}

NamedTensors Graph::backward(NodeId loss) {
    if (!evaluated_) throw GraphError("backward() before forward()");
    if (at(loss).value.size() != 1) {
        throw GraphError("backward() needs a scalar loss, got shape " + shape_str(at(loss).value.shape()));
    }
    std::vector<std::optional<Tensor>> grads(nodes_.size());
    grads[loss.index] = Tensor::full(at(loss).value.shape(), 1.0);

    for (std::size_t idx = loss.index + 1; idx-- > 0;) {
        const Node& node = nodes_[idx];
        if (!grads[idx] || !node.requires_grad || node.kind == OpKind::Input) continue;
        const Tensor& g = *grads[idx];
        auto in = [&](std::size_t k) -> const Tensor& { return nodes_[node.inputs[k].index].value; };
        auto wants = [&](std::size_t k) { return nodes_[node.inputs[k].index].requires_grad; };
        auto send = [&](std::size_t k, Tensor t) { accumulate(grads[node.inputs[k].index], std::move(t)); };

        switch (node.kind) {
            case OpKind::Input:
                break;
            case OpKind::Add:
                if (wants(0)) send(0, g);
                if (wants(1)) send(1, g);
                break;
            case OpKind::Scale:
                send(0, node.factor * g);
                break;
            case OpKind::MatMul:
                if (wants(0)) send(0, matmul_nt(g, in(1)));
                if (wants(1)) send(1, matmul_tn(in(0), g));
                break;
            case OpKind::Affine:
                if (wants(0)) send(0, matmul_nt(g, in(1)));
                if (wants(1)) send(1, matmul_tn(in(0), g));
                if (wants(2)) send(2, column_sums(g));
                break;
            case OpKind::Tanh: {
                Tensor d = g;
                for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - node.value[i] * node.value[i];
                send(0, std::move(d));
                break;
            }
            case OpKind::Softmax: {
                const std::size_t c = node.value.shape().back();
                Tensor d = Tensor::zeros(node.value.shape());
                for (std::size_t r = 0; r < node.value.size() / c; ++r) {
                    double gy = 0.0;
                    for (std::size_t j = 0; j < c; ++j) gy += g[r * c + j] * node.value[r * c + j];
                    for (std::size_t j = 0; j < c; ++j) d[r * c + j] = node.value[r * c + j] * (g[r * c + j] - gy);
                }
                send(0, std::move(d));
                break;
            }
            case OpKind::KlLoss:
            case OpKind::CrossEntropyLoss:
                if (wants(1)) {
                    const double s = g.item() / static_cast<double>(batch_rows(in(1)));
                    send(1, s * (node.cache2 - node.cache));
                }
                break;
            case OpKind::MseLoss:
                if (wants(1)) {
                    const double s = 2.0 * g.item() / static_cast<double>(in(1).size());
                    send(1, s * (in(1) - in(0)));
                }
                break;
            case OpKind::HalfSumSquares:
                send(0, g.item() * in(0));
                break;
            case OpKind::WeightedSum:
                send(0, g.item() * node.constant);
                break;
        }
    }

    NamedTensors out;
    for (const auto& [name, id] : input_index_) {
        const Node& node = nodes_[id.index];
        if (!node.trainable) continue;
        out[name] = grads[id.index] ? *grads[id.index] : Tensor::zeros(node.value.shape());
    }
    return out;
}

} // namespace mergelab::autodiff
