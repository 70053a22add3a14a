// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mergelab/core/tensor.hpp"

namespace mergelab::autodiff {

using NamedTensors = std::map<std::string, Tensor>;

struct NodeId {
    std::size_t index = 0;
    friend bool operator==(NodeId, NodeId) = default;
};

enum class OpKind {
    Input,
    Add,
    Scale,
    MatMul,
    Affine,
    Tanh,
    Softmax,
    KlLoss,
    CrossEntropyLoss,
    MseLoss,
    HalfSumSquares,
    WeightedSum,
};

const char* op_name(OpKind kind);

/// Static reverse-mode graph over a fixed layer vocabulary.
///
/// Nodes are appended in construction order, which is a topological order, so
/// the graph is acyclic by construction. `forward` binds every named input and
/// evaluates all nodes; `backward` returns gradients for trainable inputs only.
///
/// The three loss nodes take (teacher logits, student logits) and average over
/// the batch. The teacher side is a constant: no gradient flows into it.
class Graph {
public:
    NodeId input(const std::string& name, bool trainable = false);

    NodeId add(NodeId a, NodeId b);
    NodeId scale(NodeId a, double factor);
    NodeId matmul(NodeId a, NodeId b);
    /// x * w + b, with x (B x n), w (n x m), b (m).
    NodeId affine(NodeId x, NodeId w, NodeId b);
    NodeId tanh(NodeId a);
    NodeId softmax(NodeId a);

    /// mean_b sum_c p (log p - log q), p = softmax(teacher), q = softmax(student).
    NodeId kl_loss(NodeId teacher_logits, NodeId student_logits);
    /// mean_b -sum_c p log q.
    NodeId cross_entropy_loss(NodeId teacher_logits, NodeId student_logits);
    /// mean over all entries of (student - teacher)^2.
    NodeId mse_loss(NodeId teacher_logits, NodeId student_logits);

    /// 0.5 * sum of squares, a scalar.
    NodeId half_sum_squares(NodeId a);
    /// sum(weights .* a), a scalar; weights fixed at construction.
    NodeId weighted_sum(NodeId a, Tensor weights);

    void output(const std::string& name, NodeId node);

    NamedTensors forward(const NamedTensors& inputs);
    /// Gradients of a scalar node with respect to every trainable input.
    NamedTensors backward(NodeId loss);

    const Tensor& value(NodeId node) const;
    std::size_t size() const noexcept { return nodes_.size(); }
    OpKind kind(NodeId node) const { return nodes_.at(node.index).kind; }

private:
    struct Node {
        OpKind kind;
        std::vector<NodeId> inputs;
        std::string name;     // inputs only
        bool trainable = false;
        bool requires_grad = false;
        double factor = 1.0;  // Scale
        Tensor constant;      // WeightedSum weights
        Tensor value;
        Tensor cache;         // op-specific data kept for backward
        Tensor cache2;
    };

    static Node make_node(OpKind kind, std::vector<NodeId> inputs);
    NodeId push(Node node);
    const Node& at(NodeId id) const;
    void evaluate(Node& node);

    std::vector<Node> nodes_;
    std::map<std::string, NodeId> input_index_;
    std::vector<std::pair<std::string, NodeId>> outputs_;
    bool evaluated_ = false;
};

} // namespace mergelab::autodiff
