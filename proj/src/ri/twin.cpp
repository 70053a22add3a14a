// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "twin.hpp"

#include <cmath>
#include <optional>

#include "mergelab/core/error.hpp"

namespace mergelab::detail {

namespace {

const std::string kBase = "base/";
const std::string kDelta = "delta/";

std::string head_name(std::size_t j, const char* part) { return "head/" + std::to_string(j) + "/" + part; }
std::string teacher_name(std::size_t k) { return "teacher/" + std::to_string(k); }

autodiff::NodeId distance_node(autodiff::Graph& g, DistanceMetric metric, autodiff::NodeId teacher,
                               autodiff::NodeId student) {
    switch (metric) {
    case DistanceMetric::Kl: return g.kl_loss(teacher, student);
    case DistanceMetric::CrossEntropy: return g.cross_entropy_loss(teacher, student);
    case DistanceMetric::Mse: return g.mse_loss(teacher, student);
    }
    throw ConfigError("invalid distance metric");
}

} // namespace

TwinObjective::TwinObjective(const ParamSet& theta0, std::vector<TaskHead> heads, std::vector<ParamSet> teachers,
                             std::vector<Term> terms, double interference_weight, DistanceMetric metric)
    : heads_(std::move(heads)), teachers_(std::move(teachers)), terms_(std::move(terms)) {
    if (terms_.empty()) throw ConfigError("twin objective needs at least one term");
    const autodiff::NodeId x = graph_.input("x");
    const BackboneNodes base = backbone_inputs(graph_, kBase, false);
    const BackboneNodes delta = backbone_inputs(graph_, kDelta, true);
    const autodiff::NodeId emb = build_backbone(graph_, x, backbone_sum(graph_, base, delta));
    bind_backbone(fixed_, kBase, theta0);

    std::vector<std::optional<autodiff::NodeId>> student(heads_.size());
    std::optional<autodiff::NodeId> preserve, interference;
    for (std::size_t k = 0; k < terms_.size(); ++k) {
        const Term& t = terms_[k];
        if (t.head >= heads_.size() || t.teacher >= teachers_.size()) throw ConfigError("twin objective term out of range");
        if (!student[t.head]) {
            const auto w = graph_.input(head_name(t.head, "w"));
            const auto b = graph_.input(head_name(t.head, "b"));
            fixed_[head_name(t.head, "w")] = heads_[t.head].weight;
            fixed_[head_name(t.head, "b")] = heads_[t.head].bias;
            student[t.head] = graph_.affine(emb, w, b);
        }
        const auto d = distance_node(graph_, metric, graph_.input(teacher_name(k)), *student[t.head]);
        auto& acc = t.preserve ? preserve : interference;
        acc = acc ? graph_.add(*acc, d) : d;
    }
    if (!preserve) throw ConfigError("twin objective needs a task-preservation term");
    preserve_ = *preserve;
    total_ = preserve_;
    if (interference) {
        has_interference_ = true;
        interference_ = *interference;
        total_ = graph_.add(preserve_, graph_.scale(interference_, interference_weight));
    }
}

RiLoss TwinObjective::evaluate(const Tensor& x, const ParamSet& delta, ParamSet* grad) {
    autodiff::NamedTensors in = fixed_;
    in["x"] = x;
    bind_backbone(in, kDelta, delta);
    // Teacher embeddings are shared by all terms that use the same teacher.
    std::vector<std::optional<Tensor>> teacher_emb(teachers_.size());
    for (std::size_t k = 0; k < terms_.size(); ++k) {
        const Term& t = terms_[k];
        if (!teacher_emb[t.teacher]) teacher_emb[t.teacher] = backbone_forward(teachers_[t.teacher], x);
        in[teacher_name(k)] = head_forward(heads_[t.head], *teacher_emb[t.teacher]);
    }
    graph_.forward(in);
    RiLoss out;
    out.total = graph_.value(total_).item();
    out.preserve = graph_.value(preserve_).item();
    out.interference = has_interference_ ? graph_.value(interference_).item() : 0.0;
    if (grad) {
        const autodiff::NamedTensors g = graph_.backward(total_);
        ParamSet result;
        for (const auto& name : delta.names()) result.set(name, g.at(kDelta + name));
        *grad = std::move(result);
    }
    return out;
}

autodiff::OptimizerOptions optimizer_options(const RiConfig& cfg) {
    autodiff::OptimizerOptions o;
    o.learning_rate = cfg.learning_rate;
    o.weight_decay = cfg.weight_decay;
    o.mode = cfg.optimizer;
    return o;
}

LoopOptions loop_options(const RiConfig& cfg) {
    LoopOptions o;
    o.steps = cfg.steps;
    o.batch_size = cfg.batch_size;
    o.optimizer = optimizer_options(cfg);
    o.early_stop = cfg.early_stop;
    o.snapshot_every = cfg.snapshot_every;
    return o;
}

LoopResult run_descent(TwinObjective& objective, ParamSet delta, const LoopOptions& options, const AuxSampler& aux,
                       Prng rng) {
    const auto start = std::chrono::steady_clock::now();
    LoopResult result;
    autodiff::OptimState state(options.optimizer);
    autodiff::NamedTensors params(delta.tensors().begin(), delta.tensors().end());
    if (options.snapshot_every) result.snapshots.emplace_back(0, delta);
    constexpr std::size_t kWindow = 100;
    double previous_window = 0.0;
    for (std::size_t step = 0; step < options.steps; ++step) {
        const Tensor x = aux(rng, options.batch_size);
        try {
            ParamSet grad;
            const RiLoss loss = objective.evaluate(x, ParamSet(params), &grad);
            if (!std::isfinite(loss.total)) throw NumericError("loss is not finite");
            result.history.push_back(loss);
            autodiff::NamedTensors g(grad.tensors().begin(), grad.tensors().end());
            autodiff::NamedTensors next = params;
            state.step(next, g);
            for (const auto& [_, t] : next) t.check_finite("adapted parameters");
            params = std::move(next);
        } catch (const NumericError& e) {
            result.diverged = true;
            result.diagnostic = "diverged at step " + std::to_string(step) + ": " + e.what();
            break;
        }
        const std::size_t done = step + 1;
        if (options.snapshot_every && done % options.snapshot_every == 0) result.snapshots.emplace_back(done, ParamSet(params));
        if (options.early_stop && done % kWindow == 0) {
            double window = 0.0;
            for (std::size_t k = done - kWindow; k < done; ++k) window += result.history[k].total;
            window /= static_cast<double>(kWindow);
            if (done >= 2 * kWindow && previous_window > 0.0 && (previous_window - window) / previous_window < 1e-3) {
                break;
            }
            previous_window = window;
        }
    }
    result.delta = ParamSet(params);
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

} // namespace mergelab::detail
