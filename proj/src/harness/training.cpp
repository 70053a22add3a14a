// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/harness/training.hpp"

#include <cstdio>

#include "mergelab/autodiff/graph.hpp"
#include "mergelab/core/error.hpp"
#include "mergelab/core/kernels.hpp"

namespace mergelab {

using json = nlohmann::json;

json TrainConfig::to_json() const {
    return json{{"pretrain_epochs", pretrain_epochs},
                {"probe_epochs", probe_epochs},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"weight_decay", weight_decay},
                {"optimizer", autodiff::mode_name(optimizer)},
                {"accuracy_gate", accuracy_gate},
                {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    try {
        c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
        c.probe_epochs = j.value("probe_epochs", c.probe_epochs);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        if (j.contains("optimizer")) c.optimizer = autodiff::parse_optimizer_mode(j.at("optimizer").get<std::string>());
        c.accuracy_gate = j.value("accuracy_gate", c.accuracy_gate);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid training configuration: ") + e.what());
    }
    return c;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double accuracy(const Tensor& logits, const std::vector<std::size_t>& labels) {
    if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
        throw DimensionError("accuracy: logits " + shape_str(logits.shape()) + " for " + std::to_string(labels.size()) +
                             " labels");
    }
    std::size_t correct = 0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.dim(1); ++c)
            if (logits.at(r, c) > logits.at(r, best)) best = c;
        correct += best == labels[r];
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<double> evaluate(const ParamSet& theta, const std::vector<TaskHead>& heads, const TaskSuite& suite) {
    if (heads.size() != suite.tasks()) {
        throw DimensionError("evaluate: " + std::to_string(heads.size()) + " heads for " +
                             std::to_string(suite.tasks()) + " tasks");
    }
    std::vector<double> acc(heads.size());
    const Tensor all = [&] {
        std::vector<double> rows;
        for (const auto& e : suite.eval) rows.insert(rows.end(), e.x.values().begin(), e.x.values().end());
        std::size_t n = 0;
        for (const auto& e : suite.eval) n += e.size();
        return Tensor({n, suite.spec.input_dim}, std::move(rows));
    }();
    const Tensor emb = backbone_forward(theta, all);
    std::size_t offset = 0;
    for (std::size_t t = 0; t < heads.size(); ++t) {
        std::vector<std::size_t> rows(suite.eval[t].size());
        for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = offset + r;
        offset += rows.size();
        acc[t] = accuracy(head_forward(heads[t], emb.gather_rows(rows)), suite.eval[t].labels);
    }
    return acc;
}

namespace {

// Logits whose softmax is exactly one-hot on the label.
Tensor label_targets(const std::vector<std::size_t>& labels, std::size_t classes) {
    Tensor t = Tensor::full({labels.size(), classes}, -1e3);
    for (std::size_t r = 0; r < labels.size(); ++r) t.at(r, labels[r]) = 0.0;
    return t;
}

// Minibatch cross-entropy training of backbone (optionally frozen) and head.
void fit_classifier(ParamSet& backbone, TaskHead& head, const Tensor& x, const std::vector<std::size_t>& labels,
                    std::size_t epochs, bool train_backbone, const TrainConfig& cfg, Prng& rng) {
    if (epochs == 0) return;
    autodiff::Graph g;
    const auto xin = g.input("x");
    const auto target = g.input("target");
    const BackboneNodes bb = backbone_inputs(g, "", train_backbone);
    const auto w = g.input("head.w", true);
    const auto b = g.input("head.b", true);
    const auto loss = g.cross_entropy_loss(target, g.affine(build_backbone(g, xin, bb), w, b));

    autodiff::OptimizerOptions opt;
    opt.learning_rate = cfg.learning_rate;
    opt.weight_decay = cfg.weight_decay;
    opt.mode = cfg.optimizer;
    autodiff::OptimState state(opt);

    autodiff::NamedTensors params;
    bind_backbone(params, "", backbone);
    params["head.w"] = head.weight;
    params["head.b"] = head.bias;

    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            std::vector<std::size_t> batch_labels;
            for (std::size_t r : rows) batch_labels.push_back(labels[r]);
            autodiff::NamedTensors in = params;
            in["x"] = x.gather_rows(rows);
            in["target"] = label_targets(batch_labels, head.classes());
            g.forward(in);
            state.step(params, g.backward(loss));
        }
    }
    for (const auto& name : backbone.names()) backbone.set(name, params.at(name));
    head.weight = params.at("head.w");
    head.bias = params.at("head.b");
}

} // namespace

ExpertBundle train_experts(const TaskSuite& suite, const TrainConfig& cfg, TrainReport* report) {
    if (cfg.batch_size == 0) throw ConfigError("training batch size must be at least 1");
    const BackboneArch arch{suite.spec.input_dim, BackboneArch{}.hidden, BackboneArch{}.embed};
    const Prng root(cfg.seed);

    Prng init_rng = root.split("init");
    ParamSet theta0 = init_backbone(arch, init_rng);

    // Pretraining: all training data, labels = a random two-way grouping of the classes.
    {
        Prng rng = root.split("pretrain");
        std::vector<std::size_t> group(suite.spec.classes);
        for (std::size_t c = 0; c < group.size(); ++c) group[c] = c % 2;
        for (std::size_t i = group.size(); i > 1; --i) std::swap(group[i - 1], group[rng.below(i)]);
        std::vector<double> rows;
        std::vector<std::size_t> labels;
        for (std::size_t t = 0; t < suite.tasks(); ++t) {
            const auto& data = suite.train[t];
            rows.insert(rows.end(), data.x.values().begin(), data.x.values().end());
            for (std::size_t l : data.labels) labels.push_back(group[suite.partition[t][l]]);
        }
        const Tensor x({labels.size(), arch.input_dim}, std::move(rows));
        TaskHead coarse = init_head(0, arch.embed, 2, rng);
        fit_classifier(theta0, coarse, x, labels, cfg.pretrain_epochs, true, cfg, rng);
        if (report) report->pretrain_accuracy = accuracy(model_logits(theta0, coarse, x), labels);
    }

    ExpertBundle bundle;
    bundle.theta0 = theta0;
    bundle.suite_id = suite.spec.id();
    bundle.suite_descriptor = suite.spec.to_json().dump();
    const std::size_t n = suite.tasks();
    bundle.vectors.resize(n);
    bundle.heads.resize(n);
    std::vector<double> finetuned(n), zero_shot(n);
    kernels::parallel_for(n, [&](std::size_t t) {
        Prng rng = root.split("expert", t);
        const TaskData& data = suite.train[t];
        TaskHead head = init_head(t, arch.embed, suite.task_classes(t), rng);
        ParamSet probe_backbone = theta0;
        fit_classifier(probe_backbone, head, data.x, data.labels, cfg.probe_epochs, false, cfg, rng);
        ParamSet expert = theta0;
        fit_classifier(expert, head, data.x, data.labels, cfg.epochs, true, cfg, rng);
        bundle.heads[t] = head;
        bundle.vectors[t] = extract_task_vector(expert, theta0);
    });
    for (std::size_t t = 0; t < n; ++t) {
        finetuned[t] = evaluate(bundle.expert(t), bundle.heads, suite)[t];
    }
    zero_shot = evaluate(theta0, bundle.heads, suite);
    if (report) {
        report->finetuned = finetuned;
        report->zero_shot = zero_shot;
    }
    if (cfg.accuracy_gate > 0.0 && cfg.epochs > 0) {
        for (std::size_t t = 0; t < n; ++t) {
            if (finetuned[t] < cfg.accuracy_gate) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "expert %zu reached %.3f eval accuracy on its task, below the %.2f gate",
                              t, finetuned[t], cfg.accuracy_gate);
                throw TrainingError(buf);
            }
        }
    }
    return bundle;
}

} // namespace mergelab
