// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: suite generation, expert training, interference
// resolution, merging, evaluation and the experiment battery.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mergelab/core/error.hpp"
#include "mergelab/core/kernels.hpp"
#include "mergelab/harness/experiments.hpp"
#include "mergelab/interference/xi.hpp"
#include "mergelab/merge/merge.hpp"
#include "mergelab/model/checkpoint.hpp"
#include "mergelab/ri/resolve.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mergelab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;

/// Raised for computations that ran but failed (divergence, failed gates,
/// failed sub-runs).
struct NumericFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> jobs;
    std::vector<std::string> overrides;
};

RunConfig load_config(const GlobalOptions& g) {
    json doc = g.config_path.empty() ? json::object() : read_config_document(g.config_path);
    for (const auto& o : g.overrides) apply_override(doc, o);
    if (g.seed) {
        doc["seed"] = *g.seed;
        doc.erase("seeds");
    }
    if (g.out_dir) doc["out_dir"] = *g.out_dir;
    if (g.jobs) doc["jobs"] = *g.jobs;
    RunConfig cfg = RunConfig::from_json(doc);
    kernels::set_max_threads(cfg.jobs);
    return cfg;
}

std::string fmt(double v, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void print_accuracies(const std::string& label, const std::vector<double>& acc) {
    std::cout << label << ":";
    for (double a : acc) std::cout << ' ' << fmt(a);
    std::cout << "  mean " << fmt(mean_of(acc)) << '\n';
}

fs::path default_path(const RunConfig& cfg, const std::string& file) {
    fs::create_directories(cfg.out_dir);
    return fs::path(cfg.out_dir) / file;
}

TaskSuite suite_of(const ExpertBundle& b) {
    return suite_from_descriptor(b.suite_descriptor);
}

int cmd_gen_suite(const RunConfig& cfg, const std::string& out) {
    const TaskSuite suite = gen_suite(cfg.suite_for(cfg.seed));
    const fs::path path = out.empty() ? default_path(cfg, "suite_seed" + std::to_string(cfg.seed) + ".json") : fs::path(out);
    std::ofstream(path) << suite.spec.to_json().dump(2) << '\n';
    std::cout << "suite " << suite.spec.id() << ": " << suite.tasks() << " tasks, classes per task";
    for (std::size_t t = 0; t < suite.tasks(); ++t) std::cout << ' ' << suite.task_classes(t);
    std::cout << ", " << suite.train.front().size() << " train / " << suite.eval.front().size()
              << " eval samples in task 0\nwrote " << path.string() << '\n';
    return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::string& out) {
    const TaskSuite suite = gen_suite(cfg.suite_for(cfg.seed));
    TrainReport rep;
    ExpertBundle bundle;
    try {
        bundle = train_experts(suite, cfg.train_for(cfg.seed), &rep);
    } catch (const TrainingError& e) {
        throw NumericFailure(e.what());
    }
    const fs::path path = out.empty() ? default_path(cfg, "bundle_seed" + std::to_string(cfg.seed) + ".mfckpt") : fs::path(out);
    save_checkpoint(path, bundle);
    std::cout << "pretraining accuracy " << fmt(rep.pretrain_accuracy) << '\n';
    print_accuracies("zero-shot", rep.zero_shot);
    print_accuracies("finetuned", rep.finetuned);
    std::cout << "wrote " << path.string() << '\n';
    return kExitOk;
}

int cmd_ri(const RunConfig& cfg, const std::string& bundle_path, const std::string& out) {
    const ExpertBundle bundle = load_bundle(bundle_path);
    const TaskSuite suite = suite_of(bundle);
    const AuxSource aux(cfg.aux_for(cfg.seed), &suite);
    const RiConfig ri = cfg.ri_for(cfg.seed);
    const RiResult res = resolve_interference(bundle, ri, aux.sampler());
    for (const auto& tr : res.traces) {
        std::cout << "expert " << tr.expert << ": " << tr.steps_run << " steps";
        if (!tr.total.empty()) {
            std::cout << ", L_RI " << fmt(tr.total.front()) << " -> " << fmt(tr.total.back()) << " (preserve "
                      << fmt(tr.preserve.back()) << ", interference " << fmt(tr.interference.back()) << ")";
        }
        if (tr.diverged) std::cout << "  DIVERGED: " << tr.diagnostic;
        std::cout << '\n';
    }
    if (res.any_diverged()) throw NumericFailure("interference resolution diverged");
    const fs::path path = out.empty() ? default_path(cfg, "bundle_ri_seed" + std::to_string(cfg.seed) + ".mfckpt") : fs::path(out);
    save_checkpoint(path, res.adapted);
    print_accuracies("adapted experts (own task)", [&] {
        std::vector<double> acc;
        for (std::size_t i = 0; i < res.adapted.tasks(); ++i)
            acc.push_back(evaluate(res.adapted.expert(i), res.adapted.heads, suite)[i]);
        return acc;
    }());
    std::cout << "wrote " << path.string() << '\n';
    return kExitOk;
}

int cmd_merge(const RunConfig& cfg, const std::string& bundle_path, const std::string& out) {
    const ExpertBundle bundle = load_bundle(bundle_path);
    const MergeOutput m = merge(bundle, cfg.merge);
    const ParamSet theta = merged_model(bundle, m);
    const fs::path path = out.empty() ? default_path(cfg, "merged_" + m.diagnostics.method + ".mfckpt") : fs::path(out);
    save_checkpoint(path, theta, bundle.suite_id);
    std::cout << "method " << m.diagnostics.method << ", lambda " << fmt(m.diagnostics.lambda, 6) << '\n';
    for (const auto& l : m.diagnostics.layers) {
        std::cout << "  " << l.tensor << ": " << l.rule;
        if (l.kept_mass) std::cout << ", kept mass " << fmt(*l.kept_mass);
        if (l.sign_agreement) std::cout << ", sign agreement " << fmt(*l.sign_agreement);
        if (l.rank) std::cout << ", rank " << *l.rank;
        std::cout << '\n';
        for (const auto& w : l.warnings) std::cout << "    warning: " << w << '\n';
    }
    for (const auto& w : m.diagnostics.warnings) std::cout << "warning: " << w << '\n';
    print_accuracies("merged accuracy", evaluate(theta, bundle.heads, suite_of(bundle)));
    std::cout << "wrote " << path.string() << '\n';
    return kExitOk;
}

int cmd_eval(const std::string& bundle_path, const std::string& model_path) {
    const ExpertBundle bundle = load_bundle(bundle_path);
    const TaskSuite suite = suite_of(bundle);
    if (!model_path.empty()) {
        print_accuracies("model", evaluate(load_params(model_path), bundle.heads, suite));
        return kExitOk;
    }
    print_accuracies("zero-shot", evaluate(bundle.theta0, bundle.heads, suite));
    std::vector<double> own;
    for (std::size_t i = 0; i < bundle.tasks(); ++i) own.push_back(evaluate(bundle.expert(i), bundle.heads, suite)[i]);
    print_accuracies("finetuned (own task)", own);
    return kExitOk;
}

int cmd_xi(const std::string& bundle_path, const std::string& merged_path, const std::string& metric) {
    const ExpertBundle bundle = load_bundle(bundle_path);
    const TaskSuite suite = suite_of(bundle);
    const auto rep = xi(bundle, load_params(merged_path), suite.eval_inputs(), parse_metric(metric), "eval");
    for (std::size_t i = 0; i < rep.per_task.size(); ++i) std::cout << "xi[" << i << "] " << fmt(rep.per_task[i], 6) << '\n';
    std::cout << "total " << fmt(rep.total, 6) << " (" << metric_id(rep.metric) << ", " << rep.samples
              << " eval samples)\n";
    return kExitOk;
}

int cmd_experiment(const RunConfig& cfg, const std::string& name) {
    const ExperimentReport rep = run_experiment(name, cfg);
    const fs::path dir = write_report(rep, cfg.out_dir);
    for (const auto& t : rep.tables)
        if (t.name == "summary") std::cout << t.text();
    for (const auto& f : rep.failures) {
        std::cerr << "failed: seed " << f.value("seed", 0) << " stage " << f.value("stage", "") << ": "
                  << f.value("message", "") << '\n';
    }
    std::cout << "report written to " << dir.string() << " (" << fmt(rep.wall_seconds, 1) << " s)\n";
    if (!rep.failures.empty()) throw NumericFailure(std::to_string(rep.failures.size()) + " sub-run(s) failed");
    return kExitOk;
}

int cmd_report(const std::string& path) {
    const ExperimentReport rep = read_report(path);
    const fs::path dir = fs::is_directory(path) ? fs::path(path) : fs::path(path).parent_path();
    write_tables(rep, dir);
    std::cout << "experiment " << rep.experiment << " (" << rep.timestamp << ")\n";
    for (const auto& t : rep.tables) std::cout << t.text() << '\n';
    if (!rep.failures.empty()) std::cout << rep.failures.size() << " recorded failure(s)\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mergelab: model merging with interference resolution on synthetic multi-task suites"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed for suite, training, auxiliary data and RI");
    app.add_option("--out-dir", g.out_dir, "Output directory");
    app.add_option("--jobs", g.jobs, "Worker thread cap (0 = all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--set", g.overrides, "Config override key.path=value (repeatable)");

    std::string out, bundle_path, model_path, merged_path, metric = "kl", experiment_name, report_path;
    std::string method;
    std::optional<double> lambda, topk, common_fraction;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> methods;

    auto* gen = app.add_subcommand("gen-suite", "Generate a synthetic task suite and write its descriptor");
    gen->add_option("--out", out, "Descriptor path");

    auto* train = app.add_subcommand("train-experts", "Pretrain theta_0 and fine-tune one expert per task");
    train->add_option("--out", out, "Bundle checkpoint path");

    auto* ri = app.add_subcommand("ri-adapt", "Resolve interference in every task vector of a bundle");
    ri->add_option("--bundle", bundle_path, "Input bundle checkpoint")->required()->check(CLI::ExistingFile);
    ri->add_option("--out", out, "Adapted bundle checkpoint path");

    auto* mrg = app.add_subcommand("merge", "Merge a bundle's task vectors");
    mrg->add_option("--bundle", bundle_path, "Bundle checkpoint")->required()->check(CLI::ExistingFile);
    mrg->add_option("--method", method, "averaging, ta, ties, knots, tsvm, iso_c or iso_cts");
    mrg->add_option("--lambda", lambda, "Scaling coefficient");
    mrg->add_option("--topk", topk, "Fraction of entries kept (ties, knots)");
    mrg->add_option("--common-fraction", common_fraction, "Common-subspace fraction (iso_cts)");
    mrg->add_option("--out", out, "Merged model checkpoint path");

    auto* ev = app.add_subcommand("eval", "Per-task accuracy of a bundle or a model");
    ev->add_option("--bundle", bundle_path, "Bundle checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--model", model_path, "Parameter checkpoint to evaluate")->check(CLI::ExistingFile);

    auto* xic = app.add_subcommand("xi", "Cross-task interference of a merged model");
    xic->add_option("--bundle", bundle_path, "Bundle checkpoint")->required()->check(CLI::ExistingFile);
    xic->add_option("--merged", merged_path, "Merged model checkpoint")->required()->check(CLI::ExistingFile);
    xic->add_option("--metric", metric, "kl, cross_entropy or mse");

    auto* exp = app.add_subcommand("experiment", "Run a named experiment and write its report");
    exp->add_option("name", experiment_name, "Experiment name")->required();
    exp->add_option("--seeds", seeds, "Seeds to iterate over")->delimiter(',');
    exp->add_option("--methods", methods, "Merge methods to cover")->delimiter(',');

    auto* rep = app.add_subcommand("report", "Re-render the tables of a stored run");
    rep->add_option("path", report_path, "Run directory or report.txt")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (!seeds.empty()) {
            json arr = json::array();
            for (auto s : seeds) arr.push_back(s);
            g.overrides.push_back("seeds=" + arr.dump());
        }
        if (!methods.empty()) {
            for (const auto& m : methods) parse_method(m);
            g.overrides.push_back("methods=" + json(methods).dump());
        }
        if (!method.empty()) {
            parse_method(method);
            g.overrides.push_back("merge.method=" + json(method).dump());
        }
        if (lambda) g.overrides.push_back("merge.lambda=" + json(*lambda).dump());
        if (topk) g.overrides.push_back("merge.topk=" + json(*topk).dump());
        if (common_fraction) g.overrides.push_back("merge.common_fraction=" + json(*common_fraction).dump());

        if (rep->parsed()) return cmd_report(report_path);
        const RunConfig cfg = load_config(g);
        if (gen->parsed()) return cmd_gen_suite(cfg, out);
        if (train->parsed()) return cmd_train(cfg, out);
        if (ri->parsed()) return cmd_ri(cfg, bundle_path, out);
        if (mrg->parsed()) return cmd_merge(cfg, bundle_path, out);
        if (ev->parsed()) return cmd_eval(bundle_path, model_path);
        if (xic->parsed()) return cmd_xi(bundle_path, merged_path, metric);
        if (exp->parsed()) return cmd_experiment(cfg, experiment_name);
    } catch (const NumericFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const TrainingError& e) {
        std::cerr << "training failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
