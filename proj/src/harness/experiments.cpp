// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/harness/experiments.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>

#include "mergelab/core/error.hpp"
#include "mergelab/core/kernels.hpp"
#include "mergelab/core/prng.hpp"
#include "mergelab/interference/xi.hpp"
#include "mergelab/merge/merge.hpp"
#include "mergelab/model/checkpoint.hpp"
#include "mergelab/ri/distill.hpp"
#include "mergelab/ri/resolve.hpp"

namespace mergelab {

using json = nlohmann::json;
using Row = std::vector<json>;

namespace {

constexpr const char* kVersion = "0.1.0";

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct SeedOutcome {
    std::uint64_t seed = 0;
    std::string stage = "setup";
    std::map<std::string, std::vector<Row>> rows;
    json details = json::object();
    json failures = json::array();
    json timings = json::object();
    std::vector<std::pair<std::string, std::string>> checkpoints;

    void fail(const std::string& kind, const std::string& message) {
        failures.push_back({{"seed", seed}, {"stage", stage}, {"kind", kind}, {"message", message}});
    }
    void add(const std::string& table, Row row) { rows[table].push_back(std::move(row)); }
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::shared_ptr<const TaskSuite> suite;
    ExpertBundle bundle;
    TrainReport train;
    std::vector<Tensor> evals;
};

SeedRun prepare(const RunConfig& cfg, std::uint64_t s, SeedOutcome& out) {
    const auto t0 = std::chrono::steady_clock::now();
    SeedRun run;
    run.seed = s;
    out.stage = "suite";
    run.suite = std::make_shared<const TaskSuite>(gen_suite(cfg.suite_for(s)));
    run.evals = run.suite->eval_inputs();
    out.stage = "train";
    run.bundle = train_experts(*run.suite, cfg.train_for(s), &run.train);
    out.details["train"] = {{"zero_shot", run.train.zero_shot},
                            {"finetuned", run.train.finetuned},
                            {"pretrain_accuracy", run.train.pretrain_accuracy},
                            {"theta0_fingerprint", fingerprint_hex(run.bundle.theta0.fingerprint())}};
    out.timings["train_seconds"] = seconds_since(t0);
    return run;
}

struct Score {
    std::vector<double> acc;
    InterferenceReport xi;
    double mean() const { return mean_of(acc); }
};

Score score(const SeedRun& run, const ParamSet& theta) {
    return {evaluate(theta, run.bundle.heads, *run.suite), xi(run.bundle, theta, run.evals, DistanceMetric::Kl, "eval")};
}

double accuracy_only(const SeedRun& run, const ParamSet& theta) {
    return mean_of(evaluate(theta, run.bundle.heads, *run.suite));
}

ParamSet merged_with(const ExpertBundle& b, MergeConfig mc) {
    return merged_model(b, merge(b, mc));
}

ParamSet merged_default(const ExpertBundle& b, MergeMethod m) {
    MergeConfig mc;
    mc.method = m;
    return merged_with(b, mc);
}

std::unique_ptr<AuxSource> aux_for(const RunConfig& cfg, const SeedRun& run, const AuxSpec* override_spec = nullptr) {
    AuxSpec spec = override_spec ? *override_spec : cfg.aux_for(run.seed);
    spec.seed = run.seed;
    return std::make_unique<AuxSource>(spec, run.suite.get());
}

/// Runs RI, records timings and trace summaries, and returns false (with a
/// failure entry) when any expert diverged.
bool run_ri(const SeedRun& run, const RiConfig& ri, const AuxSource& aux, SeedOutcome& out,
            RiResult& result, const std::string& label) {
    const auto t0 = std::chrono::steady_clock::now();
    out.stage = "ri:" + label;
    result = resolve_interference(run.bundle, ri, aux.sampler());
    out.timings["ri_seconds:" + label] = seconds_since(t0);
    json summary = json::array();
    for (const auto& tr : result.traces) {
        const std::size_t n = tr.total.size();
        const std::size_t w = std::max<std::size_t>(1, n / 10);
        double first = 0.0, last = 0.0;
        for (std::size_t k = 0; k < w && k < n; ++k) {
            first += tr.total[k];
            last += tr.total[n - 1 - k];
        }
        json e{{"expert", tr.expert}, {"steps_run", tr.steps_run}, {"diverged", tr.diverged}};
        if (n) {
            e["l_ri_first_decile"] = first / static_cast<double>(w);
            e["l_ri_last_decile"] = last / static_cast<double>(w);
            e["preserve_final"] = tr.preserve.back();
            e["interference_final"] = tr.interference.back();
        }
        if (!tr.diagnostic.empty()) e["diagnostic"] = tr.diagnostic;
        summary.push_back(std::move(e));
    }
    out.details["ri"][label] = {{"config", ri_config_to_json(ri)}, {"traces", summary}};
    if (result.any_diverged()) {
        for (const auto& tr : result.traces)
            if (tr.diverged) out.fail("numeric", "expert " + std::to_string(tr.expert) + ": " + tr.diagnostic);
        return false;
    }
    return true;
}

bool distill_ok(const DistillResult& d, SeedOutcome& out) {
    if (!d.diverged) return true;
    out.fail("numeric", d.diagnostic);
    return false;
}

std::vector<std::string> task_columns(const std::string& prefix, std::size_t n) {
    std::vector<std::string> cols;
    for (std::size_t t = 0; t < n; ++t) cols.push_back(prefix + std::to_string(t));
    return cols;
}

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
    std::vector<std::string> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

void append_score(Row& row, const Score& s) {
    for (double a : s.acc) row.push_back(a);
    row.push_back(s.mean());
    for (double x : s.xi.per_task) row.push_back(x);
    row.push_back(s.xi.total);
}

/// Full-score columns: acc_task*, acc_mean, xi_task*, xi_total.
std::vector<std::string> score_columns(std::size_t n) {
    return concat({task_columns("acc_task", n), {"acc_mean"}, task_columns("xi_task", n), {"xi_total"}});
}

/// Averages numeric `value_cols` over seeds for every distinct combination
/// of `key_cols`, keeping first-appearance order.
Table seed_summary(const Table& src, const std::string& name, const std::vector<std::string>& key_cols,
                   const std::vector<std::string>& value_cols) {
    Table t;
    t.name = name;
    t.columns = concat({key_cols, value_cols, {"seeds"}});
    std::vector<Row> keys;
    std::vector<std::vector<double>> sums;
    std::vector<std::size_t> counts;
    for (const auto& r : src.rows) {
        Row key;
        for (const auto& k : key_cols) key.push_back(r[src.column(k)]);
        std::size_t idx = 0;
        while (idx < keys.size() && keys[idx] != key) ++idx;
        if (idx == keys.size()) {
            keys.push_back(key);
            sums.emplace_back(value_cols.size(), 0.0);
            counts.push_back(0);
        }
        for (std::size_t v = 0; v < value_cols.size(); ++v) {
            const json& cell = r[src.column(value_cols[v])];
            sums[idx][v] += cell.is_number() ? cell.get<double>() : 0.0;
        }
        ++counts[idx];
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
        Row row = keys[i];
        for (double s : sums[i]) row.push_back(s / static_cast<double>(counts[i]));
        row.push_back(counts[i]);
        t.add(std::move(row));
    }
    return t;
}

struct ExperimentDef {
    std::string name;
    std::function<std::vector<std::pair<std::string, std::vector<std::string>>>(const RunConfig&)> tables;
    std::function<void(const RunConfig&, std::uint64_t, SeedOutcome&)> per_seed;
    std::function<void(const RunConfig&, ExperimentReport&)> finish;
};

// ---------------------------------------------------------------- merge_grid

void merge_grid_seed(const RunConfig& cfg, std::uint64_t s, SeedOutcome& out) {
    const SeedRun run = prepare(cfg, s, out);
    const std::size_t n = run.suite->tasks();
    if (cfg.save_checkpoints) {
        out.checkpoints.emplace_back("bundle_seed" + std::to_string(s) + ".mfckpt", checkpoint_text(run.bundle));
    }
    out.stage = "baseline";
    {
        Row row{s, "Zero-shot", "baseline"};
        append_score(row, score(run, run.bundle.theta0));
        out.add("merge_grid", std::move(row));
    }
    {
        Row row{s, "Finetuned", "baseline"};
        for (std::size_t i = 0; i < n; ++i) row.push_back(evaluate(run.bundle.expert(i), run.bundle.heads, *run.suite)[i]);
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += row[3 + i].get<double>();
        row.push_back(m / static_cast<double>(n));
        for (std::size_t i = 0; i <= n; ++i) row.push_back(0.0);
        out.add("merge_grid", std::move(row));
    }
    for (auto m : cfg.method_list()) {
        Row row{s, std::string(method_id(m)), "baseline"};
        append_score(row, score(run, merged_default(run.bundle, m)));
        out.add("merge_grid", std::move(row));
    }

    const auto aux = aux_for(cfg, run);
    RiResult ri;
    if (!run_ri(run, cfg.ri_for(s), *aux, out, ri, "default")) return;
    if (cfg.save_checkpoints) {
        out.checkpoints.emplace_back("bundle_ri_seed" + std::to_string(s) + ".mfckpt", checkpoint_text(ri.adapted));
    }
    out.stage = "ri-merges";
    {
        Row row{s, "Finetuned", "ri"};
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = evaluate(ri.adapted.expert(i), run.bundle.heads, *run.suite)[i];
            row.push_back(a);
            m += a;
        }
        row.push_back(m / static_cast<double>(n));
        const auto x = [&] {
            std::vector<double> v;
            for (std::size_t i = 0; i < n; ++i) {
                v.push_back(xi(run.bundle, ri.adapted.expert(i), run.evals).per_task[i]);
            }
            return v;
        }();
        double total = 0.0;
        for (double v : x) {
            row.push_back(v);
            total += v;
        }
        row.push_back(total);
        out.add("merge_grid", std::move(row));
    }
    for (auto m : cfg.method_list()) {
        Row row{s, std::string(method_id(m)), "ri"};
        append_score(row, score(run, merged_default(ri.adapted, m)));
        out.add("merge_grid", std::move(row));
    }
    for (std::size_t i = 0; i < ri.traces.size(); ++i) {
        const auto& tr = ri.traces[i];
        if (tr.total.empty()) continue;
        out.add("ri_traces", {s, tr.expert, tr.steps_run, tr.total.front(), tr.total.back(), tr.preserve.back(),
                              tr.interference.back()});
    }
}

// ---------------------------------------------------------- distance_metrics

void distance_metrics_seed(const RunConfig& cfg, std::uint64_t s, SeedOutcome& out) {
    const SeedRun run = prepare(cfg, s, out);
    out.stage = "baseline";
    for (auto m : cfg.method_list()) {
        const Score sc = score(run, merged_default(run.bundle, m));
        out.add("distance_metrics", {s, std::string(method_id(m)), "-", sc.mean(), sc.xi.total});
    }
    const auto aux = aux_for(cfg, run);
    for (auto metric : {DistanceMetric::Kl, DistanceMetric::CrossEntropy, DistanceMetric::Mse}) {
        RiConfig ri = cfg.ri_for(s);
        ri.metric = metric;
        const std::string id(metric_id(metric));
        RiResult res;
        if (!run_ri(run, ri, *aux, out, res, id)) continue;
        out.stage = "merges:" + id;
        for (auto m : cfg.method_list()) {
            const Score sc = score(run, merged_default(res.adapted, m));
            out.add("distance_metrics", {s, std::string(method_id(m)), id, sc.mean(), sc.xi.total});
        }
    }
}

// --------------------------------------------------------- distill_baselines

void distill_baselines_seed(const RunConfig& cfg, std::uint64_t s, SeedOutcome& out) {
    const SeedRun run = prepare(cfg, s, out);
    const auto aux = aux_for(cfg, run);
    const RiConfig ri_cfg = cfg.ri_for(s);
    auto emit = [&](const std::string& method, const std::string& setting, const ParamSet& theta) {
        Row row{s, method, setting};
        append_score(row, score(run, theta));
        out.add("distill_baselines", std::move(row));
    };

    out.stage = "zero-shot";
    emit("-", "Zero-shot", run.bundle.theta0);
    out.stage = "zero-shot-distill";
    {
        const DistillResult d = zero_shot_distill(run.bundle, ri_cfg, aux->sampler());
        out.details["distill"]["zero_shot"] = {{"loss_first", d.loss.empty() ? 0.0 : d.loss.front()},
                                               {"loss_last", d.loss.empty() ? 0.0 : d.loss.back()},
                                               {"steps_run", d.steps_run}};
        out.timings["zero_shot_distill_seconds"] = d.wall_seconds;
        if (distill_ok(d, out)) emit("-", "Zero-shot+Distill", apply(run.bundle.theta0, d.tau));
    }

    RiResult ri;
    const bool ri_ok = run_ri(run, ri_cfg, *aux, out, ri, "default");
    for (auto m : cfg.method_list()) {
        const std::string id(method_id(m));
        out.stage = "merge:" + id;
        MergeConfig mc;
        mc.method = m;
        const MergeOutput base = merge(run.bundle, mc);
        emit(id, "Merge", merged_model(run.bundle, base));
        out.stage = "merge-distill:" + id;
        const DistillResult d = merge_distill_aux(run.bundle, base.tau, ri_cfg, aux->sampler());
        out.details["distill"][id] = {{"loss_first", d.loss.empty() ? 0.0 : d.loss.front()},
                                      {"loss_last", d.loss.empty() ? 0.0 : d.loss.back()},
                                      {"steps_run", d.steps_run}};
        out.timings["merge_distill_seconds:" + id] = d.wall_seconds;
        if (distill_ok(d, out)) emit(id, "Merge+Distill_Aux", apply(run.bundle.theta0, d.tau));
        if (ri_ok) {
            out.stage = "merge-ri:" + id;
            emit(id, "Merge+RI", merged_default(ri.adapted, m));
        }
    }
}

// ---------------------------------------------------------------- aux_sources

void aux_sources_seed(const RunConfig& cfg, std::uint64_t s, SeedOutcome& out) {
    const SeedRun run = prepare(cfg, s, out);
    out.stage = "baseline";
    for (auto m : cfg.method_list()) {
        const Score sc = score(run, merged_default(run.bundle, m));
        out.add("aux_sources", {s, "-", false, std::string(method_id(m)), sc.mean(), sc.xi.total});
    }
    for (auto kind : {AuxKind::GaussianNoise, AuxKind::StructuredSynthetic, AuxKind::NearDistribution,
                      AuxKind::OracleTaskData}) {
        AuxSpec spec = cfg.aux_for(s);
        spec.kind = kind;
        const auto aux = aux_for(cfg, run, &spec);
        RiConfig ri = cfg.ri_for(s);
        const std::string id(aux_kind_id(kind));
        ri.aux_source = id;
        RiResult res;
        if (!run_ri(run, ri, *aux, out, res, id)) continue;
        out.stage = "merges:" + id;
        for (auto m : cfg.method_list()) {
            const Score sc = score(run, merged_default(res.adapted, m));
            out.add("aux_sources", {s, id, spec.privileged(), std::string(method_id(m)), sc.mean(), sc.xi.total});
        }
    }
}

// -------------------------------------------------------------- hp_sensitivity

void hp_sensitivity_seed(const RunConfig& cfg, std::uint64_t s, SeedOutcome& out) {
    const SeedRun run = prepare(cfg, s, out);
    const std::size_t n = run.suite->tasks();
    const auto aux = aux_for(cfg, run);
    RiResult ri;
    const bool ri_ok = run_ri(run, cfg.ri_for(s), *aux, out, ri, "default");

    std::vector<MergeMethod> methods;
    for (auto m : cfg.method_list())
        if (std::find(hp_methods().begin(), hp_methods().end(), m) != hp_methods().end()) methods.push_back(m);

    for (auto m : methods) {
        const SweepGrid grid = hp_grid(m, n);
        const std::vector<double> second = grid.secondary.empty() ? std::vector<double>{0.0} : grid.secondary;
        // The range is taken along lambda at the grid value closest to the default.
        double range_at = second.front();
        for (double v : second)
            if (std::abs(v - grid.secondary_default) < std::abs(range_at - grid.secondary_default)) range_at = v;
        for (const char* variant : {"baseline", "ri"}) {
            const bool adapted = std::string(variant) == "ri";
            if (adapted && !ri_ok) continue;
            const ExpertBundle& b = adapted ? ri.adapted : run.bundle;
            out.stage = "grid:" + std::string(method_id(m)) + ":" + variant;
            double lo = 1e300, hi = -1e300, best = -1e300, best_lambda = 0.0, best_second = 0.0;
            for (double sec : second) {
                for (double lambda : grid.lambdas) {
                    MergeConfig mc;
                    mc.method = m;
                    mc.lambda = lambda;
                    if (grid.secondary_name == "topk") mc.topk = sec;
                    if (grid.secondary_name == "common_fraction") mc.common_fraction = sec;
                    const double acc = accuracy_only(run, merged_with(b, mc));
                    out.add("hp_grid", {s, std::string(method_id(m)), variant, lambda,
                                        grid.secondary_name.empty() ? json("-") : json(grid.secondary_name),
                                        grid.secondary_name.empty() ? json(nullptr) : json(sec), acc});
                    if (sec == range_at) {
                        lo = std::min(lo, acc);
                        hi = std::max(hi, acc);
                    }
                    if (acc > best) {
                        best = acc;
                        best_lambda = lambda;
                        best_second = sec;
                    }
                }
            }
            out.add("hp_ranges", {s, std::string(method_id(m)), variant, lo, hi, hi - lo, best, best_lambda,
                                  grid.secondary_name.empty() ? json(nullptr) : json(best_second)});
        }
    }
}

// -------------------------------------------------------------------- aux_size

void aux_size_seed(const RunConfig& cfg, std::uint64_t s, SeedOutcome& out) {
    const SeedRun run = prepare(cfg, s, out);
    out.stage = "baseline";
    for (auto m : cfg.method_list()) {
        const Score sc = score(run, merged_default(run.bundle, m));
        out.add("aux_size", {s, nullptr, 0, std::string(method_id(m)), sc.mean(), sc.xi.total});
    }
    const RiConfig ri = cfg.ri_for(s);
    const double budget = static_cast<double>(ri.steps * ri.batch_size);
    for (double f : aux_size_fractions()) {
        AuxSpec spec = cfg.aux_for(s);
        spec.pool_size = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * budget)));
        const auto aux = aux_for(cfg, run, &spec);
        char label[32];
        std::snprintf(label, sizeof label, "fraction_%.1f", f);
        RiResult res;
        if (!run_ri(run, ri, *aux, out, res, label)) continue;
        out.stage = std::string("merges:") + label;
        for (auto m : cfg.method_list()) {
            const Score sc = score(run, merged_default(res.adapted, m));
            out.add("aux_size", {s, f, spec.pool_size, std::string(method_id(m)), sc.mean(), sc.xi.total});
        }
    }
}

// ------------------------------------------------------------- avg_scale_sweep

void avg_scale_seed(const RunConfig& cfg, std::uint64_t s, SeedOutcome& out) {
    const SeedRun run = prepare(cfg, s, out);
    const std::size_t n = run.suite->tasks();
    out.stage = "zero-shot";
    {
        Row row{s, "Zero-shot", "baseline", nullptr};
        append_score(row, score(run, run.bundle.theta0));
        out.add("avg_scale_sweep", std::move(row));
    }
    const auto aux = aux_for(cfg, run);
    RiResult ri;
    const bool ri_ok = run_ri(run, cfg.ri_for(s), *aux, out, ri, "default");
    for (const char* variant : {"baseline", "ri"}) {
        const bool adapted = std::string(variant) == "ri";
        if (adapted && !ri_ok) continue;
        const ExpertBundle& b = adapted ? ri.adapted : run.bundle;
        out.stage = std::string("sweep:") + variant;
        const TaskVector sum = merge_ta(b.vectors, 1.0).tau;
        for (double c : avg_scale_grid(n)) {
            Row row{s, "averaging", variant, c};
            append_score(row, score(run, apply(b.theta0, sum, c)));
            out.add("avg_scale_sweep", std::move(row));
        }
    }
}

// ------------------------------------------------------------------ trajectory

void trajectory_seed(const RunConfig& cfg, std::uint64_t s, SeedOutcome& out) {
    const SeedRun run = prepare(cfg, s, out);
    const std::size_t n = run.suite->tasks();
    const auto aux = aux_for(cfg, run);
    RiConfig ri_cfg = cfg.ri_for(s);
    constexpr std::size_t every = 50;
    ri_cfg.snapshot_every = every;
    RiResult ri;
    if (!run_ri(run, ri_cfg, *aux, out, ri, "default")) return;

    out.stage = "series";
    Prng probe_rng = Prng(s).split("trajectory-probe");
    const Tensor probe = aux->sample(probe_rng, 512);
    // Snapshots start at step 0 (the original experts); the final vectors
    // close the series when the budget is not a multiple of the interval.
    std::vector<std::size_t> steps;
    for (const auto& [step, _] : ri.traces.front().snapshots) steps.push_back(step);
    if (steps.empty() || steps.back() != ri.traces.front().steps_run) steps.push_back(ri.traces.front().steps_run);
    for (std::size_t step : steps) {
        ExpertBundle at = run.bundle;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& tr = ri.traces[i];
            const TaskVector* found = nullptr;
            for (const auto& [k, tv] : tr.snapshots)
                if (k == step) found = &tv;
            at.vectors[i] = found ? *found : ri.adapted.vectors[i];
        }
        double l_ri = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            l_ri += ri_loss(probe, run.bundle, i, at.vectors[i].delta, ri_cfg.alpha, ri_cfg.metric).total;
        }
        l_ri /= static_cast<double>(n);
        const Score ta = score(run, merged_default(at, MergeMethod::TaskArithmetic));
        const Score ties = score(run, merged_default(at, MergeMethod::Ties));
        out.add("trajectory", {s, step, l_ri, ta.xi.total, ties.xi.total, ta.mean(), ties.mean()});
    }
    for (const auto& tr : ri.traces) {
        for (std::size_t k = 0; k < tr.total.size(); ++k) {
            out.add("ri_steps", {s, tr.expert, k, tr.preserve[k], tr.interference[k], tr.total[k]});
        }
    }
}

const std::vector<ExperimentDef>& registry() {
    static const std::vector<ExperimentDef> defs = [] {
        std::vector<ExperimentDef> d;
        d.push_back({"merge_grid",
                     [](const RunConfig& c) {
                         return std::vector<std::pair<std::string, std::vector<std::string>>>{
                             {"merge_grid", concat({{"seed", "model", "variant"}, score_columns(c.suite.tasks)})},
                             {"ri_traces",
                              {"seed", "expert", "steps_run", "l_ri_first", "l_ri_last", "preserve_last",
                               "interference_last"}}};
                     },
                     merge_grid_seed,
                     [](const RunConfig&, ExperimentReport& r) {
                         r.tables.push_back(seed_summary(r.table("merge_grid"), "summary", {"model", "variant"},
                                                         {"acc_mean", "xi_total"}));
                     }});
        d.push_back({"distance_metrics",
                     [](const RunConfig&) {
                         return std::vector<std::pair<std::string, std::vector<std::string>>>{
                             {"distance_metrics", {"seed", "model", "ri_metric", "acc_mean", "xi_total"}}};
                     },
                     distance_metrics_seed,
                     [](const RunConfig&, ExperimentReport& r) {
                         r.tables.push_back(seed_summary(r.table("distance_metrics"), "summary",
                                                         {"model", "ri_metric"}, {"acc_mean", "xi_total"}));
                     }});
        d.push_back({"distill_baselines",
                     [](const RunConfig& c) {
                         return std::vector<std::pair<std::string, std::vector<std::string>>>{
                             {"distill_baselines",
                              concat({{"seed", "method", "setting"}, score_columns(c.suite.tasks)})}};
                     },
                     distill_baselines_seed,
                     [](const RunConfig&, ExperimentReport& r) {
                         r.tables.push_back(seed_summary(r.table("distill_baselines"), "summary",
                                                         {"method", "setting"}, {"acc_mean", "xi_total"}));
                     }});
        d.push_back({"aux_sources",
                     [](const RunConfig&) {
                         return std::vector<std::pair<std::string, std::vector<std::string>>>{
                             {"aux_sources", {"seed", "source", "privileged", "model", "acc_mean", "xi_total"}}};
                     },
                     aux_sources_seed,
                     [](const RunConfig& c, ExperimentReport& r) {
                         r.tables.push_back(seed_summary(r.table("aux_sources"), "summary",
                                                         {"source", "privileged", "model"}, {"acc_mean", "xi_total"}));
                         AuxSpec spec = c.aux;
                         spec.kind = AuxKind::StructuredSynthetic;
                         r.details["structured_synthetic"] = {
                             {"rank", spec.rank},
                             {"pieces", spec.pieces},
                             {"note", "rank bound and piece count operationalize visual diversity"}};
                         r.details["privileged_sources"] = {"oracle_task_data"};
                     }});
        d.push_back({"hp_sensitivity",
                     [](const RunConfig&) {
                         return std::vector<std::pair<std::string, std::vector<std::string>>>{
                             {"hp_grid", {"seed", "method", "variant", "lambda", "secondary", "secondary_value",
                                          "acc_mean"}},
                             {"hp_ranges", {"seed", "method", "variant", "acc_min", "acc_max", "range", "best_acc",
                                            "best_lambda", "best_secondary"}}};
                     },
                     hp_sensitivity_seed,
                     [](const RunConfig& c, ExperimentReport& r) {
                         r.tables.push_back(seed_summary(r.table("hp_ranges"), "summary", {"method", "variant"},
                                                         {"acc_min", "acc_max", "range", "best_acc"}));
                         json grids = json::object();
                         for (auto m : hp_methods()) {
                             const SweepGrid g = hp_grid(m, c.suite.tasks);
                             grids[std::string(method_id(m))] = {{"lambdas", g.lambdas},
                                                                 {"secondary", g.secondary_name},
                                                                 {"secondary_values", g.secondary},
                                                                 {"secondary_default", g.secondary_default}};
                         }
                         r.details["grids"] = grids;
                     }});
        d.push_back({"aux_size",
                     [](const RunConfig&) {
                         return std::vector<std::pair<std::string, std::vector<std::string>>>{
                             {"aux_size", {"seed", "fraction", "pool_size", "model", "acc_mean", "xi_total"}}};
                     },
                     aux_size_seed,
                     [](const RunConfig&, ExperimentReport& r) {
                         r.tables.push_back(seed_summary(r.table("aux_size"), "summary", {"fraction", "model"},
                                                         {"acc_mean", "xi_total"}));
                     }});
        d.push_back({"avg_scale_sweep",
                     [](const RunConfig& c) {
                         return std::vector<std::pair<std::string, std::vector<std::string>>>{
                             {"avg_scale_sweep",
                              concat({{"seed", "model", "variant", "coefficient"}, score_columns(c.suite.tasks)})}};
                     },
                     avg_scale_seed,
                     [](const RunConfig&, ExperimentReport& r) {
                         r.tables.push_back(seed_summary(r.table("avg_scale_sweep"), "summary",
                                                         {"model", "variant", "coefficient"}, {"acc_mean", "xi_total"}));
                     }});
        d.push_back({"trajectory",
                     [](const RunConfig&) {
                         return std::vector<std::pair<std::string, std::vector<std::string>>>{
                             {"trajectory", {"seed", "step", "l_ri", "xi_ta", "xi_ties", "acc_ta", "acc_ties"}},
                             {"ri_steps", {"seed", "expert", "step", "preserve", "interference", "total"}}};
                     },
                     trajectory_seed,
                     [](const RunConfig&, ExperimentReport& r) {
                         r.tables.push_back(seed_summary(r.table("trajectory"), "summary", {"step"},
                                                         {"l_ri", "xi_ta", "xi_ties", "acc_ta", "acc_ties"}));
                     }});
        return d;
    }();
    return defs;
}

} // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& d : registry()) v.push_back(d.name);
        return v;
    }();
    return names;
}

std::vector<double> avg_scale_grid(std::size_t tasks) {
    if (tasks == 0) throw ConfigError("avg_scale_grid needs at least one task");
    std::vector<double> g;
    for (int k = 0; k <= 12; ++k) g.push_back(static_cast<double>(k) / (2.0 * static_cast<double>(tasks)));
    return g;
}

const std::vector<MergeMethod>& hp_methods() {
    static const std::vector<MergeMethod> m = {MergeMethod::TaskArithmetic, MergeMethod::Ties, MergeMethod::Knots,
                                               MergeMethod::Tsvm,           MergeMethod::IsoC, MergeMethod::IsoCts};
    return m;
}

SweepGrid hp_grid(MergeMethod method, std::size_t tasks) {
    SweepGrid g;
    const MethodDefaults def = method_defaults(method, std::max<std::size_t>(tasks, 1));
    const double top = method == MergeMethod::TaskArithmetic ? 1.0 : 3.0;
    switch (method) {
    case MergeMethod::TaskArithmetic:
    case MergeMethod::Tsvm:
    case MergeMethod::IsoC: break;
    case MergeMethod::Ties:
    case MergeMethod::Knots:
        g.secondary_name = "topk";
        for (int k = 1; k <= 10; ++k) g.secondary.push_back(k / 10.0);
        g.secondary_default = def.topk;
        break;
    case MergeMethod::IsoCts:
        g.secondary_name = "common_fraction";
        for (int k = 5; k <= 10; ++k) g.secondary.push_back(k / 10.0);
        g.secondary_default = def.common_fraction;
        break;
    default: throw ConfigError("no tuning grid for merge method '" + std::string(method_id(method)) + "'");
    }
    for (int k = 1; k <= 30; ++k) g.lambdas.push_back(top * k / 30.0);
    return g;
}

const std::vector<double>& aux_size_fractions() {
    static const std::vector<double> f = {1.0, 0.8, 0.6, 0.4, 0.2};
    return f;
}

ExperimentReport run_experiment(const std::string& name, const RunConfig& cfg) {
    const ExperimentDef* def = nullptr;
    for (const auto& d : registry())
        if (d.name == name) def = &d;
    if (!def) {
        std::string list;
        for (const auto& n : experiment_names()) list += (list.empty() ? "" : ", ") + n;
        throw ConfigError("unknown experiment '" + name + "' (valid: " + list + ")");
    }
    if (cfg.jobs > 0) kernels::set_max_threads(cfg.jobs);

    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport report;
    report.experiment = name;
    report.timestamp = utc_timestamp();
    report.config = cfg.to_json();
    report.details["versions"] = {{"mergelab", kVersion},
                                  {"prng", std::string(Prng::kAlgorithm)},
                                  {"checkpoint_format", kCheckpointVersion}};

    const auto seeds = cfg.seed_list();
    std::vector<SeedOutcome> outcomes(seeds.size());
    auto one = [&](std::size_t k) {
        SeedOutcome& out = outcomes[k];
        out.seed = seeds[k];
        const auto start = std::chrono::steady_clock::now();
        try {
            def->per_seed(cfg, seeds[k], out);
        } catch (const TrainingError& e) {
            out.fail("training", e.what());
        } catch (const NumericError& e) {
            out.fail("numeric", e.what());
        } catch (const std::exception& e) {
            out.fail("error", e.what());
        }
        out.timings["seconds"] = seconds_since(start);
    };
    if (seeds.size() == 1) {
        one(0);
    } else {
        kernels::parallel_for(seeds.size(), one);
    }

    for (const auto& [tname, cols] : def->tables(cfg)) {
        Table t;
        t.name = tname;
        t.columns = cols;
        for (const auto& out : outcomes) {
            const auto it = out.rows.find(tname);
            if (it == out.rows.end()) continue;
            for (const auto& r : it->second) t.add(r);
        }
        report.tables.push_back(std::move(t));
    }
    json per_seed = json::object();
    for (const auto& out : outcomes) {
        per_seed[std::to_string(out.seed)] = out.details;
        for (const auto& f : out.failures) report.failures.push_back(f);
        report.timings[std::to_string(out.seed)] = out.timings;
        for (const auto& c : out.checkpoints) report.checkpoints.push_back(c);
    }
    report.details["seeds"] = per_seed;
    if (def->finish) def->finish(cfg, report);
    report.wall_seconds = seconds_since(t0);
    return report;
}

} // namespace mergelab
