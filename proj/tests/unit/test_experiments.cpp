// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

#include "mergelab/core/error.hpp"
#include "mergelab/harness/config.hpp"
#include "mergelab/harness/experiments.hpp"
#include "mergelab/harness/report.hpp"

using namespace mergelab;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.seed = 3;
    cfg.save_checkpoints = false;
    cfg.suite.classes = 8;
    cfg.suite.train_per_class = 40;
    cfg.suite.eval_per_class = 20;
    cfg.train.epochs = 2;
    cfg.train.accuracy_gate = 0.0;
    cfg.ri.steps = 20;
    cfg.ri.batch_size = 32;
    return cfg;
}

struct TempDir {
    fs::path path = fs::temp_directory_path() / ("mergelab-test-" + std::to_string(::getpid()));
    ~TempDir() { fs::remove_all(path); }
};

double acc(const Table& t, const std::vector<json>& row) { return row[t.column("acc_mean")].get<double>(); }

} // namespace

TEST_CASE("RunConfig JSON round-trip and overrides") {
    RunConfig cfg = tiny_config();
    cfg.seeds = {4, 9};
    cfg.methods = {MergeMethod::Ties, MergeMethod::IsoCts};
    cfg.merge.topk = 0.3;
    const RunConfig back = RunConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
    CHECK(back.seed_list() == std::vector<std::uint64_t>{4, 9});
    CHECK(back.method_list() == cfg.methods);
    CHECK(back.ri_for(9).seed == 9);
    CHECK(back.suite_for(4).seed == 4);

    json doc = cfg.to_json();
    apply_override(doc, "ri.steps=77");
    apply_override(doc, "aux.kind=gaussian_noise");
    apply_override(doc, "suite.sigma=0.25");
    const RunConfig o = RunConfig::from_json(doc);
    CHECK(o.ri.steps == 77);
    CHECK(o.suite.sigma == 0.25);
    CHECK(o.ri_for(1).aux_source == "gaussian_noise");
    CHECK_THROWS_AS(apply_override(doc, "no-equals-sign"), ConfigError);
}

TEST_CASE("RunConfig rejects unknown keys") {
    json doc = RunConfig{}.to_json();
    doc["stepz"] = 3;
    try {
        (void)RunConfig::from_json(doc);
        FAIL("accepted an unknown key");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("stepz") != std::string::npos);
    }
    CHECK(RunConfig{}.seed_list() == std::vector<std::uint64_t>{1});
    CHECK(RunConfig{}.method_list().size() == 7);
}

TEST_CASE("report tables: csv quoting and text rendering") {
    Table t{"demo", {"name", "value", "missing"}, {}};
    t.add({"plain", 0.5, nullptr});
    t.add({"with, comma \"q\"", 2, nullptr});
    CHECK_THROWS_AS(t.add({"short"}), DimensionError);
    CHECK(t.csv() == "name,value,missing\nplain,0.5,\n\"with, comma \"\"q\"\"\",2,\n");
    const std::string text = t.text();
    CHECK(text.find("0.5000") != std::string::npos);
    CHECK(text.find("-") != std::string::npos);
    CHECK(t.where("value", 2).size() == 1);
    CHECK_THROWS_AS(t.column("nope"), ConfigError);
}

TEST_CASE("report documents round-trip through disk") {
    ExperimentReport r;
    r.experiment = "demo";
    r.config = json{{"seed", 1}};
    r.tables.push_back(Table{"t", {"a"}, {{json(1.25)}}});
    r.failures = json::array({json{{"seed", 2}, {"stage", "training"}, {"kind", "training"}, {"message", "gate"}}});
    r.timestamp = "20260101T000000Z";
    r.checkpoints.emplace_back("x.mfckpt", "payload");
    TempDir tmp;
    const fs::path first = write_report(r, tmp.path);
    const fs::path second = write_report(r, tmp.path);
    CHECK(first != second);
    CHECK(fs::exists(first / "tables" / "t.csv"));
    CHECK(fs::exists(first / "checkpoints" / "x.mfckpt"));
    const ExperimentReport back = read_report(first);
    CHECK(back.body() == r.body());
    CHECK(back.meta() == r.meta());
    CHECK_THROWS_AS(ExperimentReport::from_document("{\"nobody\": 1}"), FormatError);
}

TEST_CASE("experiment registry and sweep grids") {
    CHECK(experiment_names().size() == 8);
    try {
        (void)run_experiment("tableau", tiny_config());
        FAIL("unknown experiment accepted");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("merge_grid") != std::string::npos);
    }
    const auto avg = avg_scale_grid(4);
    REQUIRE(avg.size() == 13);
    CHECK(avg.front() == 0.0);
    CHECK(avg[2] == 0.25);
    CHECK(avg.back() == 1.5);
    for (MergeMethod m : hp_methods()) {
        const SweepGrid g = hp_grid(m, 4);
        CHECK(g.lambdas.size() == 30);
        CHECK(g.lambdas.front() > 0.0);
        if (!g.secondary_name.empty()) CHECK(!g.secondary.empty());
    }
    CHECK(hp_grid(MergeMethod::TaskArithmetic, 4).lambdas.back() == doctest::Approx(1.0));
    CHECK(hp_grid(MergeMethod::Ties, 4).secondary_name == "topk");
    CHECK(hp_grid(MergeMethod::IsoCts, 4).secondary_name == "common_fraction");
    CHECK_THROWS_AS(hp_grid(MergeMethod::Averaging, 4), ConfigError);
}

TEST_CASE("merge_grid on a tiny suite") {
    const ExperimentReport r = run_experiment("merge_grid", tiny_config());
    CHECK(r.failures.empty());
    const Table& t = r.table("merge_grid");
    CHECK(t.rows.size() == 7 * 2 + 3);
    std::set<std::string> variants;
    for (const auto& row : t.rows) variants.insert(row[t.column("variant")].get<std::string>());
    CHECK(variants == std::set<std::string>{"baseline", "ri"});
    for (const auto* row : t.where("model", "Finetuned"))
        if ((*row)[t.column("variant")] == "baseline") CHECK((*row)[t.column("xi_total")].get<double>() == 0.0);
    CHECK(r.table("ri_traces").rows.size() == 4);
    // Two identical runs produce identical bodies.
    CHECK(run_experiment("merge_grid", tiny_config()).body() == r.body());
}

TEST_CASE("avg_scale_sweep: coefficient zero is the zero-shot model") {
    RunConfig cfg = tiny_config();
    const ExperimentReport r = run_experiment("avg_scale_sweep", cfg);
    const Table& t = r.table("avg_scale_sweep");
    const auto zs = t.where("model", "Zero-shot");
    REQUIRE(zs.size() == 1);
    int zeros = 0;
    for (const auto& row : t.rows) {
        const json& c = row[t.column("coefficient")];
        if (c.is_number() && c.get<double>() == 0.0) {
            CHECK(acc(t, row) == acc(t, *zs[0]));
            ++zeros;
        }
    }
    CHECK(zeros == 2);
}

TEST_CASE("trajectory snapshots every fifty steps") {
    RunConfig cfg = tiny_config();
    cfg.ri.steps = 100;
    const ExperimentReport r = run_experiment("trajectory", cfg);
    const Table& t = r.table("trajectory");
    std::vector<int> steps;
    for (const auto& row : t.rows) steps.push_back(row[t.column("step")].get<int>());
    CHECK(steps == std::vector<int>{0, 50, 100});
    CHECK(r.table("ri_steps").rows.size() == 4 * 100);
}

TEST_CASE("a failing seed is recorded, not thrown") {
    RunConfig cfg = tiny_config();
    cfg.train.accuracy_gate = 1.01;
    const ExperimentReport r = run_experiment("merge_grid", cfg);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0]["kind"] == "training");
}
