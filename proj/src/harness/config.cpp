// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mergelab/core/error.hpp"

namespace mergelab {

using json = nlohmann::json;

json ri_config_to_json(const RiConfig& c) {
    return json{{"alpha", c.alpha},
                {"metric", metric_id(c.metric)},
                {"steps", c.steps},
                {"batch_size", c.batch_size},
                {"learning_rate", c.learning_rate},
                {"weight_decay", c.weight_decay},
                {"optimizer", autodiff::mode_name(c.optimizer)},
                {"early_stop", c.early_stop},
                {"snapshot_every", c.snapshot_every},
                {"aux_source", c.aux_source},
                {"seed", c.seed}};
}

RiConfig ri_config_from_json(const json& j) {
    RiConfig c;
    try {
        c.alpha = j.value("alpha", c.alpha);
        if (j.contains("metric")) c.metric = parse_metric(j.at("metric").get<std::string>());
        c.steps = j.value("steps", c.steps);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        if (j.contains("optimizer")) c.optimizer = autodiff::parse_optimizer_mode(j.at("optimizer").get<std::string>());
        c.early_stop = j.value("early_stop", c.early_stop);
        c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
        c.aux_source = j.value("aux_source", c.aux_source);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid RI configuration: ") + e.what());
    }
    c.validate();
    return c;
}

json merge_config_to_json(const MergeConfig& c) {
    json j{{"method", method_id(c.method)}, {"literal", c.literal}};
    if (c.lambda) j["lambda"] = *c.lambda;
    if (c.topk) j["topk"] = *c.topk;
    if (c.common_fraction) j["common_fraction"] = *c.common_fraction;
    if (c.tasks) j["tasks"] = c.tasks;
    return j;
}

MergeConfig merge_config_from_json(const json& j) {
    MergeConfig c;
    try {
        if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
        if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
        if (j.contains("topk")) c.topk = j.at("topk").get<double>();
        if (j.contains("common_fraction")) c.common_fraction = j.at("common_fraction").get<double>();
        c.tasks = j.value("tasks", c.tasks);
        c.literal = j.value("literal", c.literal);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid merge configuration: ") + e.what());
    }
    return c;
}

std::vector<std::uint64_t> RunConfig::seed_list() const {
    return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
}

std::vector<MergeMethod> RunConfig::method_list() const {
    return methods.empty() ? all_methods() : methods;
}

SuiteSpec RunConfig::suite_for(std::uint64_t s) const {
    SuiteSpec out = suite;
    out.seed = s;
    return out;
}

TrainConfig RunConfig::train_for(std::uint64_t s) const {
    TrainConfig out = train;
    out.seed = s;
    return out;
}

RiConfig RunConfig::ri_for(std::uint64_t s) const {
    RiConfig out = ri;
    out.seed = s;
    out.aux_source = std::string(aux_kind_id(aux.kind));
    return out;
}

AuxSpec RunConfig::aux_for(std::uint64_t s) const {
    AuxSpec out = aux;
    out.seed = s;
    return out;
}

json RunConfig::to_json() const {
    json methods_json = json::array();
    for (auto m : methods) methods_json.push_back(method_id(m));
    json suite_json = suite.to_json(), train_json = train.to_json(), ri_json = ri_config_to_json(ri),
         aux_json = aux.to_json();
    // Per-run seeds come from `seeds`; the nested fields would only mislead.
    for (json* part : {&suite_json, &train_json, &ri_json, &aux_json}) part->erase("seed");
    ri_json.erase("aux_source");
    return json{{"seed", seed},
                {"seeds", seed_list()},
                {"methods", methods_json},
                {"out_dir", out_dir},
                {"jobs", jobs},
                {"save_checkpoints", save_checkpoints},
                {"suite", suite_json},
                {"train", train_json},
                {"ri", ri_json},
                {"aux", aux_json},
                {"merge", merge_config_to_json(merge)}};
}

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    static const std::vector<std::string> known = {"seed",  "seeds", "methods", "out_dir", "jobs", "save_checkpoints",
                                                   "suite", "train", "ri",      "aux",     "merge"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            std::string list;
            for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
            throw ConfigError("unknown configuration key '" + key + "' (known: " + list + ")");
        }
    }
    RunConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.seeds = j.value("seeds", c.seeds);
        if (j.contains("methods"))
            for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
        c.out_dir = j.value("out_dir", c.out_dir);
        c.jobs = j.value("jobs", c.jobs);
        c.save_checkpoints = j.value("save_checkpoints", c.save_checkpoints);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    if (c.jobs < 0) throw ConfigError("jobs must be >= 0");
    if (j.contains("suite")) c.suite = SuiteSpec::from_json(j.at("suite"));
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("ri")) c.ri = ri_config_from_json(j.at("ri"));
    if (j.contains("aux")) c.aux = AuxSpec::from_json(j.at("aux"));
    if (j.contains("merge")) c.merge = merge_config_from_json(j.at("merge"));
    return c;
}

json read_config_document(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        json doc = json::parse(ss.str(), nullptr, true, true);
        if (!doc.is_object()) throw ConfigError("config file " + path.string() + " must hold a JSON object");
        return doc;
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
}

void apply_override(json& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override '" + std::string(assignment) + "' is not of the form key.path=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

} // namespace mergelab
