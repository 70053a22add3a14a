// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/harness/suite.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "mergelab/core/error.hpp"
#include "mergelab/core/prng.hpp"
#include "mergelab/model/params.hpp"

namespace mergelab {

using json = nlohmann::json;

json SuiteSpec::to_json() const {
    return json{{"input_dim", input_dim},
                {"classes", classes},
                {"tasks", tasks},
                {"sigma", sigma},
                {"mean_scale", mean_scale},
                {"train_per_class", train_per_class},
                {"eval_per_class", eval_per_class},
                {"seed", seed}};
}

SuiteSpec SuiteSpec::from_json(const json& j) {
    SuiteSpec s;
    try {
        s.input_dim = j.value("input_dim", s.input_dim);
        s.classes = j.value("classes", s.classes);
        s.tasks = j.value("tasks", s.tasks);
        s.sigma = j.value("sigma", s.sigma);
        s.mean_scale = j.value("mean_scale", s.mean_scale);
        s.train_per_class = j.value("train_per_class", s.train_per_class);
        s.eval_per_class = j.value("eval_per_class", s.eval_per_class);
        s.seed = j.value("seed", s.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid suite description: ") + e.what());
    }
    return s;
}

std::string SuiteSpec::id() const {
    const std::string text = to_json().dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) h = (h ^ c) * 1099511628211ull;
    char buf[64];
    std::snprintf(buf, sizeof buf, "suite-d%zu-k%zu-n%zu-%08x", input_dim, classes, tasks,
                  static_cast<unsigned>(h & 0xffffffffu));
    return buf;
}

std::vector<Tensor> TaskSuite::eval_inputs() const {
    std::vector<Tensor> xs;
    for (const auto& e : eval) xs.push_back(e.x);
    return xs;
}

namespace {

TaskData sample_task(const Tensor& means, const std::vector<std::size_t>& classes, std::size_t per_class,
                     double sigma, Prng& rng) {
    const std::size_t d = means.dim(1);
    TaskData t;
    std::vector<double> x;
    x.reserve(classes.size() * per_class * d);
    for (std::size_t local = 0; local < classes.size(); ++local) {
        for (std::size_t s = 0; s < per_class; ++s) {
            for (std::size_t k = 0; k < d; ++k) x.push_back(means.at(classes[local], k) + sigma * rng.gaussian());
            t.labels.push_back(local);
        }
    }
    t.x = Tensor({t.labels.size(), d}, std::move(x));
    return t;
}

} // namespace

TaskSuite gen_suite(const SuiteSpec& spec) {
    if (spec.tasks == 0 || spec.classes < 2 * spec.tasks) {
        throw ConfigError("cannot split " + std::to_string(spec.classes) + " classes into " +
                          std::to_string(spec.tasks) + " tasks of at least 2 classes");
    }
    if (spec.input_dim == 0 || spec.train_per_class == 0 || spec.eval_per_class == 0) {
        throw ConfigError("suite needs a positive input dimension and sample counts");
    }
    if (!(spec.sigma > 0.0) || !(spec.mean_scale > 0.0)) throw ConfigError("suite sigma and mean_scale must be positive");

    const Prng root(spec.seed);
    TaskSuite suite;
    suite.spec = spec;
    Prng mean_rng = root.split("suite-means");
    suite.means = spec.mean_scale * prng_gaussian(mean_rng, {spec.classes, spec.input_dim});

    std::vector<std::size_t> order(spec.classes);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Prng perm_rng = root.split("suite-partition");
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[perm_rng.below(i)]);
    std::size_t at = 0;
    for (std::size_t t = 0; t < spec.tasks; ++t) {
        const std::size_t size = spec.classes / spec.tasks + (t < spec.classes % spec.tasks ? 1 : 0);
        std::vector<std::size_t> part(order.begin() + static_cast<std::ptrdiff_t>(at),
                                      order.begin() + static_cast<std::ptrdiff_t>(at + size));
        std::sort(part.begin(), part.end());
        suite.partition.push_back(std::move(part));
        at += size;
    }

    for (std::size_t t = 0; t < spec.tasks; ++t) {
        Prng train_rng = root.split("suite-train", t);
        Prng eval_rng = root.split("suite-eval", t);
        suite.train.push_back(sample_task(suite.means, suite.partition[t], spec.train_per_class, spec.sigma, train_rng));
        suite.eval.push_back(sample_task(suite.means, suite.partition[t], spec.eval_per_class, spec.sigma, eval_rng));
    }
    return suite;
}

TaskSuite suite_from_descriptor(const std::string& descriptor) {
    json j;
    try {
        j = json::parse(descriptor);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("unreadable suite descriptor: ") + e.what());
    }
    return gen_suite(SuiteSpec::from_json(j));
}

} // namespace mergelab
