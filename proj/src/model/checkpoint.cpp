// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/model/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mergelab/core/error.hpp"

namespace mergelab {

using json = nlohmann::json;

std::string exact_decimal(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_exact_decimal(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError("malformed checkpoint value '" + s + "'");
    }
    return v;
}

namespace {

json tensor_record(const std::string& name, const Tensor& t) {
    json values = json::array();
    for (double v : t.values()) values.push_back(exact_decimal(v));
    return json{{"name", name}, {"shape", t.shape()}, {"values", std::move(values)}};
}

Tensor tensor_from_record(const json& rec) {
    Shape shape = rec.at("shape").get<Shape>();
    std::vector<double> values;
    for (const auto& v : rec.at("values")) values.push_back(parse_exact_decimal(v.get<std::string>()));
    try {
        return Tensor(std::move(shape), std::move(values));
    } catch (const DimensionError& e) {
        throw ValidationError("checkpoint tensor '" + rec.at("name").get<std::string>() + "': " + e.what());
    } catch (const NumericError& e) {
        throw ValidationError("checkpoint tensor '" + rec.at("name").get<std::string>() + "': " + e.what());
    }
}

std::string render(const json& header, const std::vector<json>& records) {
    std::string out = header.dump() + "\n";
    for (const auto& r : records) out += r.dump() + "\n";
    return out;
}

} // namespace

std::string checkpoint_text(const ExpertBundle& bundle) {
    bundle.validate();
    std::vector<json> records;
    for (const auto& [name, t] : bundle.theta0.tensors()) records.push_back(tensor_record("theta0/" + name, t));
    for (std::size_t i = 0; i < bundle.tasks(); ++i) {
        const std::string tag = std::to_string(i);
        for (const auto& [name, t] : bundle.vectors[i].delta.tensors())
            records.push_back(tensor_record("tau/" + tag + "/" + name, t));
        records.push_back(tensor_record("head/" + tag + "/weight", bundle.heads[i].weight));
        records.push_back(tensor_record("head/" + tag + "/bias", bundle.heads[i].bias));
    }
    json head_tasks = json::array();
    for (const auto& h : bundle.heads) head_tasks.push_back(h.task);
    const json header = {
        {"format", "mfckpt"},
        {"version", kCheckpointVersion},
        {"kind", "bundle"},
        {"arch", infer_arch(bundle.theta0).id()},
        {"suite", bundle.suite_id},
        {"suite_descriptor", bundle.suite_descriptor},
        {"origin", fingerprint_hex(bundle.theta0.fingerprint())},
        {"tasks", bundle.tasks()},
        {"head_tasks", head_tasks},
        {"tensors", records.size()},
    };
    return render(header, records);
}

std::string checkpoint_text(const ParamSet& params, const std::string& suite_id) {
    std::vector<json> records;
    for (const auto& [name, t] : params.tensors()) records.push_back(tensor_record(name, t));
    const json header = {
        {"format", "mfckpt"},          {"version", kCheckpointVersion}, {"kind", "params"},
        {"arch", infer_arch(params).id()}, {"suite", suite_id},          {"tensors", records.size()},
    };
    return render(header, records);
}

Checkpoint parse_checkpoint(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto parse_line = [](const std::string& l, std::size_t lineno) {
        try {
            return json::parse(l);
        } catch (const json::parse_error& e) {
            throw FormatError("malformed checkpoint at line " + std::to_string(lineno) + ": " + e.what());
        }
    };
    if (!std::getline(in, line)) throw FormatError("malformed checkpoint: empty file");
    const json header = parse_line(line, 1);
    try {
        if (header.at("format") != "mfckpt") throw FormatError("not an mfckpt file");
        const int version = header.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw FormatError("unsupported mfckpt version " + std::to_string(version) + " (this build reads " +
                              std::to_string(kCheckpointVersion) + ")");
        }
        const auto count = header.at("tensors").get<std::size_t>();
        std::map<std::string, Tensor> tensors;
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const json rec = parse_line(line, lineno);
            const auto name = rec.at("name").get<std::string>();
            if (!tensors.emplace(name, tensor_from_record(rec)).second) {
                throw ValidationError("duplicate tensor '" + name + "' in checkpoint");
            }
        }
        if (tensors.size() != count) {
            throw FormatError("malformed checkpoint: header announces " + std::to_string(count) + " tensors, found " +
                              std::to_string(tensors.size()) + " (truncated file?)");
        }
        if (!text.empty() && text.back() != '\n') throw FormatError("malformed checkpoint: truncated last record");

        Checkpoint ck;
        ck.kind = header.at("kind").get<std::string>();
        ck.suite_id = header.at("suite").get<std::string>();
        const BackboneArch arch = BackboneArch::parse(header.at("arch").get<std::string>());
        if (ck.kind == "params") {
            ck.params = ParamSet(std::move(tensors));
            require_arch(*ck.params, arch);
            return ck;
        }
        if (ck.kind != "bundle") throw FormatError("unknown checkpoint kind '" + ck.kind + "'");

        auto take = [&](const std::string& name) {
            auto it = tensors.find(name);
            if (it == tensors.end()) throw ValidationError("checkpoint is missing tensor '" + name + "'");
            Tensor t = std::move(it->second);
            tensors.erase(it);
            return t;
        };
        ExpertBundle b;
        b.suite_id = ck.suite_id;
        b.suite_descriptor = header.at("suite_descriptor").get<std::string>();
        const std::string names[] = {param_names::kB1, param_names::kB2, param_names::kW1, param_names::kW2};
        for (const auto& n : names) b.theta0.set(n, take("theta0/" + n));
        require_arch(b.theta0, arch);
        const std::uint64_t fp = b.theta0.fingerprint();
        if (fingerprint_hex(fp) != header.at("origin").get<std::string>()) {
            throw ValidationError("checkpoint origin fingerprint does not match its shared initialization");
        }
        const auto tasks = header.at("tasks").get<std::size_t>();
        const auto head_tasks = header.at("head_tasks").get<std::vector<std::size_t>>();
        if (head_tasks.size() != tasks) throw ValidationError("head_tasks length does not match task count");
        for (std::size_t i = 0; i < tasks; ++i) {
            const std::string tag = std::to_string(i);
            TaskVector tv{ParamSet{}, fp};
            for (const auto& n : names) tv.delta.set(n, take("tau/" + tag + "/" + n));
            b.vectors.push_back(std::move(tv));
            b.heads.push_back(TaskHead{head_tasks[i], take("head/" + tag + "/weight"), take("head/" + tag + "/bias")});
        }
        if (!tensors.empty()) throw ValidationError("unexpected tensor '" + tensors.begin()->first + "' in bundle");
        try {
            b.validate();
        } catch (const DimensionError& e) {
            throw ValidationError(std::string("checkpoint bundle: ") + e.what());
        }
        ck.bundle = std::move(b);
        return ck;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    }
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const ExpertBundle& bundle) {
    write_text(path, checkpoint_text(bundle));
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params, const std::string& suite_id) {
    write_text(path, checkpoint_text(params, suite_id));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_checkpoint(ss.str());
}

ExpertBundle load_bundle(const std::filesystem::path& path) {
    Checkpoint ck = load_checkpoint(path);
    if (!ck.bundle) throw FormatError("'" + path.string() + "' holds a parameter set, not an expert bundle");
    return std::move(*ck.bundle);
}

ParamSet load_params(const std::filesystem::path& path) {
    Checkpoint ck = load_checkpoint(path);
    if (!ck.params) throw FormatError("'" + path.string() + "' holds an expert bundle, not a parameter set");
    return std::move(*ck.params);
}

} // namespace mergelab
