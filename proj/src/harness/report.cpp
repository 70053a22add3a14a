// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#include "mergelab/harness/report.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <utility>

#include "mergelab/core/error.hpp"

namespace mergelab {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string csv_cell(const json& v) {
    if (v.is_string()) {
        const std::string& s = v.get_ref<const std::string&>();
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string quoted = "\"";
        for (char c : s) {
            if (c == '"') quoted += '"';
            quoted += c;
        }
        return quoted + "\"";
    }
    if (v.is_null()) return "";
    return v.dump();
}

std::string text_cell(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
        return buf;
    }
    if (v.is_null()) return "-";
    return v.dump();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << text;
    if (!out) throw FormatError("failed writing " + path.string());
}

} // namespace

void Table::add(std::vector<json> row) {
    if (row.size() != columns.size()) {
        throw DimensionError("table " + name + ": row of " + std::to_string(row.size()) + " cells for " +
                             std::to_string(columns.size()) + " columns");
    }
    rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& col) const {
    const auto it = std::find(columns.begin(), columns.end(), col);
    if (it == columns.end()) throw ConfigError("table " + name + " has no column '" + col + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

std::vector<const std::vector<json>*> Table::where(const std::string& col, const json& value) const {
    const std::size_t c = column(col);
    std::vector<const std::vector<json>*> out;
    for (const auto& r : rows)
        if (r[c] == value) out.push_back(&r);
    return out;
}

std::string Table::csv() const {
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + csv_cell(columns[c]);
    out += '\n';
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + csv_cell(r[c]);
        out += '\n';
    }
    return out;
}

std::string Table::text() const {
    std::vector<std::size_t> width(columns.size());
    std::vector<std::vector<std::string>> cells;
    for (std::size_t c = 0; c < columns.size(); ++c) width[c] = columns[c].size();
    for (const auto& r : rows) {
        std::vector<std::string> line;
        for (std::size_t c = 0; c < r.size(); ++c) {
            line.push_back(text_cell(r[c]));
            width[c] = std::max(width[c], line.back().size());
        }
        cells.push_back(std::move(line));
    }
    std::ostringstream os;
    os << "== " << name << " ==\n";
    auto emit = [&](const std::vector<std::string>& line) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            os << (c ? "  " : "");
            os << line[c] << std::string(width[c] - line[c].size(), ' ');
        }
        os << '\n';
    };
    emit(columns);
    for (const auto& line : cells) emit(line);
    return os.str();
}

json Table::to_json() const {
    return json{{"name", name}, {"columns", columns}, {"rows", rows}};
}

Table Table::from_json(const json& j) {
    Table t;
    try {
        t.name = j.at("name").get<std::string>();
        t.columns = j.at("columns").get<std::vector<std::string>>();
        for (const auto& r : j.at("rows")) t.add(r.get<std::vector<json>>());
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed report table: ") + e.what());
    } catch (const DimensionError& e) {
        throw FormatError(e.what());
    }
    return t;
}

const Table& ExperimentReport::table(const std::string& name) const {
    for (const auto& t : tables)
        if (t.name == name) return t;
    throw ConfigError("report " + experiment + " has no table '" + name + "'");
}

Table& ExperimentReport::table(const std::string& name) {
    return const_cast<Table&>(std::as_const(*this).table(name));
}

json ExperimentReport::body() const {
    json tables_json = json::array();
    for (const auto& t : tables) tables_json.push_back(t.to_json());
    json ckpts = json::array();
    for (const auto& [file, _] : checkpoints) ckpts.push_back(file);
    return json{{"experiment", experiment}, {"config", config},     {"tables", tables_json},
                {"details", details},       {"failures", failures}, {"checkpoints", ckpts}};
}

json ExperimentReport::meta() const {
    return json{{"timestamp", timestamp}, {"wall_seconds", wall_seconds}, {"timings", timings}};
}

std::string ExperimentReport::document() const {
    return json{{"body", body()}, {"meta", meta()}}.dump(2) + "\n";
}

ExperimentReport ExperimentReport::from_document(const std::string& text) {
    const json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("body")) {
        throw FormatError("not an experiment report document");
    }
    ExperimentReport r;
    try {
        const json& b = doc.at("body");
        r.experiment = b.at("experiment").get<std::string>();
        r.config = b.at("config");
        for (const auto& t : b.at("tables")) r.tables.push_back(Table::from_json(t));
        r.details = b.value("details", json::object());
        r.failures = b.value("failures", json::array());
        for (const auto& f : b.value("checkpoints", json::array())) r.checkpoints.emplace_back(f.get<std::string>(), "");
        if (doc.contains("meta")) {
            const json& m = doc.at("meta");
            r.timestamp = m.value("timestamp", "");
            r.wall_seconds = m.value("wall_seconds", 0.0);
            r.timings = m.value("timings", json::object());
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed experiment report: ") + e.what());
    }
    return r;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

void write_tables(const ExperimentReport& report, const fs::path& run_dir) {
    fs::create_directories(run_dir / "tables");
    for (const auto& t : report.tables) write_file(run_dir / "tables" / (t.name + ".csv"), t.csv());
}

fs::path write_report(const ExperimentReport& report, const fs::path& out_dir) {
    const std::string stamp = report.timestamp.empty() ? utc_timestamp() : report.timestamp;
    const fs::path base = out_dir / report.experiment;
    fs::create_directories(base);
    fs::path run = base / stamp;
    for (int k = 2; fs::exists(run); ++k) run = base / (stamp + "-" + std::to_string(k));
    fs::create_directories(run);
    write_file(run / "report.txt", report.document());
    write_tables(report, run);
    if (!report.checkpoints.empty()) {
        fs::create_directories(run / "checkpoints");
        for (const auto& [file, text] : report.checkpoints) write_file(run / "checkpoints" / file, text);
    }
    return run;
}

ExperimentReport read_report(const fs::path& path) {
    const fs::path file = fs::is_directory(path) ? path / "report.txt" : path;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot open report " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ExperimentReport::from_document(ss.str());
}

} // namespace mergelab
