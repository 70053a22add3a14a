// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mergelab {

/// Flat table; cells are JSON numbers, strings or booleans.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<nlohmann::json>> rows;

    void add(std::vector<nlohmann::json> row);
    std::size_t column(const std::string& name) const;
    /// Rows whose `column` cell equals `value`.
    std::vector<const std::vector<nlohmann::json>*> where(const std::string& column, const nlohmann::json& value) const;

    std::string csv() const;
    /// Fixed-width rendering for terminals.
    std::string text() const;

    nlohmann::json to_json() const;
    static Table from_json(const nlohmann::json& j);
};

struct ExperimentReport {
    std::string experiment;
    nlohmann::json config = nlohmann::json::object();
    std::vector<Table> tables;
    /// Free-form structured results (interference reports, trace summaries...).
    nlohmann::json details = nlohmann::json::object();
    /// Sub-runs that failed: {"seed", "stage", "kind", "message"}.
    nlohmann::json failures = nlohmann::json::array();

    // Not part of the deterministic body.
    std::string timestamp;
    double wall_seconds = 0.0;
    nlohmann::json timings = nlohmann::json::object();
    /// (file name, .mfckpt text) written under checkpoints/.
    std::vector<std::pair<std::string, std::string>> checkpoints;

    const Table& table(const std::string& name) const;
    Table& table(const std::string& name);

    /// Everything determined by (config, seed).
    nlohmann::json body() const;
    nlohmann::json meta() const;
    /// Canonical document: {"body": ..., "meta": ...}, sorted keys, two-space indent.
    std::string document() const;
    static ExperimentReport from_document(const std::string& text);
};

/// Writes out_dir/<experiment>/<timestamp>/{report.txt, tables/*.csv,
/// checkpoints/*.mfckpt} and returns the run directory. A numeric suffix keeps
/// runs started within the same second apart.
std::filesystem::path write_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

/// Loads a report from a run directory or a report.txt path.
ExperimentReport read_report(const std::filesystem::path& path);

/// (Re)writes tables/*.csv under `run_dir` from the stored report.
void write_tables(const ExperimentReport& report, const std::filesystem::path& run_dir);

/// UTC time as YYYYMMDDTHHMMSSZ.
std::string utc_timestamp();

} // namespace mergelab
