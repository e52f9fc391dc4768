#pragma once

#include "nldiag/homotopy.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace nldiag {

inline constexpr const char* kToolVersion = "1.0.0";

/// Shortest round-trip text for a double (17 significant digits).
std::string format_number(double value);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json config = nlohmann::json::object();
    std::map<std::string, std::string> input_digests;
    std::string version = kToolVersion;
};

nlohmann::json to_json(const RunManifest& manifest);
nlohmann::json to_json(const StepperConfig& config);

/// Writes steps.csv, eigs.csv, anomalies.csv, localization.csv and crossings.csv.
void write_run_reports(const std::filesystem::path& dir, const RunReport& report);

/// Writes grid.csv with one row per sweep cell.
void write_grid(const std::filesystem::path& dir, const std::vector<SweepCell>& cells);

/// Writes eigenvalues as re,im rows.
void write_spectrum(const std::filesystem::path& file, const std::vector<Complex>& eigenvalues);

/// Writes manifest.json, replacing any earlier manifest in dir.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

}  // namespace nldiag
