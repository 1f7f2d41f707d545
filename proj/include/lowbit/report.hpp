#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace lowbit {

using Json = nlohmann::ordered_json;

/// Result of one seeded experiment. Keys keep insertion order, so the same
/// (config, seed) always serializes to the same bytes.
struct ExperimentReport {
    std::string name;
    std::uint64_t seed = 0;
    Json config = Json::object();
    /// CSV header; each row is an object keyed by these columns.
    std::vector<std::string> columns;
    std::vector<Json> rows;
    Json metrics = Json::object();

    Json to_json() const;
    std::string to_csv() const;
};

enum class OutputFormat { Json, Csv };

OutputFormat format_from_string(const std::string& name);

/// `{name}-{seed}.{json,csv}`
std::string report_filename(const ExperimentReport& report, OutputFormat format);

/// Writes through a temporary file in the same directory followed by a rename,
/// so readers never observe a partial report. Returns the final path.
std::filesystem::path write_report(const ExperimentReport& report, const std::filesystem::path& directory,
                                   OutputFormat format);

void write_atomically(const std::filesystem::path& path, const std::string& contents);

} // namespace lowbit
