#include "lowbit/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace lowbit {

namespace {

std::string csv_cell(const Json& value) {
    if (value.is_null()) {
        return "";
    }
    if (value.is_string()) {
        const auto& s = value.get_ref<const std::string&>();
        if (s.find_first_of(",\"\n") == std::string::npos) {
            return s;
        }
        std::string quoted = "\"";
        for (char c : s) {
            if (c == '"') {
                quoted += '"';
            }
            quoted += c;
        }
        return quoted + '"';
    }
    if (value.is_boolean()) {
        return value.get<bool>() ? "true" : "false";
    }
    if (value.is_number_float()) {
        char buffer[32];
        std::snprintf(buffer, sizeof buffer, "%.17g", value.get<double>());
        return buffer;
    }
    return value.dump();
}

} // namespace

Json ExperimentReport::to_json() const {
    Json out;
    out["name"] = name;
    out["seed"] = seed;
    out["config"] = config;
    out["metrics"] = metrics;
    out["columns"] = columns;
    out["rows"] = rows;
    return out;
}

std::string ExperimentReport::to_csv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        out << (i ? "," : "") << columns[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            out << (i ? "," : "") << csv_cell(row.contains(columns[i]) ? row[columns[i]] : Json());
        }
        out << '\n';
    }
    return out.str();
}

OutputFormat format_from_string(const std::string& name) {
    if (name == "json") {
        return OutputFormat::Json;
    }
    if (name == "csv") {
        return OutputFormat::Csv;
    }
    throw std::invalid_argument("unknown output format '" + name + "' (expected json or csv)");
}

std::string report_filename(const ExperimentReport& report, OutputFormat format) {
    return report.name + "-" + std::to_string(report.seed) + (format == OutputFormat::Json ? ".json" : ".csv");
}

void write_atomically(const std::filesystem::path& path, const std::string& contents) {
    auto temp = path;
    temp += ".tmp";
    {
        std::ofstream file(temp, std::ios::binary | std::ios::trunc);
        if (!file) {
            throw std::runtime_error("cannot open " + temp.string() + " for writing");
        }
        file << contents;
        file.flush();
        if (!file) {
            throw std::runtime_error("failed writing " + temp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(temp, path, ec);
    if (ec) {
        std::filesystem::remove(temp);
        throw std::runtime_error("cannot move report into place at " + path.string() + ": " + ec.message());
    }
}

std::filesystem::path write_report(const ExperimentReport& report, const std::filesystem::path& directory,
                                   OutputFormat format) {
    std::filesystem::create_directories(directory);
    const auto path = directory / report_filename(report, format);
    write_atomically(path, format == OutputFormat::Json ? report.to_json().dump(2) + "\n" : report.to_csv());
    return path;
}

} // namespace lowbit
