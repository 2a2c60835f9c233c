#ifndef OTAFL_METRICS_HPP
#define OTAFL_METRICS_HPP

#include "otafl/data.hpp"
#include "otafl/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace otafl {

struct MetricsRow {
    std::string scheme;
    int round = 0;
    long t = 0;
    double mean_gap = 0.0;
    double stderr_gap = 0.0;
    double mean_power = 0.0;         // mean over trials of max_n ||x_t^n||^2
    double participants_mean = 0.0;
    long wait_count = 0;             // summed over trials

    bool operator==(const MetricsRow&) const = default;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;

    bool operator==(const MetricsTable&) const = default;

    std::vector<MetricsRow> for_scheme(const std::string& scheme) const {
        std::vector<MetricsRow> out;
        for (const auto& r : rows)
            if (r.scheme == scheme) out.push_back(r);
        return out;
    }
};

enum class ExportFormat { csv, json };

inline ExportFormat parse_export_format(const std::string& s) {
    if (s == "csv") return ExportFormat::csv;
    if (s == "json") return ExportFormat::json;
    throw ConfigError("unknown export format '" + s + "'");
}

inline constexpr const char* kMetricsHeader =
    "scheme,round,t,mean_gap,stderr,mean_power,participants_mean,wait_count";

inline void write_table(const MetricsTable& table, std::ostream& out, ExportFormat format) {
    using detail::format_double;
    if (format == ExportFormat::csv) {
        out << kMetricsHeader << '\n';
        for (const auto& r : table.rows)
            out << r.scheme << ',' << r.round << ',' << r.t << ',' << format_double(r.mean_gap) << ','
                << format_double(r.stderr_gap) << ',' << format_double(r.mean_power) << ','
                << format_double(r.participants_mean) << ',' << r.wait_count << '\n';
    } else {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : table.rows)
            arr.push_back({{"scheme", r.scheme},
                           {"round", r.round},
                           {"t", r.t},
                           {"mean_gap", r.mean_gap},
                           {"stderr", r.stderr_gap},
                           {"mean_power", r.mean_power},
                           {"participants_mean", r.participants_mean},
                           {"wait_count", r.wait_count}});
        out << arr.dump(1) << '\n';
    }
}

inline void export_table(const MetricsTable& table, const std::filesystem::path& path, ExportFormat format) {
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write metrics to '" + path.string() + "'");
    write_table(table, out, format);
    if (!out) throw RuntimeError("write failed for '" + path.string() + "'");
}

inline MetricsTable import_table(const std::filesystem::path& path, ExportFormat format) {
    std::ifstream in(path);
    if (!in) throw RuntimeError("cannot open metrics file '" + path.string() + "'");
    MetricsTable table;
    if (format == ExportFormat::json) {
        nlohmann::json arr;
        try {
            in >> arr;
            for (const auto& j : arr)
                table.rows.push_back({j.at("scheme").get<std::string>(), j.at("round").get<int>(),
                                      j.at("t").get<long>(), j.at("mean_gap").get<double>(),
                                      j.at("stderr").get<double>(), j.at("mean_power").get<double>(),
                                      j.at("participants_mean").get<double>(), j.at("wait_count").get<long>()});
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("metrics file '" + path.string() + "': " + e.what());
        }
        return table;
    }
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != kMetricsHeader)
        throw ConfigError("metrics file '" + path.string() + "' lacks the expected header");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.emplace_back(detail::trim(cell));
        if (f.size() != 8)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 8 columns");
        MetricsRow r;
        r.scheme = f[0];
        double v[4];
        for (int k = 0; k < 4; ++k)
            if (!detail::parse_double(f[static_cast<std::size_t>(3 + k)], v[k]))
                throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
        try {
            r.round = std::stoi(f[1]);
            r.t = std::stol(f[2]);
            r.wait_count = std::stol(f[7]);
        } catch (const std::exception&) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed integer");
        }
        r.mean_gap = v[0];
        r.stderr_gap = v[1];
        r.mean_power = v[2];
        r.participants_mean = v[3];
        table.rows.push_back(std::move(r));
    }
    return table;
}

}  // namespace otafl

#endif  // OTAFL_METRICS_HPP
