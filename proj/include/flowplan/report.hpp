#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "flowplan/binio.hpp"

// Tabular metric reports. JSON carries full-precision doubles (round-trip
// exact), CSV is rendered at 6 significant digits. Column sets are fixed per
// report kind so reruns always emit the same schema.

namespace flowplan {

struct MetricReport {
    std::string kind;
    std::vector<std::string> columns;
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    std::map<std::string, std::string> metadata;

    void add_row(const std::string& name, std::vector<double> values) {
        if (values.size() != columns.size()) {
            throw std::invalid_argument("report: row '" + name + "' has " + std::to_string(values.size()) +
                                        " values for " + std::to_string(columns.size()) + " columns");
        }
        rows.emplace_back(name, std::move(values));
    }

    double value(const std::string& row, const std::string& column) const {
        for (const auto& [name, values] : rows) {
            if (name != row) continue;
            for (std::size_t i = 0; i < columns.size(); ++i) {
                if (columns[i] == column) return values[i];
            }
        }
        throw std::invalid_argument("report: no cell (" + row + ", " + column + ")");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["kind"] = kind;
        j["metadata"] = metadata;
        j["columns"] = columns;
        nlohmann::json jrows = nlohmann::json::array();
        for (const auto& [name, values] : rows) {
            nlohmann::json r;
            r["name"] = name;
            r["values"] = values;
            jrows.push_back(std::move(r));
        }
        j["rows"] = jrows;
        return j;
    }

    static MetricReport from_json(const nlohmann::json& j) {
        MetricReport r;
        r.kind = j.at("kind").get<std::string>();
        r.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
        r.columns = j.at("columns").get<std::vector<std::string>>();
        for (const auto& row : j.at("rows")) {
            r.rows.emplace_back(row.at("name").get<std::string>(), row.at("values").get<std::vector<double>>());
        }
        return r;
    }

    std::string to_csv() const {
        std::string out = "row";
        for (const auto& c : columns) out += "," + c;
        out += "\n";
        char buf[64];
        for (const auto& [name, values] : rows) {
            out += name;
            for (double v : values) {
                std::snprintf(buf, sizeof(buf), "%.6g", v);
                out += ",";
                out += buf;
            }
            out += "\n";
        }
        return out;
    }

    void write(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        std::ofstream jf(dir / "report.json");
        if (!jf) throw std::runtime_error("report: cannot write " + (dir / "report.json").string());
        jf << to_json().dump(2) << "\n";
        std::ofstream cf(dir / "report.csv");
        if (!cf) throw std::runtime_error("report: cannot write " + (dir / "report.csv").string());
        cf << to_csv();
    }
};

// Deterministic run identifier: hash of the subcommand and canonical config.
inline std::string run_id(const std::string& subcommand, const std::string& canonical_config) {
    return hex64(fnv1a64_str(canonical_config, fnv1a64_str(subcommand))).substr(0, 12);
}

}  // namespace flowplan
