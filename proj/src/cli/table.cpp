#include "forward_yield/cli/table.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace forward_yield::cli {

void Table::add(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
        throw std::invalid_argument("table row has " + std::to_string(row.size()) +
                                    " cells, expected " + std::to_string(columns.size()));
    }
    rows.push_back(std::move(row));
}

std::string format_number(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        out += (i ? "," : "") + csv_field(t.columns[i]);
    }
    out += "\r\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) {
                out += ",";
            }
            if (const auto* d = std::get_if<double>(&row[i])) {
                out += format_number(*d);
            } else {
                out += csv_field(std::get<std::string>(row[i]));
            }
        }
        out += "\r\n";
    }
    return out;
}

std::string to_json(const Table& t) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (const auto* d = std::get_if<double>(&row[i])) {
                if (std::isfinite(*d)) {
                    obj[t.columns[i]] = std::stod(format_number(*d));
                } else {
                    obj[t.columns[i]] = format_number(*d);
                }
            } else {
                obj[t.columns[i]] = std::get<std::string>(row[i]);
            }
        }
        arr.push_back(std::move(obj));
    }
    return arr.dump(2) + "\n";
}

void emit_table(const Table& t, const std::string& format, const std::string& path) {
    if (format != "csv" && format != "json") {
        throw std::invalid_argument("output format must be csv or json (got " + format + ")");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write output file " + path);
    }
    out << (format == "csv" ? to_csv(t) : to_json(t));
    if (!out) {
        throw std::runtime_error("failed while writing " + path);
    }
}

}  // namespace forward_yield::cli
