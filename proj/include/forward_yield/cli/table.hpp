#pragma once

#include <string>
#include <variant>
#include <vector>

namespace forward_yield::cli {

using Cell = std::variant<double, std::string>;

/// Homogeneous rows under fixed column names.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row);
};

/// 12 significant digits, the representation shared by both output formats.
std::string format_number(double x);

/// RFC 4180 field quoting.
std::string csv_field(const std::string& s);

std::string to_csv(const Table& t);
/// Array of objects; numbers are the parsed 12-digit representations.
std::string to_json(const Table& t);

/// Writes CSV or JSON ("csv" | "json"); throws std::runtime_error when the
/// path cannot be written.
void emit_table(const Table& t, const std::string& format, const std::string& path);

}  // namespace forward_yield::cli
