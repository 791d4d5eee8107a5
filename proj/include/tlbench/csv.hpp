#pragma once

#include <string>
#include <vector>

namespace tlbench::csv {

/// One parsed row; fields are unquoted/unescaped.
using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;
};

/// RFC-4180-ish: quoted fields, doubled quotes, embedded commas/newlines.
Table read_file(const std::string& path);
Table parse(const std::string& text);

std::string escape_field(const std::string& field);
std::string format_row(const Row& row);
void write_file(const std::string& path, const Table& table);

} // namespace tlbench::csv
