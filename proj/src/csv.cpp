#include "tlbench/csv.hpp"

#include "tlbench/errors.hpp"

#include <fstream>
#include <sstream>

namespace tlbench::csv {

Table parse(const std::string& text) {
    Table table;
    Row current;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    bool header_done = false;

    auto end_field = [&] {
        current.push_back(field);
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        if (!header_done) {
            table.header = std::move(current);
            header_done = true;
        } else {
            table.rows.push_back(std::move(current));
        }
        current = Row{};
        row_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
        case '"':
            in_quotes = true;
            row_started = true;
            break;
        case ',':
            end_field();
            row_started = true;
            break;
        case '\r':
            break;
        case '\n':
            if (row_started || !field.empty() || !current.empty()) end_row();
            break;
        default:
            field.push_back(ch);
            row_started = true;
            break;
        }
    }
    if (row_started || !field.empty() || !current.empty()) end_row();
    return table;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open CSV file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string escape_field(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out += "\"";
    return out;
}

std::string format_row(const Row& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.push_back(',');
        out += escape_field(row[i]);
    }
    out.push_back('\n');
    return out;
}

void write_file(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write CSV file: " + path);
    out << format_row(table.header);
    for (const auto& row : table.rows) out << format_row(row);
    if (!out) throw IoError("short write on CSV file: " + path);
}

} // namespace tlbench::csv
