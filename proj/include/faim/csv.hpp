#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "faim/errors.hpp"

namespace faim::csv {

// Minimal RFC-4180-style reader: comma delimited, double quotes with ""
// escapes, one record per line. Embedded newlines inside quotes are not
// supported.
inline std::vector<std::string> split_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted)
        throw data_error("line " + std::to_string(line_no) + ": unterminated quote");
    fields.push_back(field);
    return fields;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows; // rows[i] corresponds to file line i + 2

    /// Index of a named column; throws naming the column when absent.
    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw data_error("missing column '" + name + "'");
    }

    bool has_column(const std::string& name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }
};

inline Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open file '" + path + "'");
    Table table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            table.header = split_line(line, line_no);
            continue;
        }
        if (line.empty()) continue;
        auto fields = split_line(line, line_no);
        if (fields.size() != table.header.size())
            throw data_error("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(table.header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
    }
    if (table.header.empty()) throw data_error("empty file '" + path + "'");
    return table;
}

inline std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += '"';
    return out;
}

} // namespace faim::csv
