#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "berndesign/errors.hpp"

// Small CSV layer. Headers are required everywhere; floats are written with 17
// significant digits so a read-back is bit-identical.

namespace berndesign::csv {

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
        --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline double parse_double(const std::string& s) {
    double value = 0.0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw io_error("cannot parse number: '" + s + "'");
    return value;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    Table table;
    std::string line;
    if (!std::getline(in, line)) throw io_error(path + ": missing header row");
    table.header = split_fields(line);
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        table.rows.push_back(split_fields(line));
        if (table.rows.back().size() != table.header.size())
            throw io_error(path + ": row has " +
                           std::to_string(table.rows.back().size()) +
                           " fields, header has " +
                           std::to_string(table.header.size()));
    }
    return table;
}

/// Reads a single-column CSV whose header must equal `name`.
inline std::vector<double> read_column(const std::string& path,
                                       const std::string& name) {
    const Table table = read_table(path);
    if (table.header.size() != 1 || table.header[0] != name)
        throw io_error(path + ": expected a single column named '" + name +
                       "'");
    std::vector<double> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) out.push_back(parse_double(row[0]));
    return out;
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path) {
        if (!out_) throw io_error("cannot write " + path);
        path_ = path;
    }

    void header(const std::vector<std::string>& names) { line(names); }

    void line(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i > 0) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
        if (!out_) throw io_error("write failed: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

}  // namespace berndesign::csv
