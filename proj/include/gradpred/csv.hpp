#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gradpred/errors.hpp"

namespace gradpred::csv {

struct Record {
    std::size_t line = 0;  // 1-based line number in the source
    std::vector<std::string> fields;
};

/// Splits one line, honouring RFC 4180 double-quote escaping.
inline std::vector<std::string> split_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
        } else if (c == '"' && cur.empty() && !was_quoted) {
            quoted = was_quoted = true;
        } else {
            cur += c;
        }
    }
    if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quoted field");
    out.push_back(std::move(cur));
    return out;
}

/// Reads a header-led CSV and checks the header matches `expected` exactly.
inline std::vector<Record> read(std::istream& in, const std::vector<std::string>& expected,
                                const std::string& source) {
    std::vector<Record> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header_seen) {
            if (!line.empty() && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            auto header = split_line(line, line_no);
            if (header != expected) {
                std::string want;
                for (std::size_t i = 0; i < expected.size(); ++i) want += (i ? "," : "") + expected[i];
                throw DataError(source + ": unexpected header (expected '" + want + "')");
            }
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;
        auto fields = split_line(line, line_no);
        if (fields.size() != expected.size())
            throw DataError(source + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(expected.size()) + " fields, found " +
                            std::to_string(fields.size()));
        rows.push_back({line_no, std::move(fields)});
    }
    if (!header_seen) throw DataError(source + ": empty file, missing header");
    return rows;
}

inline std::vector<Record> read_file(const std::string& path, const std::vector<std::string>& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read(in, expected, path);
}

/// Reads any header, returning it alongside the records.
inline std::vector<Record> read_any(std::istream& in, std::vector<std::string>& header,
                                    const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<Record> rows;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header_seen) {
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            header = split_line(line, line_no);
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;
        auto fields = split_line(line, line_no);
        if (fields.size() != header.size())
            throw DataError(source + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        rows.push_back({line_no, std::move(fields)});
    }
    if (!header_seen) throw DataError(source + ": empty file, missing header");
    return rows;
}

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << quote(fields[i]);
    }
    out << '\n';
}

}  // namespace gradpred::csv
