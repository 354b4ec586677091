#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "kanon/error.hpp"

namespace kanon::csv {

using Row = std::vector<std::string>;

/// Parses comma-separated text with double-quote quoting. Accepts LF and
/// CRLF line ends; a trailing newline does not produce an empty row.
inline std::vector<Row> parse(std::string_view text) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (!field.empty())
                throw ParseError("csv line " + std::to_string(line) + ": stray quote inside unquoted field");
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            end_field();
            field_started = true;
            break;
        case '\r':
            if (i + 1 < text.size() && text[i + 1] == '\n') break;
            field.push_back(c);
            break;
        case '\n':
            end_row();
            ++line;
            break;
        default:
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw ParseError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

inline bool needs_quoting(std::string_view field) {
    return field.find_first_of(",\"\r\n") != std::string_view::npos ||
           (!field.empty() && (field.front() == ' ' || field.back() == ' '));
}

inline void append_field(std::string& out, std::string_view field) {
    if (!needs_quoting(field)) {
        out.append(field);
        return;
    }
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

inline void append_row(std::string& out, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.push_back(',');
        append_field(out, row[i]);
    }
    out.push_back('\n');
}

inline std::string write(const std::vector<Row>& rows) {
    std::string out;
    for (const auto& r : rows) append_row(out, r);
    return out;
}

} // namespace kanon::csv
