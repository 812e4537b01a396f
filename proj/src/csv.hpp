#pragma once

#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "exoval/error.hpp"

namespace exoval::csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double to_double(const std::string& s, std::size_t lineNo) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("line " + std::to_string(lineNo) + ": not a number: '" + s + "'");
    return v;
}

// Reads the header and maps the required column names to positions.
inline std::vector<std::size_t> header_columns(std::istream& in, const std::vector<std::string>& required) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty CSV input");
    const auto cols = split(line);
    std::vector<std::size_t> pos;
    for (const auto& name : required) {
        std::size_t found = cols.size();
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) found = i;
        if (found == cols.size()) throw ConfigError("CSV header lacks column '" + name + "'");
        pos.push_back(found);
    }
    return pos;
}

}  // namespace exoval::csv
