#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace aquaclust::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// RFC 4180-style parsing: quoted fields, "" escapes, CR/LF tolerant.
// The first row is the header; it must exist.
Table parse(std::string_view text);
Table read_file(const std::string& path);

std::string escape_field(std::string_view field);
std::string format_row(const std::vector<std::string>& fields);

// Shortest round-trip decimal representation (std::to_chars).
std::string format_double(double value);

std::string trim(std::string_view s);
std::string lower(std::string_view s);

}  // namespace aquaclust::csv
