#pragma once

#include <string>
#include <vector>

#include "riskrank/common.hpp"

namespace riskrank::csv {

// Minimal CSV: comma separated, first row is the header, no quoting
// (all values produced by this project are comma-free), CR/LF tolerant,
// empty string means missing in nullable columns.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Table read(const std::string& path);

// Throws ValidationError naming the file when the header differs from
// `expected`.
void require_header(const Table& table, const std::vector<std::string>& expected,
                    const std::string& path);

std::string to_string(const Table& table);
void write(const std::string& path, const Table& table);

}  // namespace riskrank::csv
