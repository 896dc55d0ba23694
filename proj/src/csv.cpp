#include "riskrank/csv.hpp"

#include <fstream>
#include <sstream>

namespace riskrank::csv {

Table read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    Table table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
            line.erase(0, 3);  // UTF-8 BOM
        }
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    if (first) throw ValidationError("empty file (missing header): " + path);
    return table;
}

void require_header(const Table& table, const std::vector<std::string>& expected,
                    const std::string& path) {
    if (table.header == expected) return;
    std::ostringstream msg;
    msg << "header mismatch in " << path << ": expected '";
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i) msg << ',';
        msg << expected[i];
    }
    msg << "' got '";
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) msg << ',';
        msg << table.header[i];
    }
    msg << "'";
    throw ValidationError(msg.str());
}

std::string to_string(const Table& table) {
    std::string out;
    auto append_row = [&out](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out.push_back(',');
            out += row[i];
        }
        out.push_back('\n');
    };
    append_row(table.header);
    for (const auto& row : table.rows) append_row(row);
    return out;
}

void write(const std::string& path, const Table& table) {
    write_file_atomic(path, to_string(table));
}

}  // namespace riskrank::csv
