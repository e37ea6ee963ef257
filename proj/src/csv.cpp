// SPDX-License-Identifier: MIT
#include "capeq/csv.hpp"

#include <cstdio>
#include <sstream>

#include "capeq/errors.hpp"

namespace capeq {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : os_(path, std::ios::binary | std::ios::trunc), columns_(header.size()), path_(path) {
    if (!os_) throw ConfigError(path + ": cannot open for writing");
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != columns_) throw NumericError(path_ + ": row width does not match the header");
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << format_double(values[i]);
    os_ << '\n';
}

void CsvWriter::close() {
    os_.close();
    if (os_.fail()) throw ConfigError(path_ + ": write failed");
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ConfigError("no column '" + name + "'");
}

std::vector<double> CsvTable::values(const std::string& name) const {
    const std::size_t j = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.at(j));
    return out;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(path + ": cannot open");
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw ConfigError(path + ": empty file");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.header.push_back(cell);
    }
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cell.size() || cell.empty())
                throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
            r.push_back(v);
        }
        if (r.size() != t.header.size())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                              " fields");
        t.rows.push_back(std::move(r));
    }
    return t;
}

}  // namespace capeq
