// SPDX-License-Identifier: MIT
#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace capeq {

/// Formats a double with 17 significant digits so that it reads back exactly.
std::string format_double(double v);

/// Writes a header row and numeric rows with ',' separators and '\n' line ends.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    void row(const std::vector<double>& values);
    void close();

private:
    std::ofstream os_;
    std::size_t columns_;
    std::string path_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Index of a header entry; ConfigError when absent.
    std::size_t column(const std::string& name) const;
    std::vector<double> values(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace capeq
