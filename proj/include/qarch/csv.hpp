// CSV writing/reading helpers. All numeric output uses 17 significant
// digits so files round-trip doubles bit-exactly.
#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace qarch {

std::string format_g17(double x);

struct CsvWriter {
    explicit CsvWriter(const std::string& path);
    // '#'-prefixed provenance lines, written before any rows
    void comment(const std::string& line);
    void row(const std::vector<std::string>& cells);
    void numeric_row(const std::string& label, const std::vector<double>& values);
    bool good() const { return static_cast<bool>(out_); }

  private:
    std::ofstream out_;
};

std::vector<std::string> split_csv_line(const std::string& line);

// Reads a CSV file, skipping '#' comment lines. Returns rows of cells.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

double parse_double(const std::string& cell, const std::string& context);
long parse_long(const std::string& cell, const std::string& context);

}  // namespace qarch
