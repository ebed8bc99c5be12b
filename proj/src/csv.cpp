#include "qarch/csv.hpp"

#include <cstdio>
#include <stdexcept>

namespace qarch {

std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
}

void CsvWriter::comment(const std::string& line) { out_ << "# " << line << "\n"; }

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ",";
        out_ << cells[i];
    }
    out_ << "\n";
}

void CsvWriter::numeric_row(const std::string& label, const std::vector<double>& values) {
    out_ << label;
    for (double v : values) out_ << "," << format_g17(v);
    out_ << "\n";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

double parse_double(const std::string& cell, const std::string& context) {
    try {
        std::size_t pos = 0;
        double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("bad numeric value '" + cell + "' in " + context);
    }
}

long parse_long(const std::string& cell, const std::string& context) {
    try {
        std::size_t pos = 0;
        long v = std::stol(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("bad integer value '" + cell + "' in " + context);
    }
}

}  // namespace qarch
